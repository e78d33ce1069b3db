//! Shared container layout for binary artifacts:
//!
//! ```text
//! magic      8 bytes
//! header_len u32 LE
//! header     JSON, header_len bytes
//! payload    f64 LE values
//! checksum   SHA-256 of everything above, 32 bytes
//! ```

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CHECKSUM_LEN: usize = 32;

pub(crate) fn encode(magic: &[u8; 8], header: &[u8], payload: impl IntoIterator<Item = f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 + header.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

/// Split a container into its header bytes and payload values after checking
/// magic and checksum.
pub(crate) fn decode<'a>(magic: &[u8; 8], bytes: &'a [u8], what: &str) -> Result<(&'a [u8], Vec<f64>)> {
    if bytes.len() < 8 + 4 + CHECKSUM_LEN || &bytes[..8] != magic {
        return Err(Error::Data(format!(
            "{what}: not a {} file (bad magic or truncated)",
            String::from_utf8_lossy(magic).trim_end_matches('\0')
        )));
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != sum {
        return Err(Error::Data(format!("{what}: checksum mismatch, file is corrupted")));
    }
    let header_len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let rest = &body[12..];
    if header_len > rest.len() || (rest.len() - header_len) % 8 != 0 {
        return Err(Error::Data(format!("{what}: header length {header_len} inconsistent with file size")));
    }
    let (header, payload) = rest.split_at(header_len);
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"TESTFMT1";

    #[test]
    fn round_trip_and_corruption() {
        let bytes = encode(MAGIC, b"{\"a\":1}", [1.5, -0.0, f64::MIN_POSITIVE]);
        let (h, v) = decode(MAGIC, &bytes, "t").unwrap();
        assert_eq!(h, b"{\"a\":1}");
        assert_eq!(v[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(encode(MAGIC, h, v), bytes);

        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(decode(MAGIC, &bad, "t").unwrap_err().to_string().contains("checksum"));
        assert!(decode(b"OTHERFMT", &bytes, "t").is_err());
        assert!(decode(MAGIC, &bytes[..10], "t").is_err());
    }
}

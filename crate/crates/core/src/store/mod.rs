//! Configuration and on-disk artifacts: run configs, dataset containers and
//! model weights.

mod config;
mod dataset;
mod frame;
mod weights;

pub use config::{GeneratorConfig, NormalizationRange, RunConfig};
pub use dataset::{
    manifest_path, DatasetFile, DatasetHeader, DatasetKind, DatasetRecord, Manifest, DATASET_MAGIC, DATASET_VERSION,
};
pub use weights::{WeightsFile, WeightsKind, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write `bytes` to a temporary sibling of `path`, then rename it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing").join("x.bin");
        assert_eq!(write_atomic(&p, b"x").unwrap_err().exit_code(), 5);
    }
}

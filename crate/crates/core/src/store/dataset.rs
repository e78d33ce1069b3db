use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, GeneratorConfig, RunConfig};
use super::frame;
use super::write_atomic;
use crate::contact::{grid_objects, ObjectProperties};
use crate::error::{Error, Result};
use crate::experiment::SplitSpec;
use crate::lfd::DemoPair;
use crate::trajectory::{ForceTrajectory, MotionTrajectory, FORCE_LEN, MOTION_LEN};

pub const DATASET_MAGIC: &[u8; 8] = b"HLFDDATA";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Unlabelled explorations of random objects.
    Exploration,
    /// Exploration plus demonstrated motion for each grid object.
    Demonstration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub exploration_len: usize,
    /// 0 for exploration datasets.
    pub motion_len: usize,
    /// Hz
    pub sample_rate: f64,
    pub count: usize,
    pub seed: u64,
    /// Digest of `generator`; checked on load and against the current config.
    pub config_digest: String,
    pub generator: GeneratorConfig,
    pub split: Option<SplitSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub object_id: u32,
    pub properties: Option<ObjectProperties>,
    pub exploration: ForceTrajectory,
    pub motion: Option<MotionTrajectory>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordMeta {
    object_id: u32,
    properties: Option<ObjectProperties>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskHeader {
    header: DatasetHeader,
    records: Vec<RecordMeta>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

/// Human-readable summary written next to every dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
    pub header: DatasetHeader,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl DatasetFile {
    fn header(cfg: &RunConfig, kind: DatasetKind, seed: u64, count: usize, split: Option<SplitSpec>) -> DatasetHeader {
        DatasetHeader {
            format_version: DATASET_VERSION,
            kind,
            exploration_len: FORCE_LEN,
            motion_len: if kind == DatasetKind::Demonstration { MOTION_LEN } else { 0 },
            sample_rate: cfg.exploration.sample_rate,
            count,
            seed,
            config_digest: cfg.generator_digest(),
            generator: cfg.generator(),
            split,
        }
    }

    /// Unlabelled explorations; object ids are 1-based record indices.
    pub fn exploration(cfg: &RunConfig, seed: u64, data: Vec<(ObjectProperties, ForceTrajectory)>) -> Self {
        let records: Vec<DatasetRecord> = data
            .into_iter()
            .enumerate()
            .map(|(i, (p, t))| DatasetRecord {
                object_id: i as u32 + 1,
                properties: Some(p),
                exploration: t,
                motion: None,
            })
            .collect();
        DatasetFile {
            header: Self::header(cfg, DatasetKind::Exploration, seed, records.len(), None),
            records,
        }
    }

    pub fn demonstrations(cfg: &RunConfig, seed: u64, demos: Vec<DemoPair>, split: Option<SplitSpec>) -> Self {
        let grid = grid_objects();
        let records: Vec<DatasetRecord> = demos
            .into_iter()
            .map(|d| DatasetRecord {
                object_id: d.object_id,
                properties: grid.iter().find(|o| o.id == d.object_id).map(|o| o.properties),
                exploration: d.exploration,
                motion: Some(d.motion),
            })
            .collect();
        DatasetFile {
            header: Self::header(cfg, DatasetKind::Demonstration, seed, records.len(), split),
            records,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let disk = DiskHeader {
            header: self.header.clone(),
            records: self
                .records
                .iter()
                .map(|r| RecordMeta {
                    object_id: r.object_id,
                    properties: r.properties,
                })
                .collect(),
        };
        let header = serde_json::to_vec(&disk).expect("dataset header serializes");
        let payload = self.records.iter().flat_map(|r| {
            let motion: &[f64] = r.motion.as_ref().map(|m| m.as_slice()).unwrap_or(&[]);
            r.exploration.as_slice().iter().chain(motion).copied()
        });
        frame::encode(DATASET_MAGIC, &header, payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values) = frame::decode(DATASET_MAGIC, bytes, "dataset")?;
        let disk: DiskHeader =
            serde_json::from_slice(header).map_err(|e| Error::Data(format!("dataset: malformed header: {e}")))?;
        let h = disk.header;
        if h.format_version != DATASET_VERSION {
            return Err(Error::Data(format!(
                "dataset: unsupported format version {} (expected {DATASET_VERSION})",
                h.format_version
            )));
        }
        if h.exploration_len != FORCE_LEN {
            return Err(Error::dimension("dataset exploration length", FORCE_LEN, h.exploration_len));
        }
        let want_motion = if h.kind == DatasetKind::Demonstration { MOTION_LEN } else { 0 };
        if h.motion_len != want_motion {
            return Err(Error::dimension("dataset motion length", want_motion, h.motion_len));
        }
        if h.count != disk.records.len() {
            return Err(Error::dimension("dataset record count", h.count, disk.records.len()));
        }
        let width = h.exploration_len + h.motion_len;
        if values.len() != h.count * width {
            return Err(Error::dimension("dataset payload values", h.count * width, values.len()));
        }
        let embedded = h.generator.digest();
        if embedded != h.config_digest {
            return Err(Error::Provenance(format!(
                "dataset: header digest {} does not match its embedded config ({embedded})",
                h.config_digest
            )));
        }
        let records = disk
            .records
            .into_iter()
            .zip(values.chunks_exact(width))
            .map(|(m, v)| {
                let (e, mo) = v.split_at(h.exploration_len);
                Ok(DatasetRecord {
                    object_id: m.object_id,
                    properties: m.properties,
                    exploration: ForceTrajectory::new(e.to_vec())?,
                    motion: if mo.is_empty() {
                        None
                    } else {
                        Some(MotionTrajectory::new(mo.to_vec())?)
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetFile { header: h, records })
    }

    pub fn manifest(&self, file: &str, bytes: &[u8]) -> Manifest {
        Manifest {
            file: file.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
            header: self.header.clone(),
        }
    }

    /// Write the container and its sidecar manifest, each atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        write_atomic(path, &bytes)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let manifest = serde_json::to_string_pretty(&self.manifest(&name, &bytes)).expect("manifest serializes");
        write_atomic(&manifest_path(path), manifest.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
    }

    /// Refuse data generated under a different configuration than `cfg`.
    pub fn verify_provenance(&self, cfg: &RunConfig) -> Result<()> {
        let current = cfg.generator_digest();
        if self.header.config_digest != current {
            return Err(Error::Provenance(format!(
                "dataset was generated under config digest {}, current config digest is {current}",
                self.header.config_digest
            )));
        }
        Ok(())
    }

    pub fn require_kind(&self, kind: DatasetKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Data(format!(
                "expected a {kind:?} dataset, got {:?}",
                self.header.kind
            )));
        }
        Ok(())
    }

    pub fn explorations(&self) -> Vec<ForceTrajectory> {
        self.records.iter().map(|r| r.exploration.clone()).collect()
    }

    pub fn demo_pairs(&self) -> Result<Vec<DemoPair>> {
        self.require_kind(DatasetKind::Demonstration)?;
        Ok(self
            .records
            .iter()
            .map(|r| DemoPair {
                object_id: r.object_id,
                exploration: r.exploration.clone(),
                motion: r.motion.clone().expect("demonstration records carry motions"),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{collect_demonstrations, collect_unsupervised, SplitName};

    #[test]
    fn exploration_round_trip_is_byte_identical() {
        let cfg = RunConfig::default();
        let ds = DatasetFile::exploration(&cfg, 9, collect_unsupervised(&cfg, 9, 3).unwrap());
        let bytes = ds.to_bytes();
        let back = DatasetFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.records[0].exploration.as_slice().len(), 2400);
    }

    #[test]
    fn demonstration_round_trip_and_split_tags() {
        let cfg = RunConfig::default();
        let split = SplitSpec::new(SplitName::StiffnessExtrap);
        let ds = DatasetFile::demonstrations(&cfg, 2, collect_demonstrations(&cfg, 2).unwrap(), Some(split.clone()));
        let back = DatasetFile::from_bytes(&ds.to_bytes()).unwrap();
        assert_eq!(back.header.split, Some(split));
        let pairs = back.demo_pairs().unwrap();
        assert_eq!(pairs.len(), 12);
        assert!(pairs.iter().all(|p| p.motion.as_slice().len() == 6000));
    }

    #[test]
    fn stale_config_is_a_provenance_error() {
        let cfg = RunConfig::default();
        let ds = DatasetFile::exploration(&cfg, 1, collect_unsupervised(&cfg, 1, 1).unwrap());
        let mut other = cfg.clone();
        other.exploration.press_speed = 0.02;
        let err = ds.verify_provenance(&other).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(matches!(err, Error::Provenance(_)));
        ds.verify_provenance(&cfg).unwrap();
    }

    #[test]
    fn tampered_header_digest_is_rejected() {
        let cfg = RunConfig::default();
        let mut ds = DatasetFile::exploration(&cfg, 1, collect_unsupervised(&cfg, 1, 1).unwrap());
        ds.header.generator.noise.force_noise_sd = 0.5;
        assert!(matches!(DatasetFile::from_bytes(&ds.to_bytes()), Err(Error::Provenance(_))));
    }
}

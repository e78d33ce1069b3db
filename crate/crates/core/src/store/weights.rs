use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::frame;
use super::write_atomic;
use crate::error::{Error, Result};
use crate::experiment::PretrainedEncoder;
use crate::lfd::{LfdModel, MOTION_W};
use crate::numerics::{ParamSet, Tensor2};
use crate::signal::{ForcePreprocessor, NormalizationStats};
use crate::trajectory::{ExplorationSubset, MOTION_LEN};
use crate::vae::PretrainOutcome;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"HLFDWGHT";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsKind {
    /// Pre-trained β-VAE (encoder and haptic decoder).
    Encoder,
    /// Encoder plus motion decoder, ready for generation.
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskHeader {
    format_version: u32,
    kind: WeightsKind,
    seed: u64,
    config_digest: String,
    config: RunConfig,
    subset: ExplorationSubset,
    preprocessor: ForcePreprocessor,
    motion_stats: Option<NormalizationStats>,
    tensors: Vec<TensorMeta>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub kind: WeightsKind,
    pub seed: u64,
    /// `config.training_digest()` at save time.
    pub config_digest: String,
    pub config: RunConfig,
    pub subset: ExplorationSubset,
    pub preprocessor: ForcePreprocessor,
    pub motion_stats: Option<NormalizationStats>,
    pub params: ParamSet,
}

fn check_shape(params: &ParamSet, name: &str, rows: usize, cols: usize) -> Result<()> {
    let t = params.require(name)?;
    if t.shape() != (rows, cols) {
        return Err(Error::dimension(
            format!("weights tensor `{name}`"),
            format!("{rows}x{cols}"),
            format!("{}x{}", t.rows(), t.cols()),
        ));
    }
    Ok(())
}

impl WeightsFile {
    pub fn encoder(cfg: &RunConfig, seed: u64, enc: &PretrainedEncoder) -> Self {
        WeightsFile {
            kind: WeightsKind::Encoder,
            seed,
            config_digest: cfg.training_digest(),
            config: cfg.clone(),
            subset: enc.subset,
            preprocessor: enc.preprocessor.clone(),
            motion_stats: None,
            params: enc.outcome.params.clone(),
        }
    }

    pub fn model(cfg: &RunConfig, seed: u64, model: &LfdModel) -> Result<Self> {
        let mut params = model.encoder.clone();
        params.extend(model.decoder.clone())?;
        Ok(WeightsFile {
            kind: WeightsKind::Model,
            seed,
            config_digest: cfg.training_digest(),
            config: cfg.clone(),
            subset: ExplorationSubset::Both,
            preprocessor: model.force.clone(),
            motion_stats: Some(model.motion_stats.clone()),
            params,
        })
    }

    /// Shapes implied by the embedded configuration.
    pub fn validate(&self) -> Result<()> {
        let v = &self.config.vae;
        let (input, hidden, latent) = (self.subset.input_dim(), v.encoder_hidden, v.latent_dim);
        check_shape(&self.params, "enc.hidden.w", hidden, input)?;
        check_shape(&self.params, "enc.hidden.b", 1, hidden)?;
        for head in ["enc.mu", "enc.logvar"] {
            check_shape(&self.params, &format!("{head}.w"), latent, hidden)?;
            check_shape(&self.params, &format!("{head}.b"), 1, latent)?;
        }
        match self.kind {
            WeightsKind::Encoder => {
                check_shape(&self.params, "dec.hidden.w", v.decoder_hidden, latent)?;
                check_shape(&self.params, "dec.out.w", input, v.decoder_hidden)?;
            }
            WeightsKind::Model => {
                check_shape(&self.params, MOTION_W, MOTION_LEN, latent)?;
                check_shape(&self.params, crate::lfd::MOTION_B, 1, MOTION_LEN)?;
                let stats = self
                    .motion_stats
                    .as_ref()
                    .ok_or_else(|| Error::Data("model weights lack motion normalization".into()))?;
                if stats.channels() != crate::trajectory::MOTION_CHANNELS {
                    return Err(Error::dimension("motion normalization channels", 3, stats.channels()));
                }
            }
        }
        if self.params.iter().any(|(_, t)| !t.is_finite()) {
            return Err(Error::numeric("weights load"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let disk = DiskHeader {
            format_version: WEIGHTS_VERSION,
            kind: self.kind,
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            config: self.config.clone(),
            subset: self.subset,
            preprocessor: self.preprocessor.clone(),
            motion_stats: self.motion_stats.clone(),
            tensors: self
                .params
                .iter()
                .map(|(n, t)| TensorMeta {
                    name: n.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&disk).expect("weights header serializes");
        frame::encode(
            WEIGHTS_MAGIC,
            &header,
            self.params.iter().flat_map(|(_, t)| t.data().iter().copied()),
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values) = frame::decode(WEIGHTS_MAGIC, bytes, "weights")?;
        let disk: DiskHeader =
            serde_json::from_slice(header).map_err(|e| Error::Data(format!("weights: malformed header: {e}")))?;
        if disk.format_version != WEIGHTS_VERSION {
            return Err(Error::Data(format!(
                "weights: unsupported format version {} (expected {WEIGHTS_VERSION})",
                disk.format_version
            )));
        }
        let total: usize = disk.tensors.iter().map(|t| t.rows * t.cols).sum();
        if total != values.len() {
            return Err(Error::dimension("weights payload values", total, values.len()));
        }
        let mut params = ParamSet::new();
        let mut offset = 0;
        for t in &disk.tensors {
            let n = t.rows * t.cols;
            params.insert(t.name.clone(), Tensor2::from_vec(t.rows, t.cols, values[offset..offset + n].to_vec())?)?;
            offset += n;
        }
        let embedded = disk.config.training_digest();
        if embedded != disk.config_digest {
            return Err(Error::Provenance(format!(
                "weights: header digest {} does not match the embedded config ({embedded})",
                disk.config_digest
            )));
        }
        let w = WeightsFile {
            kind: disk.kind,
            seed: disk.seed,
            config_digest: disk.config_digest,
            config: disk.config,
            subset: disk.subset,
            preprocessor: disk.preprocessor,
            motion_stats: disk.motion_stats,
            params,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
    }

    /// Refuse weights trained under a different configuration than `cfg`.
    pub fn verify_provenance(&self, cfg: &RunConfig) -> Result<()> {
        let current = cfg.training_digest();
        if self.config_digest != current {
            return Err(Error::Provenance(format!(
                "weights were trained under config digest {}, current config digest is {current}",
                self.config_digest
            )));
        }
        Ok(())
    }

    pub fn require_kind(&self, kind: WeightsKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Data(format!("expected {kind:?} weights, got {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn to_pretrained(&self) -> Result<PretrainedEncoder> {
        self.require_kind(WeightsKind::Encoder)?;
        Ok(PretrainedEncoder {
            preprocessor: self.preprocessor.clone(),
            subset: self.subset,
            outcome: PretrainOutcome {
                params: self.params.clone(),
                history: Vec::new(),
            },
        })
    }

    pub fn to_model(&self) -> Result<LfdModel> {
        self.require_kind(WeightsKind::Model)?;
        Ok(LfdModel {
            force: self.preprocessor.clone(),
            motion_stats: self.motion_stats.clone().expect("validated on construction"),
            encoder: self.params.subset("enc."),
            decoder: self.params.subset("motion."),
        })
    }
}

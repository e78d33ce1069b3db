use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contact::{ContactModel, ExplorationProgram, NoiseConfig};
use crate::embedding::TsneConfig;
use crate::error::{Error, Result};
use crate::experiment::ExperimentSettings;
use crate::lfd::{DemonstratorConfig, LfdConfig};
use crate::signal::{FilterSpec, DEFAULT_RANGE};
use crate::vae::VaeConfig;

/// Target interval of min-max normalization, shared by forces and motions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for NormalizationRange {
    fn default() -> Self {
        NormalizationRange {
            lo: DEFAULT_RANGE.0,
            hi: DEFAULT_RANGE.1,
        }
    }
}

impl NormalizationRange {
    pub fn pair(self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::Config(format!(
                "normalization: need lo < hi, got lo = {}, hi = {}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// The sections that determine generated data; embedded in every dataset file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub exploration: ExplorationProgram,
    pub contact: ContactModel,
    pub noise: NoiseConfig,
    pub demonstrator: DemonstratorConfig,
}

impl GeneratorConfig {
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

/// Every tunable of the pipeline in one TOML document. Missing keys take
/// their defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for single-run commands; the experiment uses its own seed list.
    pub seed: u64,
    pub exploration: ExplorationProgram,
    pub contact: ContactModel,
    pub noise: NoiseConfig,
    pub demonstrator: DemonstratorConfig,
    pub filter: FilterSpec,
    pub normalization: NormalizationRange,
    pub vae: VaeConfig,
    pub lfd: LfdConfig,
    pub tsne: TsneConfig,
    pub experiment: ExperimentSettings,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn digest_of<T: Serialize>(value: &T) -> String {
    // serde_json keeps struct field order, so the encoding is canonical.
    sha256_hex(&serde_json::to_vec(value).expect("config types always serialize"))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.exploration.validate()?;
        self.noise.validate()?;
        self.demonstrator.validate()?;
        self.filter.validate()?;
        self.normalization.validate()?;
        self.vae.validate()?;
        self.lfd.validate()?;
        self.experiment.validate()?;
        Ok(())
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            exploration: self.exploration.clone(),
            contact: self.contact.clone(),
            noise: self.noise.clone(),
            demonstrator: self.demonstrator.clone(),
        }
    }

    /// Digest of everything that determines generated data.
    pub fn generator_digest(&self) -> String {
        self.generator().digest()
    }

    /// Digest of everything that determines trained weights, given the data.
    pub fn training_digest(&self) -> String {
        digest_of(&(
            self.generator_digest(),
            &self.filter,
            &self.normalization,
            &self.vae,
            &self.lfd,
        ))
    }

    /// Digest of the whole configuration.
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::from_toml_str("[vae]\nlearnig_rate = 0.1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("learnig_rate"), "{err}");
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn digests_track_the_relevant_sections() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.vae.learning_rate = 2e-4;
        assert_eq!(a.generator_digest(), b.generator_digest());
        assert_ne!(a.training_digest(), b.training_digest());
        b.noise.force_noise_sd = 0.3;
        assert_ne!(a.generator_digest(), b.generator_digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = RunConfig::from_toml_str("[filter]\nsample_rate = 70000\npassband_edge = 1000\nstopband_edge = 100\n")
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}

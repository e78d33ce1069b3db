//! Preprocessing applied before training: low-pass filtering of force
//! trajectories and min-max normalization, with ranges shared per unit.

mod butterworth;
mod normalize;

pub use butterworth::{design_butterworth, filter_apply, filter_force, FilterCoeffs, FilterSpec};
pub use normalize::{fit_normalizer, NormalizationStats, DEFAULT_RANGE};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trajectory::{ForceTrajectory, FORCE_CHANNELS};

/// Forces (N) and torques (N·m) are each scaled as one group. Scaling every
/// axis on its own would stretch an axis that only ever sees sensor noise to
/// the full target range.
pub const UNIT_GROUPS: [&[usize]; 2] = [&[0, 1, 2], &[3, 4, 5]];

/// Filter plus fitted normalization for raw force trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcePreprocessor {
    pub filter: FilterCoeffs,
    pub stats: NormalizationStats,
}

impl ForcePreprocessor {
    /// Fit normalization on the filtered training trajectories.
    pub fn fit(filter: FilterCoeffs, train: &[ForceTrajectory], range: (f64, f64)) -> Result<Self> {
        let filtered = train
            .iter()
            .map(|t| filter_force(&filter, t))
            .collect::<Result<Vec<_>>>()?;
        let stats = fit_normalizer(filtered.iter().map(|t| t.as_slice()), FORCE_CHANNELS, range)?
            .pooled(&UNIT_GROUPS)?;
        Ok(ForcePreprocessor { filter, stats })
    }

    pub fn apply(&self, raw: &ForceTrajectory) -> Result<Vec<f64>> {
        self.stats.normalize(filter_force(&self.filter, raw)?.as_slice())
    }
}

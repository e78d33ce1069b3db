//! Fixed-layout trajectory containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per exploratory action (2 s at 100 Hz).
pub const STEPS_PER_ACTION: usize = 200;
/// Exploratory actions: pressing, then lateral motion.
pub const EXPLORATION_ACTIONS: usize = 2;
/// Fx, Fy, Fz, Tx, Ty, Tz.
pub const FORCE_CHANNELS: usize = 6;
pub const FORCE_LEN: usize = STEPS_PER_ACTION * EXPLORATION_ACTIONS * FORCE_CHANNELS;

/// 20 s at 100 Hz.
pub const MOTION_STEPS: usize = 2000;
/// x, y, z.
pub const MOTION_CHANNELS: usize = 3;
pub const MOTION_LEN: usize = MOTION_STEPS * MOTION_CHANNELS;

fn check(values: &[f64], len: usize, what: &str) -> Result<()> {
    if values.len() != len {
        return Err(Error::dimension(what, len, values.len()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what}: non-finite value at index {i}")));
    }
    Ok(())
}

/// Exploration force/torque recording: action-major, then time, then channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ForceTrajectory(Vec<f64>);

impl ForceTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check(&values, FORCE_LEN, "force trajectory")?;
        Ok(ForceTrajectory(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, action: usize, step: usize, channel: usize) -> f64 {
        self.0[(action * STEPS_PER_ACTION + step) * FORCE_CHANNELS + channel]
    }

    /// One channel across both actions, in time order.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.0.iter().skip(channel).step_by(FORCE_CHANNELS).copied().collect()
    }
}

impl TryFrom<Vec<f64>> for ForceTrajectory {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ForceTrajectory> for Vec<f64> {
    fn from(t: ForceTrajectory) -> Self {
        t.0
    }
}

/// End-effector positions: time-major, then x/y/z, in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MotionTrajectory(Vec<f64>);

impl MotionTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check(&values, MOTION_LEN, "motion trajectory")?;
        Ok(MotionTrajectory(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn position(&self, step: usize) -> [f64; 3] {
        let i = step * MOTION_CHANNELS;
        [self.0[i], self.0[i + 1], self.0[i + 2]]
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.0.chunks_exact(MOTION_CHANNELS).map(|c| [c[0], c[1], c[2]])
    }
}

impl TryFrom<Vec<f64>> for MotionTrajectory {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MotionTrajectory> for Vec<f64> {
    fn from(t: MotionTrajectory) -> Self {
        t.0
    }
}

/// Which exploratory actions an encoder sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationSubset {
    PressingOnly,
    LateralOnly,
    Both,
}

impl ExplorationSubset {
    pub const ALL: [ExplorationSubset; 3] = [Self::PressingOnly, Self::LateralOnly, Self::Both];

    pub fn input_dim(self) -> usize {
        match self {
            Self::Both => FORCE_LEN,
            _ => FORCE_LEN / EXPLORATION_ACTIONS,
        }
    }

    /// Slice the relevant actions out of a full-length force vector.
    pub fn select<'a>(self, full: &'a [f64]) -> &'a [f64] {
        let half = FORCE_LEN / EXPLORATION_ACTIONS;
        match self {
            Self::PressingOnly => &full[..half],
            Self::LateralOnly => &full[half..],
            Self::Both => full,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PressingOnly => "pressing-only",
            Self::LateralOnly => "lateral-only",
            Self::Both => "both",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_sizes() {
        assert_eq!(FORCE_LEN, 2400);
        assert_eq!(MOTION_LEN, 6000);
        assert_eq!(ExplorationSubset::PressingOnly.input_dim(), 1200);
    }

    #[test]
    fn constructors_enforce_length_and_finiteness() {
        assert!(ForceTrajectory::new(vec![0.0; 2399]).is_err());
        let mut v = vec![0.0; MOTION_LEN];
        v[17] = f64::NAN;
        assert!(matches!(MotionTrajectory::new(v), Err(Error::Data(_))));
    }

    #[test]
    fn serde_rejects_wrong_length() {
        let json = serde_json::to_string(&vec![1.0; 5]).unwrap();
        assert!(serde_json::from_str::<ForceTrajectory>(&json).is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contact::{grid_objects, GridObject};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitName {
    StiffnessInterp,
    StiffnessExtrap,
    FrictionInterp,
    FrictionExtrap,
}

impl SplitName {
    pub const ALL: [SplitName; 4] = [
        SplitName::StiffnessInterp,
        SplitName::StiffnessExtrap,
        SplitName::FrictionInterp,
        SplitName::FrictionExtrap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::StiffnessInterp => "stiffness-interp",
            SplitName::StiffnessExtrap => "stiffness-extrap",
            SplitName::FrictionInterp => "friction-interp",
            SplitName::FrictionExtrap => "friction-extrap",
        }
    }

    fn is_train(self, o: &GridObject) -> bool {
        match self {
            SplitName::StiffnessInterp => matches!(o.stiffness_level, 1 | 4),
            SplitName::StiffnessExtrap => matches!(o.stiffness_level, 2 | 3),
            SplitName::FrictionInterp => matches!(o.friction_level, 1 | 3),
            SplitName::FrictionExtrap => matches!(o.friction_level, 1 | 2),
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = SplitName::ALL.iter().map(|n| n.as_str()).collect();
                Error::Config(format!("unknown split `{s}`; valid names: {}", valid.join(", ")))
            })
    }
}

/// Partition of the twelve grid objects into demonstration (train) and held-out (test) sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub name: SplitName,
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitSpec {
    pub fn new(name: SplitName) -> Self {
        let (train, test): (Vec<GridObject>, Vec<GridObject>) =
            grid_objects().into_iter().partition(|o| name.is_train(o));
        SplitSpec {
            name,
            train: train.iter().map(|o| o.id).collect(),
            test: test.iter().map(|o| o.id).collect(),
        }
    }

    /// Fails unless every id in `used` is a training object of this split.
    pub fn audit_training_ids(&self, used: impl IntoIterator<Item = u32>) -> Result<()> {
        for id in used {
            if !self.train.contains(&id) {
                return Err(Error::Data(format!(
                    "split {}: object {id} is not a training object but was passed to training",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub fn make_splits() -> Vec<SplitSpec> {
    SplitName::ALL.into_iter().map(SplitSpec::new).collect()
}

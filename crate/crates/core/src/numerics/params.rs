use serde::{Deserialize, Serialize};

use super::Tensor2;
use crate::error::{Error, Result};

/// Ordered collection of named parameter tensors.
///
/// Insertion order is preserved and is the order used everywhere a parameter
/// set is iterated or serialized, so training and persistence are
/// deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<(String, Tensor2)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor2) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, value: Tensor2) -> Result<Self> {
        self.insert(name, value)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor2> {
        self.get(name)
            .ok_or_else(|| Error::Data(format!("missing parameter `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor2)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor2::zeros(t.rows(), t.cols())))
                .collect(),
        }
    }

    /// Entries whose names start with `prefix`, in order.
    pub fn subset(&self, prefix: &str) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .filter(|(n, _)| n.starts_with(prefix))
                .cloned()
                .collect(),
        }
    }

    /// Append every entry of `other`; names must not collide.
    pub fn extend(&mut self, other: ParamSet) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(n, t)?;
        }
        Ok(())
    }

    /// Error unless `other` has the same names, in the same order, with the same shapes.
    pub fn check_congruent(&self, other: &ParamSet, context: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::dimension(
                context,
                format!("{} entries", self.len()),
                format!("{} entries", other.len()),
            ));
        }
        for ((na, ta), (nb, tb)) in self.entries.iter().zip(&other.entries) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(Error::dimension(
                    context,
                    format!("`{na}` {}x{}", ta.rows(), ta.cols()),
                    format!("`{nb}` {}x{}", tb.rows(), tb.cols()),
                ));
            }
        }
        Ok(())
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-channel affine map fitted on training data. Values are interleaved:
/// element `i` belongs to channel `i % channels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

pub const DEFAULT_RANGE: (f64, f64) = (0.0, 0.9);

/// Fit per-channel min/max over every sample of the training set.
pub fn fit_normalizer<'a, I>(dataset: I, channels: usize, range: (f64, f64)) -> Result<NormalizationStats>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if channels == 0 {
        return Err(Error::Config("normalizer needs at least one channel".into()));
    }
    if !(range.0 < range.1) {
        return Err(Error::Config(format!("normalization range {range:?} is empty")));
    }
    let mut min = vec![f64::INFINITY; channels];
    let mut max = vec![f64::NEG_INFINITY; channels];
    let mut seen = 0usize;
    for sample in dataset {
        if sample.len() % channels != 0 || sample.is_empty() {
            return Err(Error::dimension(
                "fit_normalizer sample",
                format!("a non-zero multiple of {channels}"),
                sample.len(),
            ));
        }
        for (i, &v) in sample.iter().enumerate() {
            let c = i % channels;
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::Data("cannot fit normalizer on an empty dataset".into()));
    }
    Ok(NormalizationStats {
        min,
        max,
        lo: range.0,
        hi: range.1,
    })
}

impl NormalizationStats {
    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// Give every channel in each group the group's combined range, so channels
    /// sharing a unit keep their relative scale. A group index out of range is
    /// a dimension error.
    pub fn pooled(mut self, groups: &[&[usize]]) -> Result<Self> {
        let c = self.channels();
        for g in groups {
            if let Some(&bad) = g.iter().find(|&&i| i >= c) {
                return Err(Error::dimension("normalization group channel", format!("< {c}"), bad));
            }
            let mn = g.iter().map(|&i| self.min[i]).fold(f64::INFINITY, f64::min);
            let mx = g.iter().map(|&i| self.max[i]).fold(f64::NEG_INFINITY, f64::max);
            for &i in g.iter() {
                self.min[i] = mn;
                self.max[i] = mx;
            }
        }
        Ok(self)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() % self.channels() != 0 {
            return Err(Error::dimension(
                "normalization layout",
                format!("a multiple of {} channels", self.channels()),
                x.len(),
            ));
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let span = self.hi - self.lo;
        let c = self.channels();
        Ok(x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (mn, mx) = (self.min[i % c], self.max[i % c]);
                if mx > mn {
                    self.lo + (v - mn) / (mx - mn) * span
                } else {
                    self.lo
                }
            })
            .collect())
    }

    /// Inverse of [`normalize`](Self::normalize); degenerate channels map back to their single value.
    pub fn denormalize(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let span = self.hi - self.lo;
        let c = self.channels();
        Ok(y.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (mn, mx) = (self.min[i % c], self.max[i % c]);
                if mx > mn {
                    mn + (v - self.lo) / span * (mx - mn)
                } else {
                    mn
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_sample_hits_range_ends() {
        let x = [1.0, 10.0, 3.0, -2.0, 2.0, 4.0];
        let s = fit_normalizer([&x[..]], 2, DEFAULT_RANGE).unwrap();
        let y = s.normalize(&x).unwrap();
        assert_eq!(y[3], 0.0);
        assert_eq!(y[1], 0.0 + 0.9 * (10.0 - (-2.0)) / 12.0);
        assert_eq!(y[0], 0.0);
        assert!((y[2] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn pooling_shares_one_range_per_group() {
        let x = [0.0, -1.0, 5.0, 4.0, 1.0, 2.0, 3.0, 7.0];
        let s = fit_normalizer([&x[..]], 4, DEFAULT_RANGE).unwrap().pooled(&[&[0, 1], &[2]]).unwrap();
        assert_eq!(s.min, vec![-1.0, -1.0, 3.0, 4.0]);
        assert_eq!(s.max, vec![2.0, 2.0, 5.0, 7.0]);
        assert!(matches!(
            fit_normalizer([&x[..]], 4, DEFAULT_RANGE).unwrap().pooled(&[&[4]]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn degenerate_channel_maps_to_lo() {
        let x = [5.0, 1.0, 5.0, 2.0];
        let s = fit_normalizer([&x[..]], 2, DEFAULT_RANGE).unwrap();
        let y = s.normalize(&x).unwrap();
        assert_eq!(y[0], 0.0);
        assert_eq!(y[2], 0.0);
        assert!(y.iter().all(|v| v.is_finite()));
        assert_eq!(s.denormalize(&y).unwrap()[0], 5.0);
    }

    #[test]
    fn extrapolation_is_not_clamped() {
        let s = fit_normalizer([&[0.0, 1.0][..], &[2.0, 3.0][..]], 1, DEFAULT_RANGE).unwrap();
        let y = s.normalize(&[4.0, -1.0]).unwrap();
        assert!((y[0] - 1.2).abs() < 1e-12);
        assert!((y[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let empty: Vec<&[f64]> = vec![];
        assert!(matches!(fit_normalizer(empty, 3, DEFAULT_RANGE), Err(Error::Data(_))));
        let s = fit_normalizer([&[0.0, 1.0, 2.0][..]], 3, DEFAULT_RANGE).unwrap();
        assert!(matches!(s.normalize(&[1.0; 4]), Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_and_order(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 6), 1..6),
            probe in prop::collection::vec(-2e3f64..2e3, 6),
        ) {
            let s = fit_normalizer(rows.iter().map(|r| r.as_slice()), 3, DEFAULT_RANGE).unwrap();
            let degenerate: Vec<bool> = (0..3).map(|c| s.max[c] <= s.min[c]).collect();
            let y = s.normalize(&probe).unwrap();
            let back = s.denormalize(&y).unwrap();
            for (i, (a, b)) in probe.iter().zip(&back).enumerate() {
                if !degenerate[i % 3] {
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0) * 10.0);
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    if i % 3 == j % 3 && probe[i] < probe[j] && !degenerate[i % 3] {
                        prop_assert!(y[i] <= y[j]);
                    }
                }
            }
        }
    }
}

//! Exact t-SNE.
//!
//! Quadratic in the number of points, which is fine for the few hundred
//! latents analysed here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// 50 rather than the customary 200: with the per-coordinate gains, 200
    /// makes the post-exaggeration KL oscillate for the few hundred points
    /// embedded here.
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Derived from the run's master seed by the caller; never read from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 15.0,
            iterations: 1000,
            learning_rate: 50.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::Config(format!("t-SNE needs at least 4 points, got {n}")));
        }
        if !(self.perplexity > 1.0 && self.perplexity < (n - 1) as f64) {
            return Err(Error::Config(format!(
                "perplexity {} infeasible for {n} points (need 1 < perplexity < {})",
                self.perplexity,
                n - 1
            )));
        }
        if self.iterations < 250 {
            return Err(Error::Config(format!(
                "t-SNE needs at least 250 iterations, got {}",
                self.iterations
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("t-SNE learning rate must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    /// KL(P‖Q) after every iteration, measured against the unexaggerated P.
    pub kl_history: Vec<f64>,
}

fn squared_distances(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = points.len();
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::dimension("t-SNE point", d, p.len()));
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    Ok(out)
}

/// Conditional distribution `p(·|i)` over the entries of `dist` (squared
/// distances to every other point) whose entropy in nats equals
/// `ln(perplexity)`. Returns the probabilities and the achieved entropy.
pub fn conditional_distribution(dist: &[f64], perplexity: f64) -> (Vec<f64>, f64) {
    let target = perplexity.ln();
    let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let eval = |beta: f64| {
        let w: Vec<f64> = dist.iter().map(|d| (-beta * (d - dmin)).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean_d: f64 = w.iter().zip(dist).map(|(w, d)| w * (d - dmin)).sum::<f64>() / z;
        let h = z.ln() + beta * mean_d;
        (w.into_iter().map(|v| v / z).collect::<Vec<_>>(), h)
    };
    let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
    let mut best = eval(beta);
    for _ in 0..200 {
        let diff = best.1 - target;
        if diff.abs() < 1e-12 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        best = eval(beta);
    }
    best
}

fn kl(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, n)| p * (p / (n / z)).ln())
        .sum()
}

/// Embed `points` in two dimensions.
pub fn tsne(points: &[Vec<f64>], cfg: &TsneConfig) -> Result<TsneResult> {
    let n = points.len();
    cfg.validate(n)?;
    let d2 = squared_distances(points)?;

    // Symmetrised joint probabilities.
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d2[i * n + j]).collect();
        let (row, _) = conditional_distribution(&others, cfg.perplexity);
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            p[i * n + j] = row[k];
        }
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-300);
            }
        }
    }

    let mut rng = seeded(cfg.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [1e-4 * standard_normal(&mut rng), 1e-4 * standard_normal(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut kl_history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let exaggerating = it < cfg.exaggeration_iterations;
        let exag = if exaggerating { cfg.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }

        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let mult = (exag * joint[i * n + j] - q / z) * q;
                g[0] += mult * (y[i][0] - y[j][0]);
                g[1] += mult * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let grad = 4.0 * g[d];
                gains[i][d] = if (grad > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * grad;
            }
        }
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
        }
        let mean = y.iter().fold([0.0; 2], |m, v| [m[0] + v[0], m[1] + v[1]]);
        for yi in &mut y {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }

        // Cost at the updated positions.
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        kl_history.push(kl(&joint, &num, z));
    }
    if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::numeric("tsne"));
    }
    Ok(TsneResult {
        embedding: y,
        kl_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn bandwidth_search_hits_target_entropy() {
        let mut rng = seeded(5);
        for perp in [2.0, 5.0, 15.0, 30.0] {
            let dist: Vec<f64> = (0..99).map(|_| rng.random_range(0.0..10.0)).collect();
            let (p, h) = conditional_distribution(&dist, perp);
            let direct: f64 = -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
            assert!((direct - perp.ln()).abs() < 1e-5, "{perp}: {direct}");
            assert!((h - direct).abs() < 1e-9);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = TsneConfig::default();
        assert!(cfg.validate(3).is_err());
        assert!(cfg.validate(16).is_err());
        assert!(cfg.validate(17).is_ok());
        let short = TsneConfig {
            iterations: 100,
            ..TsneConfig::default()
        };
        assert!(short.validate(100).is_err());
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{mean, median, std_dev, wilcoxon_greater, WilcoxonResult};
use super::{Method, SplitName};
use crate::error::{Error, Result};
use crate::store::{write_atomic, RunConfig};
use crate::vae::LossParts;

/// Test scores of one held-out object, averaged over its noisy explorations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub object_id: u32,
    /// m
    pub motion_rmse: f64,
    /// N
    pub force_rmse: f64,
    pub motion_draws: Vec<f64>,
    pub force_draws: Vec<f64>,
}

/// One (split, method, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub split: SplitName,
    pub method: Method,
    pub seed: u64,
    /// Mean over test objects, m.
    pub motion_rmse: f64,
    /// Mean over test objects, N.
    pub force_rmse: f64,
    pub final_train_loss: f64,
    pub train_ids: Vec<u32>,
    pub objects: Vec<ObjectScore>,
    /// `(epoch, loss)` of motion training, thinned.
    pub loss_curve: Vec<(usize, f64)>,
}

/// Organisation of a pre-trained encoder's latents over the grid objects.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentSilhouette {
    pub seed: u64,
    pub method: Method,
    pub stiffness: f64,
    pub friction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainCurve {
    pub seed: u64,
    pub unsupervised: usize,
    pub history: Vec<LossParts>,
}

/// Aggregate over seeds of one (split, method) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub split: SplitName,
    pub method: Method,
    pub seeds: usize,
    pub motion_mean: f64,
    pub motion_sd: f64,
    pub motion_median: f64,
    pub force_mean: f64,
    pub force_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_digest: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
    pub latent_silhouettes: Vec<LatentSilhouette>,
    pub pretrain_curves: Vec<PretrainCurve>,
}

fn csv_text<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("flat rows serialize to csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

#[derive(Serialize)]
struct CellRow {
    split: SplitName,
    method: Method,
    seed: u64,
    motion_rmse: f64,
    force_rmse: f64,
    final_train_loss: f64,
    test_objects: usize,
}

#[derive(Serialize)]
struct ObjectRow {
    split: SplitName,
    method: Method,
    seed: u64,
    object_id: u32,
    draw: usize,
    motion_rmse: f64,
    force_rmse: f64,
}

#[derive(Serialize)]
struct CurveRow {
    phase: &'static str,
    split: String,
    method: Method,
    seed: u64,
    epoch: usize,
    loss: f64,
    reconstruction: Option<f64>,
    kl: Option<f64>,
}

impl ExperimentReport {
    pub fn splits(&self) -> Vec<SplitName> {
        let mut v: Vec<SplitName> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.split) {
                v.push(c.split);
            }
        }
        v
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut v: Vec<Method> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.method) {
                v.push(c.method);
            }
        }
        v
    }

    /// Cells of one (split, method), in seed order.
    pub fn cells_for(&self, split: SplitName, method: Method) -> Vec<&CellResult> {
        let mut v: Vec<&CellResult> = self
            .cells
            .iter()
            .filter(|c| c.split == split && c.method == method)
            .collect();
        v.sort_by_key(|c| c.seed);
        v
    }

    /// Every (split, method, seed) present exactly once with non-negative scores.
    pub fn check_complete(&self) -> Result<()> {
        for split in self.splits() {
            for method in self.methods() {
                let seeds: Vec<u64> = self.cells_for(split, method).iter().map(|c| c.seed).collect();
                if seeds != self.seeds {
                    return Err(Error::Data(format!(
                        "report cell set for {split}/{method} has seeds {seeds:?}, expected {:?}",
                        self.seeds
                    )));
                }
            }
        }
        if let Some(c) = self.cells.iter().find(|c| !(c.motion_rmse >= 0.0 && c.force_rmse >= 0.0)) {
            return Err(Error::Data(format!(
                "negative or missing rmse in {}/{} seed {}",
                c.split, c.method, c.seed
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for split in self.splits() {
            for method in self.methods() {
                let cells = self.cells_for(split, method);
                let motion: Vec<f64> = cells.iter().map(|c| c.motion_rmse).collect();
                let force: Vec<f64> = cells.iter().map(|c| c.force_rmse).collect();
                rows.push(SummaryRow {
                    split,
                    method,
                    seeds: cells.len(),
                    motion_mean: mean(&motion),
                    motion_sd: std_dev(&motion),
                    motion_median: median(&motion),
                    force_mean: mean(&force),
                    force_sd: std_dev(&force),
                });
            }
        }
        rows
    }

    pub fn summary_row(&self, split: SplitName, method: Method) -> Option<SummaryRow> {
        self.summary().into_iter().find(|r| r.split == split && r.method == method)
    }

    /// Per-object motion RMSEs of two methods, matched on (seed, object).
    pub fn paired_motion(&self, split: SplitName, a: Method, b: Method) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ca, cb) = (self.cells_for(split, a), self.cells_for(split, b));
        if ca.len() != cb.len() || ca.is_empty() {
            return Err(Error::Data(format!("cannot pair {a} with {b} on {split}")));
        }
        let (mut xa, mut xb) = (Vec::new(), Vec::new());
        for (p, q) in ca.iter().zip(&cb) {
            if p.seed != q.seed || p.objects.len() != q.objects.len() {
                return Err(Error::Data(format!("unpaired cells for {a} and {b} on {split}")));
            }
            for (oa, ob) in p.objects.iter().zip(&q.objects) {
                if oa.object_id != ob.object_id {
                    return Err(Error::Data(format!("unpaired objects for {a} and {b} on {split}")));
                }
                xa.push(oa.motion_rmse);
                xb.push(ob.motion_rmse);
            }
        }
        Ok((xa, xb))
    }

    /// One-sided test that `candidate` has lower motion RMSE than `baseline`.
    pub fn significance(&self, split: SplitName, baseline: Method, candidate: Method) -> Result<WilcoxonResult> {
        let (b, c) = self.paired_motion(split, baseline, candidate)?;
        wilcoxon_greater(&b, &c)
    }

    pub fn cells_csv(&self) -> String {
        csv_text(self.cells.iter().map(|c| CellRow {
            split: c.split,
            method: c.method,
            seed: c.seed,
            motion_rmse: c.motion_rmse,
            force_rmse: c.force_rmse,
            final_train_loss: c.final_train_loss,
            test_objects: c.objects.len(),
        }))
    }

    pub fn summary_csv(&self) -> String {
        csv_text(self.summary())
    }

    pub fn objects_csv(&self) -> String {
        csv_text(self.cells.iter().flat_map(|c| {
            c.objects.iter().flat_map(move |o| {
                o.motion_draws
                    .iter()
                    .zip(&o.force_draws)
                    .enumerate()
                    .map(move |(draw, (m, f))| ObjectRow {
                        split: c.split,
                        method: c.method,
                        seed: c.seed,
                        object_id: o.object_id,
                        draw,
                        motion_rmse: *m,
                        force_rmse: *f,
                    })
            })
        }))
    }

    pub fn silhouettes_csv(&self) -> String {
        csv_text(&self.latent_silhouettes)
    }

    /// Per-epoch losses of pre-training and (thinned) motion training.
    pub fn curves_csv(&self) -> String {
        let pre = self.pretrain_curves.iter().flat_map(|p| {
            p.history.iter().enumerate().map(move |(i, l)| CurveRow {
                phase: "pretrain",
                split: String::new(),
                method: Method::Pretrained(p.unsupervised),
                seed: p.seed,
                epoch: i + 1,
                loss: l.loss,
                reconstruction: Some(l.reconstruction),
                kl: Some(l.kl),
            })
        });
        let lfd = self.cells.iter().flat_map(|c| {
            c.loss_curve.iter().map(move |&(epoch, loss)| CurveRow {
                phase: "motion",
                split: c.split.to_string(),
                method: c.method,
                seed: c.seed,
                epoch,
                loss,
                reconstruction: None,
                kl: None,
            })
        });
        csv_text(pre.chain(lfd))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed report: {e}")))
    }

    /// Write `report.json` and the CSV views into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.json", self.to_json()),
            ("cells.csv", self.cells_csv()),
            ("summary.csv", self.summary_csv()),
            ("objects.csv", self.objects_csv()),
            ("latent_silhouettes.csv", self.silhouettes_csv()),
            ("loss_curves.csv", self.curves_csv()),
        ];
        let mut out = Vec::new();
        for (name, text) in files {
            let p = dir.join(name);
            write_atomic(&p, text.as_bytes())?;
            out.push(p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(split: SplitName, method: Method, seed: u64, m: f64) -> CellResult {
        CellResult {
            split,
            method,
            seed,
            motion_rmse: m,
            force_rmse: 10.0 * m,
            final_train_loss: 0.0,
            train_ids: vec![],
            objects: vec![ObjectScore {
                object_id: 2,
                motion_rmse: m,
                force_rmse: 10.0 * m,
                motion_draws: vec![m],
                force_draws: vec![10.0 * m],
            }],
            loss_curve: vec![(1, 1.0)],
        }
    }

    fn report() -> ExperimentReport {
        let mut cells = Vec::new();
        for seed in 1..=3 {
            cells.push(cell(SplitName::FrictionInterp, Method::DemoOnly, seed, 0.01 * seed as f64));
            cells.push(cell(SplitName::FrictionInterp, Method::Pretrained(10), seed, 0.001 * seed as f64));
        }
        ExperimentReport {
            config_digest: String::new(),
            config: RunConfig::default(),
            seeds: vec![1, 2, 3],
            cells,
            latent_silhouettes: vec![],
            pretrain_curves: vec![],
        }
    }

    #[test]
    fn summary_is_recomputable_from_cells() {
        let r = report();
        r.check_complete().unwrap();
        let row = r.summary_row(SplitName::FrictionInterp, Method::DemoOnly).unwrap();
        assert!((row.motion_mean - 0.02).abs() < 1e-15);
        assert!((row.motion_sd - 0.01).abs() < 1e-15);
        assert_eq!(row.seeds, 3);
        let csv = r.summary_csv();
        assert!(csv.starts_with("split,method,seeds,motion_mean"));
        assert!(csv.contains("friction-interp,M=10,3,"));
    }

    #[test]
    fn missing_cells_are_detected() {
        let mut r = report();
        r.cells.pop();
        assert!(r.check_complete().is_err());
    }

    #[test]
    fn paired_significance() {
        let r = report();
        let w = r
            .significance(SplitName::FrictionInterp, Method::DemoOnly, Method::Pretrained(10))
            .unwrap();
        assert_eq!(w.n, 3);
        assert!((w.p_value - 0.125).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(ExperimentReport::from_json(&r.to_json()).unwrap(), r);
    }
}

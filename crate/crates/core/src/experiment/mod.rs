//! The evaluation protocol: four train/test splits of the object grid, the
//! demo-only baseline against encoders pre-trained on increasing amounts of
//! unlabelled data, and the exploratory-action ablation.

mod metrics;
mod report;
mod splits;

pub use metrics::{force_rmse, mean, median, motion_rmse, rmse, std_dev, wilcoxon_greater, WilcoxonResult};
pub use report::{CellResult, ExperimentReport, LatentSilhouette, ObjectScore, PretrainCurve, SummaryRow};
pub use splits::{make_splits, SplitName, SplitSpec};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{grid_objects, sample_object, simulate_exploration, GridObject, ObjectProperties};
use crate::embedding::{property_silhouettes, LabeledLatent, PropertySilhouettes};
use crate::error::{Error, Result};
use crate::lfd::{fit_motion_stats, synth_demonstration, train_decoder, train_joint, DemoPair, LfdConfig, LfdModel};
use crate::rng::{derive_seed, stream};
use crate::signal::{design_butterworth, FilterCoeffs, ForcePreprocessor};
use crate::store::RunConfig;
use crate::trajectory::{ExplorationSubset, ForceTrajectory, MotionTrajectory};
use crate::vae::{self, PretrainOutcome, VaeConfig};

/// Protocol knobs of the full experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// One complete repetition per master seed.
    pub seeds: Vec<u64>,
    /// Amounts of unlabelled data M for the pre-trained methods.
    pub unsupervised_sizes: Vec<usize>,
    pub splits: Vec<SplitName>,
    /// Noisy explorations per test object; scores average over them.
    pub test_explorations: usize,
    /// Unlabelled data per encoder in the exploratory-action ablation.
    pub ablation_unsupervised: usize,
    /// Noisy explorations per grid object when scoring latent organisation.
    pub latent_explorations: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            seeds: vec![1, 2, 3, 4, 5],
            unsupervised_sizes: vec![10, 200, 1000],
            splits: SplitName::ALL.to_vec(),
            test_explorations: 5,
            ablation_unsupervised: 1000,
            latent_explorations: 5,
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment.seeds must not be empty".into()));
        }
        if self.unsupervised_sizes.is_empty() || self.unsupervised_sizes.contains(&0) {
            return Err(Error::Config("experiment.unsupervised_sizes must be non-empty and >= 1".into()));
        }
        if self.splits.is_empty() {
            return Err(Error::Config("experiment.splits must not be empty".into()));
        }
        if self.test_explorations == 0 || self.latent_explorations == 0 || self.ablation_unsupervised == 0 {
            return Err(Error::Config(
                "experiment.test_explorations, latent_explorations and ablation_unsupervised must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn largest_size(&self) -> usize {
        self.unsupervised_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// How the encoder of a cell was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    /// Encoder and motion decoder trained jointly on the demonstrations only.
    DemoOnly,
    /// Encoder pre-trained on this many unlabelled explorations, then frozen.
    Pretrained(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::DemoOnly => f.write_str("demo-only"),
            Method::Pretrained(m) => write!(f, "M={m}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "demo-only" {
            return Ok(Method::DemoOnly);
        }
        s.strip_prefix("M=")
            .and_then(|m| m.parse().ok())
            .filter(|&m| m > 0)
            .map(Method::Pretrained)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`; expected demo-only or M=<count>")))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Unlabelled explorations of randomly sampled objects. Record `i` depends
/// only on `(seed, i)`, so a smaller count is a prefix of a larger one.
pub fn collect_unsupervised(
    cfg: &RunConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<(ObjectProperties, ForceTrajectory)>> {
    if count == 0 {
        return Err(Error::Config("count must be ≥ 1".into()));
    }
    (0..count as u64)
        .map(|i| {
            let obj = sample_object(&mut stream(seed, "unsup-object", i));
            let tr = simulate_exploration(
                &obj,
                &cfg.exploration,
                &cfg.contact,
                &cfg.noise,
                &mut stream(seed, "unsup-explore", i),
            )?;
            Ok((obj, tr))
        })
        .collect()
}

/// One exploration plus one oracle demonstration for each grid object.
pub fn collect_demonstrations(cfg: &RunConfig, seed: u64) -> Result<Vec<DemoPair>> {
    grid_objects()
        .iter()
        .map(|o| {
            Ok(DemoPair {
                object_id: o.id,
                exploration: simulate_exploration(
                    &o.properties,
                    &cfg.exploration,
                    &cfg.contact,
                    &cfg.noise,
                    &mut stream(seed, "demo-explore", u64::from(o.id)),
                )?,
                motion: synth_demonstration(&o.properties, &cfg.demonstrator)?,
            })
        })
        .collect()
}

/// Fresh noisy explorations of a grid object, as performed at test time.
pub fn test_explorations(cfg: &RunConfig, seed: u64, obj: &GridObject, count: usize) -> Result<Vec<ForceTrajectory>> {
    (0..count as u64)
        .map(|r| {
            simulate_exploration(
                &obj.properties,
                &cfg.exploration,
                &cfg.contact,
                &cfg.noise,
                &mut stream(seed, "test-explore", u64::from(obj.id) * 1000 + r),
            )
        })
        .collect()
}

/// A frozen encoder together with the preprocessing it was trained under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainedEncoder {
    pub preprocessor: ForcePreprocessor,
    pub subset: ExplorationSubset,
    pub outcome: PretrainOutcome,
}

impl PretrainedEncoder {
    pub fn input(&self, raw: &ForceTrajectory) -> Result<Vec<f64>> {
        Ok(self.subset.select(&self.preprocessor.apply(raw)?).to_vec())
    }

    pub fn latent(&self, raw: &ForceTrajectory) -> Result<Vec<f64>> {
        Ok(vae::encode(&self.outcome.params, &self.input(raw)?)?.mean)
    }
}

/// Fit preprocessing on `unsup` and pre-train a β-VAE on the selected actions.
pub fn pretrain_encoder(
    cfg: &RunConfig,
    filter: &FilterCoeffs,
    unsup: &[ForceTrajectory],
    subset: ExplorationSubset,
    seed: u64,
) -> Result<PretrainedEncoder> {
    let preprocessor = ForcePreprocessor::fit(filter.clone(), unsup, cfg.normalization.pair())?;
    let data = unsup
        .iter()
        .map(|t| Ok(subset.select(&preprocessor.apply(t)?).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let vcfg = VaeConfig {
        input_dim: subset.input_dim(),
        seed,
        ..cfg.vae.clone()
    };
    let outcome = vae::pretrain(&data, &vcfg)?;
    Ok(PretrainedEncoder {
        preprocessor,
        subset,
        outcome,
    })
}

fn demo_targets(stats: &crate::signal::NormalizationStats, demos: &[&DemoPair]) -> Result<Vec<Vec<f64>>> {
    demos.iter().map(|d| stats.normalize(d.motion.as_slice())).collect()
}

/// Motion model built on a frozen pre-trained encoder.
pub fn train_with_encoder(
    cfg: &RunConfig,
    encoder: &PretrainedEncoder,
    demos: &[&DemoPair],
    lfd: &LfdConfig,
) -> Result<(LfdModel, Vec<f64>)> {
    if encoder.subset != ExplorationSubset::Both {
        return Err(Error::Config("motion models need an encoder over both exploratory actions".into()));
    }
    let motions: Vec<&MotionTrajectory> = demos.iter().map(|d| &d.motion).collect();
    let motion_stats = fit_motion_stats(&motions, cfg.normalization.pair())?;
    let inputs = demos
        .iter()
        .map(|d| encoder.preprocessor.apply(&d.exploration))
        .collect::<Result<Vec<_>>>()?;
    let targets = demo_targets(&motion_stats, demos)?;
    let enc = encoder.outcome.encoder();
    let (decoder, history) = train_decoder(&enc, &inputs, &targets, lfd)?;
    Ok((
        LfdModel {
            force: encoder.preprocessor.clone(),
            motion_stats,
            encoder: enc,
            decoder,
        },
        history,
    ))
}

/// Demo-only baseline: preprocessing fitted on the demonstrations, encoder
/// and decoder trained jointly.
pub fn train_baseline(
    cfg: &RunConfig,
    filter: &FilterCoeffs,
    demos: &[&DemoPair],
    lfd: &LfdConfig,
) -> Result<(LfdModel, Vec<f64>)> {
    let explorations: Vec<ForceTrajectory> = demos.iter().map(|d| d.exploration.clone()).collect();
    let force = ForcePreprocessor::fit(filter.clone(), &explorations, cfg.normalization.pair())?;
    let motions: Vec<&MotionTrajectory> = demos.iter().map(|d| &d.motion).collect();
    let motion_stats = fit_motion_stats(&motions, cfg.normalization.pair())?;
    let inputs = explorations
        .iter()
        .map(|t| force.apply(t))
        .collect::<Result<Vec<_>>>()?;
    let targets = demo_targets(&motion_stats, demos)?;
    let (encoder, decoder, history) =
        train_joint(cfg.vae.encoder_hidden, cfg.vae.latent_dim, &inputs, &targets, lfd)?;
    Ok((
        LfdModel {
            force,
            motion_stats,
            encoder,
            decoder,
        },
        history,
    ))
}

/// Score `model` on the test objects of `split`.
pub fn evaluate_model(
    cfg: &RunConfig,
    model: &LfdModel,
    split: &SplitSpec,
    demos: &[DemoPair],
    seed: u64,
) -> Result<Vec<ObjectScore>> {
    let grid = grid_objects();
    split
        .test
        .iter()
        .map(|&id| {
            let obj = grid.iter().find(|o| o.id == id).expect("split ids come from the grid");
            let demo = demos
                .iter()
                .find(|d| d.object_id == id)
                .ok_or_else(|| Error::Data(format!("no demonstration for test object {id}")))?;
            let mut motion = Vec::new();
            let mut force = Vec::new();
            for raw in test_explorations(cfg, seed, obj, cfg.experiment.test_explorations)? {
                let generated = model.generate_motion(&raw)?;
                motion.push(motion_rmse(&generated, &demo.motion)?);
                force.push(force_rmse(
                    &obj.properties,
                    &generated,
                    &demo.motion,
                    cfg.demonstrator.table_height,
                )?);
            }
            Ok(ObjectScore {
                object_id: id,
                motion_rmse: mean(&motion),
                force_rmse: mean(&force),
                motion_draws: motion,
                force_draws: force,
            })
        })
        .collect()
}

/// Posterior-mean latents of every grid object under repeated noisy explorations.
pub fn grid_latents(cfg: &RunConfig, encoder: &PretrainedEncoder, seed: u64) -> Result<Vec<LabeledLatent>> {
    let mut out = Vec::new();
    for o in grid_objects() {
        for raw in test_explorations(cfg, seed, &o, cfg.experiment.latent_explorations)? {
            out.push(LabeledLatent {
                object_id: o.id,
                stiffness_level: o.stiffness_level,
                friction_level: o.friction_level,
                z: encoder.latent(&raw)?,
            });
        }
    }
    Ok(out)
}

/// Stride at which motion-decoder loss curves are kept in the report.
pub const LFD_CURVE_STRIDE: usize = 50;

fn cell_context(stage: &str, split: SplitName, method: Method, seed: u64) -> String {
    format!("stage={stage} split={split} method={method} seed={seed}")
}

/// Run every (split, method, seed) cell of the protocol.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let settings = &cfg.experiment;
    let filter = design_butterworth(&cfg.filter)?;
    let largest = settings.largest_size();
    let mut sizes = settings.unsupervised_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();

    let per_seed: Vec<(u64, Vec<ForceTrajectory>, Vec<DemoPair>)> = settings
        .seeds
        .par_iter()
        .map(|&seed| {
            let unsup = collect_unsupervised(cfg, seed, largest)
                .map_err(|e| e.context(format!("stage=collect seed={seed}")))?
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            let demos = collect_demonstrations(cfg, seed).map_err(|e| e.context(format!("stage=demo seed={seed}")))?;
            Ok((seed, unsup, demos))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..per_seed.len())
        .flat_map(|s| sizes.iter().map(move |&m| (s, m)))
        .collect();
    let encoders: Vec<PretrainedEncoder> = jobs
        .par_iter()
        .map(|&(s, m)| {
            let (seed, unsup, _) = &per_seed[s];
            pretrain_encoder(cfg, &filter, &unsup[..m], ExplorationSubset::Both, *seed)
                .map_err(|e| e.context(cell_context("pretrain", SplitName::ALL[0], Method::Pretrained(m), *seed)))
        })
        .collect::<Result<_>>()?;
    let encoder_for = |s: usize, m: usize| &encoders[s * sizes.len() + sizes.iter().position(|&x| x == m).unwrap()];

    let latent_silhouettes: Vec<LatentSilhouette> = jobs
        .par_iter()
        .map(|&(s, m)| {
            let seed = per_seed[s].0;
            let latents = grid_latents(cfg, encoder_for(s, m), seed)?;
            let PropertySilhouettes { stiffness, friction } = property_silhouettes(&latents)?;
            Ok(LatentSilhouette {
                seed,
                method: Method::Pretrained(m),
                stiffness,
                friction,
            })
        })
        .collect::<Result<_>>()?;

    let mut methods = vec![Method::DemoOnly];
    methods.extend(settings.unsupervised_sizes.iter().map(|&m| Method::Pretrained(m)));
    let mut cells_spec = Vec::new();
    for (si, &split) in settings.splits.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            for s in 0..per_seed.len() {
                cells_spec.push((si, split, mi, method, s));
            }
        }
    }

    let cells: Vec<CellResult> = cells_spec
        .par_iter()
        .map(|&(si, split, mi, method, s)| {
            let (seed, _, demos) = &per_seed[s];
            let seed = *seed;
            let spec = SplitSpec::new(split);
            let train: Vec<&DemoPair> = demos.iter().filter(|d| spec.train.contains(&d.object_id)).collect();
            spec.audit_training_ids(train.iter().map(|d| d.object_id))?;
            let lfd = LfdConfig {
                seed: derive_seed(seed, "lfd-cell", (si * methods.len() + mi) as u64),
                ..cfg.lfd.clone()
            };
            let (model, history) = match method {
                Method::DemoOnly => train_baseline(cfg, &filter, &train, &lfd),
                Method::Pretrained(m) => train_with_encoder(cfg, encoder_for(s, m), &train, &lfd),
            }
            .map_err(|e| e.context(cell_context("train", split, method, seed)))?;
            let objects = evaluate_model(cfg, &model, &spec, demos, seed)
                .map_err(|e| e.context(cell_context("evaluate", split, method, seed)))?;
            let motion: Vec<f64> = objects.iter().map(|o| o.motion_rmse).collect();
            let force: Vec<f64> = objects.iter().map(|o| o.force_rmse).collect();
            Ok(CellResult {
                split,
                method,
                seed,
                motion_rmse: mean(&motion),
                force_rmse: mean(&force),
                final_train_loss: history.last().copied().unwrap_or(f64::NAN),
                train_ids: spec.train.clone(),
                objects,
                loss_curve: history
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % LFD_CURVE_STRIDE == 0 || *i + 1 == history.len())
                    .map(|(i, l)| (i + 1, *l))
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;

    let pretrain_curves = jobs
        .iter()
        .map(|&(s, m)| PretrainCurve {
            seed: per_seed[s].0,
            unsupervised: m,
            history: encoder_for(s, m).outcome.history.clone(),
        })
        .collect();

    Ok(ExperimentReport {
        config_digest: cfg.digest(),
        config: cfg.clone(),
        seeds: settings.seeds.clone(),
        cells,
        latent_silhouettes,
        pretrain_curves,
    })
}

/// Silhouettes of one ablation encoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub seed: u64,
    pub subset: ExplorationSubset,
    pub stiffness: f64,
    pub friction: f64,
}

/// Pre-train an encoder on the chosen exploratory actions only and score how
/// its latents group by stiffness and by friction.
pub fn ablation_exploration(cfg: &RunConfig, subset: ExplorationSubset, seed: u64) -> Result<PropertySilhouettes> {
    let filter = design_butterworth(&cfg.filter)?;
    let unsup: Vec<ForceTrajectory> = collect_unsupervised(cfg, seed, cfg.experiment.ablation_unsupervised)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let encoder = pretrain_encoder(cfg, &filter, &unsup, subset, seed)?;
    property_silhouettes(&grid_latents(cfg, &encoder, seed)?)
}

/// The ablation for every seed and each of `subsets`.
pub fn run_ablation(cfg: &RunConfig, subsets: &[ExplorationSubset]) -> Result<Vec<AblationResult>> {
    cfg.validate()?;
    let jobs: Vec<(u64, ExplorationSubset)> = cfg
        .experiment
        .seeds
        .iter()
        .flat_map(|&s| subsets.iter().map(move |&a| (s, a)))
        .collect();
    jobs.par_iter()
        .map(|&(seed, subset)| {
            let s = ablation_exploration(cfg, subset, seed)
                .map_err(|e| e.context(format!("stage=ablation subset={} seed={seed}", subset.name())))?;
            Ok(AblationResult {
                seed,
                subset,
                stiffness: s.stiffness,
                friction: s.friction,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_labels_round_trip() {
        for m in [Method::DemoOnly, Method::Pretrained(10), Method::Pretrained(1000)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("M=0".parse::<Method>().is_err());
        assert!("pretrained".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::Pretrained(200)).unwrap(), "\"M=200\"");
    }

    #[test]
    fn unsupervised_prefix_property() {
        let cfg = RunConfig::default();
        let small = collect_unsupervised(&cfg, 3, 4).unwrap();
        let big = collect_unsupervised(&cfg, 3, 9).unwrap();
        assert_eq!(small[..], big[..4]);
        assert!(collect_unsupervised(&cfg, 3, 0).is_err());
    }

    #[test]
    fn demonstrations_cover_the_grid() {
        let demos = collect_demonstrations(&RunConfig::default(), 1).unwrap();
        assert_eq!(demos.len(), 12);
        let ids: Vec<u32> = demos.iter().map(|d| d.object_id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn settings_validation() {
        let mut s = ExperimentSettings::default();
        assert!(s.validate().is_ok());
        s.unsupervised_sizes = vec![0];
        assert!(s.validate().is_err());
        s = ExperimentSettings {
            seeds: vec![],
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }
}

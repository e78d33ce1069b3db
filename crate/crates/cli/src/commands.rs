use std::path::{Path, PathBuf};

use haptic_lfd::contact::grid_objects;
use haptic_lfd::embedding::{embed, property_silhouettes};
use haptic_lfd::experiment::{
    collect_demonstrations, collect_unsupervised, evaluate_model, grid_latents, mean, median, motion_rmse,
    pretrain_encoder, run_ablation, run_experiment, std_dev, train_baseline, train_with_encoder, Method, SplitName,
    SplitSpec,
};
use haptic_lfd::lfd::{DemoPair, LfdConfig};
use haptic_lfd::rng::derive_seed;
use haptic_lfd::signal::design_butterworth;
use haptic_lfd::store::{write_atomic, DatasetFile, DatasetKind, RunConfig, WeightsFile};
use haptic_lfd::trajectory::ExplorationSubset;
use haptic_lfd::{Error, Result};
use serde::Serialize;

use crate::{Cli, Command};

/// The configuration in effect: file (or defaults) with `--seed` applied.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv rows serialize");
    }
    w.into_inner().expect("in-memory csv flushes")
}

fn load_dataset(cfg: &RunConfig, path: &Path, kind: DatasetKind) -> Result<DatasetFile> {
    let ds = DatasetFile::load(path)?;
    ds.require_kind(kind)?;
    ds.verify_provenance(cfg).map_err(|e| e.context(path.display().to_string()))?;
    Ok(ds)
}

fn load_weights(cfg: &RunConfig, path: &Path) -> Result<WeightsFile> {
    let w = WeightsFile::load(path)?;
    w.verify_provenance(cfg).map_err(|e| e.context(path.display().to_string()))?;
    Ok(w)
}

fn resolve_split(flag: Option<SplitName>, ds: &DatasetFile) -> Result<SplitSpec> {
    match (flag, &ds.header.split) {
        (Some(name), _) => Ok(SplitSpec::new(name)),
        (None, Some(spec)) => Ok(spec.clone()),
        (None, None) => Err(Error::Config(
            "the demonstration dataset carries no split tag; pass --split".into(),
        )),
    }
}

fn model_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct MotionRow {
    step: usize,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize)]
struct EvalSummaryRow {
    model: String,
    split: SplitName,
    objects: usize,
    motion_rmse_mean: f64,
    motion_rmse_sd: f64,
    motion_rmse_median: f64,
    force_rmse_mean: f64,
    force_rmse_sd: f64,
}

#[derive(Serialize)]
struct EvalObjectRow {
    model: String,
    split: SplitName,
    object_id: u32,
    motion_rmse: f64,
    force_rmse: f64,
}

#[derive(Serialize)]
struct AblationRow {
    seed: u64,
    subset: &'static str,
    stiffness_silhouette: f64,
    friction_silhouette: f64,
}

/// `<out>` with `.objects.csv` in place of its extension.
fn objects_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.objects.csv"))
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let seed = cfg.seed;
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));

    match &cli.command {
        Command::Collect { count } => {
            let path = out("unsupervised.hlfd");
            let ds = DatasetFile::exploration(&cfg, seed, collect_unsupervised(&cfg, seed, *count)?);
            ds.save(&path)?;
            println!("wrote {} records to {}", ds.records.len(), path.display());
        }

        Command::Demo { split } => {
            let path = out("demonstrations.hlfd");
            let spec = SplitSpec::new(*split);
            let ds = DatasetFile::demonstrations(&cfg, seed, collect_demonstrations(&cfg, seed)?, Some(spec));
            ds.save(&path)?;
            println!("wrote {} demonstrations ({split}) to {}", ds.records.len(), path.display());
        }

        Command::Pretrain { data, subset } => {
            let path = out("encoder.hlfw");
            let ds = load_dataset(&cfg, data, DatasetKind::Exploration)?;
            let filter = design_butterworth(&cfg.filter)?;
            let enc = pretrain_encoder(&cfg, &filter, &ds.explorations(), *subset, seed)?;
            WeightsFile::encoder(&cfg, seed, &enc).save(&path)?;
            let last = enc.outcome.history.last().map_or(f64::NAN, |e| e.loss);
            println!("pretrained on {} explorations, final loss {last:.6}, wrote {}", ds.records.len(), path.display());
        }

        Command::Train { demos, encoder, split } => {
            let path = out("model.hlfw");
            let ds = load_dataset(&cfg, demos, DatasetKind::Demonstration)?;
            let spec = resolve_split(split.split, &ds)?;
            let pairs = ds.demo_pairs()?;
            let train: Vec<&DemoPair> = pairs.iter().filter(|d| spec.train.contains(&d.object_id)).collect();
            spec.audit_training_ids(train.iter().map(|d| d.object_id))?;
            let lfd = LfdConfig {
                seed: derive_seed(seed, "lfd-train", 0),
                ..cfg.lfd.clone()
            };
            let (model, history) = match encoder {
                Some(p) => {
                    let enc = load_weights(&cfg, p)?.to_pretrained()?;
                    train_with_encoder(&cfg, &enc, &train, &lfd)?
                }
                None => train_baseline(&cfg, &design_butterworth(&cfg.filter)?, &train, &lfd)?,
            };
            WeightsFile::model(&cfg, seed, &model)?.save(&path)?;
            let method = if encoder.is_some() { "pretrained encoder" } else { "demo-only" };
            println!(
                "trained {method} model on {} objects ({}), final loss {:.6}, wrote {}",
                train.len(),
                spec.name,
                history.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }

        Command::Generate { model, demos, object } => {
            let path = out("motion.csv");
            let model = load_weights(&cfg, model)?.to_model()?;
            let ds = load_dataset(&cfg, demos, DatasetKind::Demonstration)?;
            let pair = ds
                .demo_pairs()?
                .into_iter()
                .find(|d| d.object_id == *object)
                .ok_or_else(|| Error::Data(format!("object {object} is not in {}", demos.display())))?;
            let motion = model.generate_motion(&pair.exploration)?;
            let rows = motion.positions().enumerate().map(|(step, [x, y, z])| MotionRow { step, x, y, z });
            write_atomic(&path, &csv_bytes(rows))?;
            println!(
                "object {object}: motion rmse vs demonstration {:.6} m, wrote {}",
                motion_rmse(&motion, &pair.motion)?,
                path.display()
            );
        }

        Command::Evaluate { demos, models, split } => {
            let path = out("evaluation.csv");
            let ds = load_dataset(&cfg, demos, DatasetKind::Demonstration)?;
            let spec = resolve_split(split.split, &ds)?;
            let pairs = ds.demo_pairs()?;
            let mut summary = Vec::new();
            let mut objects = Vec::new();
            for p in models {
                let label = model_label(p);
                let model = load_weights(&cfg, p)?.to_model()?;
                let scores = evaluate_model(&cfg, &model, &spec, &pairs, seed).map_err(|e| e.context(label.clone()))?;
                let motion: Vec<f64> = scores.iter().map(|s| s.motion_rmse).collect();
                let force: Vec<f64> = scores.iter().map(|s| s.force_rmse).collect();
                summary.push(EvalSummaryRow {
                    model: label.clone(),
                    split: spec.name,
                    objects: scores.len(),
                    motion_rmse_mean: mean(&motion),
                    motion_rmse_sd: std_dev(&motion),
                    motion_rmse_median: median(&motion),
                    force_rmse_mean: mean(&force),
                    force_rmse_sd: std_dev(&force),
                });
                objects.extend(scores.iter().map(|s| EvalObjectRow {
                    model: label.clone(),
                    split: spec.name,
                    object_id: s.object_id,
                    motion_rmse: s.motion_rmse,
                    force_rmse: s.force_rmse,
                }));
            }
            for r in &summary {
                println!(
                    "{} {}: motion rmse {:.6} m, force rmse {:.4} N",
                    r.model, r.split, r.motion_rmse_mean, r.force_rmse_mean
                );
            }
            write_atomic(&path, &csv_bytes(&summary))?;
            write_atomic(&objects_path(&path), &csv_bytes(&objects))?;
        }

        Command::Embed { encoder } => {
            let path = out("embedding.csv");
            let enc = load_weights(&cfg, encoder)?.to_pretrained()?;
            let latents = grid_latents(&cfg, &enc, seed)?;
            let s = property_silhouettes(&latents)?;
            let tsne = haptic_lfd::embedding::TsneConfig {
                seed,
                ..cfg.tsne.clone()
            };
            write_atomic(&path, &csv_bytes(embed(&latents, &tsne)?))?;
            println!(
                "{} latents over {} objects, silhouette stiffness {:.4} friction {:.4}, wrote {}",
                latents.len(),
                grid_objects().len(),
                s.stiffness,
                s.friction,
                path.display()
            );
        }

        Command::Experiment => {
            let dir = out("experiment");
            let report = run_experiment(&cfg)?;
            report.write_dir(&dir)?;
            print!("{}", report.summary_csv());
            let best = cfg.experiment.largest_size();
            for split in report.splits() {
                let w = report.significance(split, Method::DemoOnly, Method::Pretrained(best))?;
                println!("{split}: M={best} < demo-only, one-sided Wilcoxon p = {:.4}", w.p_value);
            }
            println!("wrote {}", dir.display());
        }

        Command::Ablation => {
            let path = out("ablation.csv");
            let results = run_ablation(&cfg, &ExplorationSubset::ALL)?;
            let rows = results.iter().map(|r| AblationRow {
                seed: r.seed,
                subset: r.subset.name(),
                stiffness_silhouette: r.stiffness,
                friction_silhouette: r.friction,
            });
            write_atomic(&path, &csv_bytes(rows))?;
            println!("wrote {} ablation rows to {}", results.len(), path.display());
        }
    }
    Ok(())
}

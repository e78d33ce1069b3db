//! Small end-to-end runs of the pipeline stages.

use haptic_lfd::experiment::{
    collect_demonstrations, collect_unsupervised, evaluate_model, grid_latents, motion_rmse, pretrain_encoder,
    run_experiment, train_baseline, train_with_encoder, ExperimentSettings, Method, SplitName, SplitSpec,
};
use haptic_lfd::lfd::{DemoPair, LfdConfig};
use haptic_lfd::signal::design_butterworth;
use haptic_lfd::store::{RunConfig, WeightsFile};
use haptic_lfd::trajectory::ExplorationSubset;
use haptic_lfd::vae::VaeConfig;

fn small() -> RunConfig {
    RunConfig {
        vae: VaeConfig {
            encoder_hidden: 16,
            decoder_hidden: 16,
            epochs: 5,
            ..VaeConfig::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn single_demonstration_is_reproduced() {
    let cfg = small();
    let demos = collect_demonstrations(&cfg, 2).unwrap();
    let unsup: Vec<_> = collect_unsupervised(&cfg, 2, 12).unwrap().into_iter().map(|(_, t)| t).collect();
    let filter = design_butterworth(&cfg.filter).unwrap();
    let enc = pretrain_encoder(&cfg, &filter, &unsup, ExplorationSubset::Both, 2).unwrap();
    let one = [&demos[4]];
    let lfd = LfdConfig { seed: 1, ..cfg.lfd.clone() };
    for (model, _) in [
        train_with_encoder(&cfg, &enc, &one, &lfd).unwrap(),
        train_baseline(&cfg, &filter, &one, &lfd).unwrap(),
    ] {
        let generated = model.generate_motion(&demos[4].exploration).unwrap();
        let err = motion_rmse(&generated, &demos[4].motion).unwrap();
        assert!(err < 1e-3, "overfit rmse {err} m");
    }
}

#[test]
fn trained_models_survive_a_save_and_load() {
    let cfg = small();
    let demos = collect_demonstrations(&cfg, 3).unwrap();
    let split = SplitSpec::new(SplitName::StiffnessInterp);
    let train: Vec<&DemoPair> = demos.iter().filter(|d| split.train.contains(&d.object_id)).collect();
    let lfd = LfdConfig { epochs: 200, seed: 4, ..cfg.lfd.clone() };
    let (model, _) = train_baseline(&cfg, &design_butterworth(&cfg.filter).unwrap(), &train, &lfd).unwrap();
    let w = WeightsFile::model(&cfg, 3, &model).unwrap();
    let back = WeightsFile::from_bytes(&w.to_bytes()).unwrap().to_model().unwrap();
    assert_eq!(back, model);
    let a = evaluate_model(&cfg, &model, &split, &demos, 3).unwrap();
    let b = evaluate_model(&cfg, &back, &split, &demos, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert!(a.iter().all(|o| o.motion_draws.len() == cfg.experiment.test_explorations));
}

#[test]
fn encoders_see_only_their_actions() {
    let cfg = small();
    let unsup: Vec<_> = collect_unsupervised(&cfg, 5, 8).unwrap().into_iter().map(|(_, t)| t).collect();
    let filter = design_butterworth(&cfg.filter).unwrap();
    for subset in ExplorationSubset::ALL {
        let enc = pretrain_encoder(&cfg, &filter, &unsup, subset, 5).unwrap();
        assert_eq!(enc.input(&unsup[0]).unwrap().len(), subset.input_dim());
        let latents = grid_latents(&cfg, &enc, 5).unwrap();
        assert_eq!(latents.len(), 12 * cfg.experiment.latent_explorations);
        assert!(latents.iter().all(|l| l.z.len() == cfg.vae.latent_dim));
    }
    let press = pretrain_encoder(&cfg, &filter, &unsup, ExplorationSubset::PressingOnly, 5).unwrap();
    let demos = collect_demonstrations(&cfg, 5).unwrap();
    let refs: Vec<&DemoPair> = demos.iter().collect();
    assert_eq!(train_with_encoder(&cfg, &press, &refs, &cfg.lfd).unwrap_err().exit_code(), 2);
}

#[test]
fn experiment_report_is_complete_and_consistent() {
    let cfg = RunConfig {
        lfd: LfdConfig { epochs: 30, ..LfdConfig::default() },
        experiment: ExperimentSettings {
            seeds: vec![1, 2],
            unsupervised_sizes: vec![4, 8],
            splits: vec![SplitName::FrictionInterp],
            test_explorations: 1,
            latent_explorations: 1,
            ..ExperimentSettings::default()
        },
        ..small()
    };
    let r = run_experiment(&cfg).unwrap();
    r.check_complete().unwrap();
    assert_eq!(r.cells.len(), 2 * 3);
    assert_eq!(r.latent_silhouettes.len(), 2 * 2);
    assert_eq!(r.methods(), vec![Method::DemoOnly, Method::Pretrained(4), Method::Pretrained(8)]);
    for c in &r.cells {
        assert_eq!(c.objects.len(), 4);
        assert!(c.train_ids.iter().all(|id| !SplitSpec::new(c.split).test.contains(id)));
    }
    let back = haptic_lfd::experiment::ExperimentReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back.to_json(), r.to_json());

    let dir = tempfile::tempdir().unwrap();
    let files = r.write_dir(dir.path()).unwrap();
    assert_eq!(files.len(), 6);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
}

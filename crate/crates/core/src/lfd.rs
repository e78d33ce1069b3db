//! Few-shot learning from demonstration: the demonstrator oracle, motion
//! decoder training and open-loop motion generation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contact::{ObjectProperties, LATERAL_FRICTION_RANGE, STIFFNESS_RANGE};
use crate::error::{Error, Result};
use crate::numerics::{
    dropout_mask, he_uniform, value_and_grad, AdamState, ParamSet, Tensor2,
};
use crate::rng::{normal_vec, stream};
use crate::signal::{fit_normalizer, ForcePreprocessor, NormalizationStats};
use crate::trajectory::{ForceTrajectory, MotionTrajectory, MOTION_CHANNELS, MOTION_LEN, MOTION_STEPS};
use crate::vae::{self, EncoderVars};

/// Parametric stand-in for the human demonstrator: a circular wipe whose
/// depth shrinks for stiffer and rougher sponges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemonstratorConfig {
    /// m
    pub circle_center: [f64; 2],
    /// m
    pub circle_radius: f64,
    /// s
    pub wipe_period: f64,
    /// m
    pub max_depth: f64,
    pub stiffness_sensitivity: f64,
    pub friction_sensitivity: f64,
    /// m
    pub table_height: f64,
    /// Hz
    pub sample_rate: f64,
}

impl Default for DemonstratorConfig {
    fn default() -> Self {
        DemonstratorConfig {
            circle_center: [0.5, 0.0],
            circle_radius: 0.05,
            wipe_period: 4.0,
            max_depth: 0.03,
            stiffness_sensitivity: 2.0,
            friction_sensitivity: 1.5,
            table_height: 0.0,
            sample_rate: 100.0,
        }
    }
}

impl DemonstratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("demonstrator.{m}")));
        if !(self.circle_radius > 0.0) {
            return bad("circle_radius must be > 0");
        }
        if !(self.max_depth > 0.0) {
            return bad("max_depth must be > 0");
        }
        if !(self.stiffness_sensitivity >= 0.0 && self.friction_sensitivity >= 0.0) {
            return bad("sensitivities must be >= 0");
        }
        if !(self.wipe_period > 0.0 && self.sample_rate > 0.0) {
            return bad("wipe_period and sample_rate must be > 0");
        }
        Ok(())
    }

    /// Target penetration for `obj`.
    pub fn depth(&self, obj: &ObjectProperties) -> f64 {
        let unit = |v: f64, (lo, hi): (f64, f64)| (v - lo) / (hi - lo);
        let k = unit(obj.stiffness, STIFFNESS_RANGE);
        let mu = unit(obj.lateral_friction, LATERAL_FRICTION_RANGE);
        self.max_depth / (1.0 + self.stiffness_sensitivity * k + self.friction_sensitivity * mu)
    }
}

/// The oracle's wiping motion for `obj`.
pub fn synth_demonstration(obj: &ObjectProperties, cfg: &DemonstratorConfig) -> Result<MotionTrajectory> {
    cfg.validate()?;
    let depth = cfg.depth(obj);
    let mut v = Vec::with_capacity(MOTION_LEN);
    for i in 0..MOTION_STEPS {
        let t = i as f64 / cfg.sample_rate;
        let phase = 2.0 * PI * t / cfg.wipe_period;
        let descent = if t < cfg.wipe_period {
            0.5 * (1.0 - (PI * t / cfg.wipe_period).cos())
        } else {
            1.0
        };
        v.push(cfg.circle_center[0] + cfg.circle_radius * phase.cos());
        v.push(cfg.circle_center[1] + cfg.circle_radius * phase.sin());
        v.push(cfg.table_height - depth * descent);
    }
    MotionTrajectory::new(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LfdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    /// Derived from the run's master seed by the caller; never read from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for LfdConfig {
    fn default() -> Self {
        LfdConfig {
            learning_rate: 1e-3,
            epochs: 10_000,
            dropout: 0.1,
            seed: 0,
        }
    }
}

impl LfdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("lfd.learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("lfd.dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// One demonstration: what the robot felt while exploring, and what the demonstrator did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoPair {
    pub object_id: u32,
    pub exploration: ForceTrajectory,
    pub motion: MotionTrajectory,
}

pub const MOTION_W: &str = "motion.w";
pub const MOTION_B: &str = "motion.b";

fn init_motion_decoder(latent_dim: usize, seed: u64) -> Result<ParamSet> {
    let mut rng = stream(seed, "motion-init", 0);
    ParamSet::new()
        .with(MOTION_W, he_uniform(MOTION_LEN, latent_dim, &mut rng))?
        .with(MOTION_B, Tensor2::zeros(1, MOTION_LEN))
}

fn check_demo_inputs(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Data("training needs at least one demonstration".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dimension("demonstration pairs", inputs.len(), targets.len()));
    }
    if let Some(t) = targets.iter().find(|t| t.len() != MOTION_LEN) {
        return Err(Error::dimension("motion target", MOTION_LEN, t.len()));
    }
    Ok(())
}

/// Fit the affine motion decoder on top of a frozen encoder.
///
/// `inputs` are preprocessed exploration vectors, `targets` normalized motions.
/// Each epoch draws a fresh latent sample from the encoder posterior for
/// every demonstration; all demonstrations form one batch.
pub fn train_decoder(
    encoder: &ParamSet,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &LfdConfig,
) -> Result<(ParamSet, Vec<f64>)> {
    cfg.validate()?;
    check_demo_inputs(inputs, targets)?;
    let in_dim = vae::encoder_input_dim(encoder)?;
    if let Some(x) = inputs.iter().find(|x| x.len() != in_dim) {
        return Err(Error::dimension("encoder input", in_dim, x.len()));
    }
    let latent = vae::latent_dim(encoder)?;
    let (mu, lv) = vae::encode_batch(encoder, &Tensor2::from_rows(inputs)?)?;
    let sd = lv.map(|v| (0.5 * v).exp());
    let y = Tensor2::from_rows(targets)?;
    let n = inputs.len();

    let mut params = init_motion_decoder(latent, cfg.seed)?;
    let mut adam = AdamState::new(&params, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, "motion-epoch", epoch as u64);
        let eps = normal_vec(&mut rng, n * latent);
        let z = Tensor2::from_vec(
            n,
            latent,
            (0..n * latent).map(|i| mu.data()[i] + sd.data()[i] * eps[i]).collect(),
        )?;
        let mask = dropout_mask(n, latent, cfg.dropout, &mut rng)?;
        let (loss, grads) = value_and_grad(&params, |t, p| {
            let z = t.constant_ref(&z);
            let z = t.mul_const(z, mask)?;
            let out = t.affine(z, p[MOTION_W], p[MOTION_B])?;
            let target = t.constant_ref(&y);
            let d = t.sub(out, target)?;
            let sq = t.square(d);
            Ok(t.mean(sq))
        })
        .map_err(|e| e.at(format!("motion decoder epoch {}", epoch + 1)))?;
        adam.step(&mut params, &grads)?;
        history.push(loss);
    }
    Ok((params, history))
}

/// Demo-only baseline: train encoder and motion decoder jointly on the
/// demonstrations, minimising the motion MSE end to end.
pub fn train_joint(
    encoder_hidden: usize,
    latent_dim: usize,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &LfdConfig,
) -> Result<(ParamSet, ParamSet, Vec<f64>)> {
    cfg.validate()?;
    check_demo_inputs(inputs, targets)?;
    let in_dim = inputs[0].len();
    let mut params = vae::init_encoder(
        in_dim,
        encoder_hidden,
        latent_dim,
        &mut stream(cfg.seed, "joint-encoder-init", 0),
    )?;
    params.extend(init_motion_decoder(latent_dim, cfg.seed)?)?;
    let x = Tensor2::from_rows(inputs)?;
    let y = Tensor2::from_rows(targets)?;
    let n = inputs.len();

    let mut adam = AdamState::new(&params, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, "joint-epoch", epoch as u64);
        let eps = Tensor2::from_vec(n, latent_dim, normal_vec(&mut rng, n * latent_dim))?;
        let mask = dropout_mask(n, latent_dim, cfg.dropout, &mut rng)?;
        let (loss, grads) = value_and_grad(&params, |t, p| {
            let enc = EncoderVars::from_params(p)?;
            let xv = t.constant_ref(&x);
            let (mu, lv) = enc.forward(t, xv)?;
            let z = vae::reparameterize_on_tape(t, mu, lv, eps)?;
            let z = t.mul_const(z, mask)?;
            let out = t.affine(z, p[MOTION_W], p[MOTION_B])?;
            let target = t.constant_ref(&y);
            let d = t.sub(out, target)?;
            let sq = t.square(d);
            Ok(t.mean(sq))
        })
        .map_err(|e| e.at(format!("joint training epoch {}", epoch + 1)))?;
        adam.step(&mut params, &grads)?;
        history.push(loss);
    }
    let encoder = params.subset("enc.");
    let decoder = params.subset("motion.");
    Ok((encoder, decoder, history))
}

/// Everything needed to turn a raw exploration recording into a wiping motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfdModel {
    pub force: ForcePreprocessor,
    pub motion_stats: NormalizationStats,
    pub encoder: ParamSet,
    pub decoder: ParamSet,
}

/// Normalization of motion targets, fitted on training demonstrations only.
pub fn fit_motion_stats(train: &[&MotionTrajectory], range: (f64, f64)) -> Result<NormalizationStats> {
    fit_normalizer(train.iter().map(|m| m.as_slice()), MOTION_CHANNELS, range)
}

impl LfdModel {
    /// Posterior mean latent of a raw exploration recording.
    pub fn latent(&self, raw: &ForceTrajectory) -> Result<Vec<f64>> {
        let x = self.force.apply(raw)?;
        Ok(vae::encode(&self.encoder, &x)?.mean)
    }

    /// Open-loop motion for the object that produced `raw`, in metres.
    pub fn generate_motion(&self, raw: &ForceTrajectory) -> Result<MotionTrajectory> {
        let z = self.latent(raw)?;
        let w = self.decoder.require(MOTION_W)?;
        if w.cols() != z.len() {
            return Err(Error::dimension("motion decoder latent", w.cols(), z.len()));
        }
        let out = crate::numerics::linear_forward(w, self.decoder.require(MOTION_B)?.data(), &z)?;
        MotionTrajectory::new(self.motion_stats.denormalize(&out)?)
    }

    /// Motions for many recordings at once; identical to calling
    /// [`generate_motion`](Self::generate_motion) per recording.
    pub fn generate_batch(&self, raws: &[ForceTrajectory]) -> Result<Vec<MotionTrajectory>> {
        raws.iter().map(|r| self.generate_motion(r)).collect()
    }
}

//! Haptic representation encoder and its reconstruction decoder.
//!
//! The encoder maps a normalized force trajectory to a diagonal Gaussian
//! posterior over a small latent code through one ReLU hidden layer and two
//! affine heads (mean and log-variance). The decoder maps a latent sample back
//! to a trajectory through one ReLU hidden layer with dropout. Training
//! minimises `β·KL(q(z|τ) ‖ N(0, I)) + MSE(τ, τ̂)` with a single reparameterized
//! sample per trajectory per epoch.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    dropout_mask, init_affine, linear_forward, matmul, relu, value_and_grad, AdamState, ParamSet,
    ParamVars, Tape, Tensor2, Var,
};
use crate::rng::{normal_vec, seeded, stream, RandomStream};
use crate::trajectory::FORCE_LEN;

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub decoder_dropout: f64,
    /// Mini-batch size; a value ≥ the dataset size gives full-batch updates.
    pub batch_size: usize,
    /// Derived from the run's master seed by the caller; never read from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            input_dim: FORCE_LEN,
            latent_dim: 5,
            encoder_hidden: 128,
            decoder_hidden: 128,
            beta: 0.06,
            learning_rate: 1e-4,
            epochs: 200,
            decoder_dropout: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.input_dim == 0 || self.encoder_hidden == 0 || self.decoder_hidden == 0 {
            return fail("vae dimensions must be >= 1".into());
        }
        if self.latent_dim < 1 {
            return fail("vae.latent_dim must be >= 1".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!("vae.beta must be >= 0, got {}", self.beta));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("vae.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.decoder_dropout) {
            return fail(format!("vae.decoder_dropout must be in [0, 1), got {}", self.decoder_dropout));
        }
        if self.batch_size == 0 {
            return fail("vae.batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Diagonal Gaussian `q(z|τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    /// Already clamped to `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub log_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

/// Randomly initialised encoder (`enc.*`) and haptic decoder (`dec.*`) parameters.
pub fn init_params(cfg: &VaeConfig, rng: &mut RandomStream) -> Result<ParamSet> {
    let mut p = init_encoder(cfg.input_dim, cfg.encoder_hidden, cfg.latent_dim, rng)?;
    init_affine(&mut p, "dec.hidden", cfg.latent_dim, cfg.decoder_hidden, rng)?;
    init_affine(&mut p, "dec.out", cfg.decoder_hidden, cfg.input_dim, rng)?;
    Ok(p)
}

pub fn init_encoder(
    input_dim: usize,
    hidden: usize,
    latent_dim: usize,
    rng: &mut RandomStream,
) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    init_affine(&mut p, "enc.hidden", input_dim, hidden, rng)?;
    init_affine(&mut p, "enc.mu", hidden, latent_dim, rng)?;
    init_affine(&mut p, "enc.logvar", hidden, latent_dim, rng)?;
    Ok(p)
}

fn bias(p: &ParamSet, name: &str) -> Result<Vec<f64>> {
    Ok(p.require(name)?.data().to_vec())
}

/// Input width expected by an encoder parameter set.
pub fn encoder_input_dim(params: &ParamSet) -> Result<usize> {
    Ok(params.require("enc.hidden.w")?.cols())
}

pub fn latent_dim(params: &ParamSet) -> Result<usize> {
    Ok(params.require("enc.mu.w")?.rows())
}

/// Posterior for one normalized trajectory.
pub fn encode(params: &ParamSet, tau: &[f64]) -> Result<GaussianPosterior> {
    let hw = params.require("enc.hidden.w")?;
    if tau.len() != hw.cols() {
        return Err(Error::dimension("encode input", hw.cols(), tau.len()));
    }
    let h = relu(&linear_forward(hw, &bias(params, "enc.hidden.b")?, tau)?);
    let mean = linear_forward(params.require("enc.mu.w")?, &bias(params, "enc.mu.b")?, &h)?;
    let log_var = linear_forward(params.require("enc.logvar.w")?, &bias(params, "enc.logvar.b")?, &h)?
        .into_iter()
        .map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX))
        .collect();
    Ok(GaussianPosterior { mean, log_var })
}

/// Posterior means and clamped log-variances for a batch (one trajectory per row).
pub fn encode_batch(params: &ParamSet, x: &Tensor2) -> Result<(Tensor2, Tensor2)> {
    let affine = |x: &Tensor2, prefix: &str| -> Result<Tensor2> {
        let mut y = matmul(x, false, params.require(&format!("{prefix}.w"))?, true)?;
        let b = params.require(&format!("{prefix}.b"))?.data();
        let cols = y.cols();
        for row in y.data_mut().chunks_exact_mut(cols) {
            for (v, bb) in row.iter_mut().zip(b) {
                *v += bb;
            }
        }
        Ok(y)
    };
    let h = affine(x, "enc.hidden")?.map(|v| v.max(0.0));
    let mu = affine(&h, "enc.mu")?;
    let lv = affine(&h, "enc.logvar")?.map(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX));
    Ok((mu, lv))
}

/// `z = μ + exp(½·logσ²) ⊙ ε`.
pub fn reparameterize(post: &GaussianPosterior, eps: &[f64]) -> Result<LatentCode> {
    if eps.len() != post.mean.len() {
        return Err(Error::dimension("reparameterize noise", post.mean.len(), eps.len()));
    }
    Ok(LatentCode(
        post.mean
            .iter()
            .zip(&post.log_var)
            .zip(eps)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect(),
    ))
}

/// Reconstruct a trajectory from a latent code; dropout on the hidden layer only when training.
pub fn decode_haptic(
    params: &ParamSet,
    z: &LatentCode,
    training: bool,
    dropout_rate: f64,
    rng: &mut RandomStream,
) -> Result<Vec<f64>> {
    let hw = params.require("dec.hidden.w")?;
    if z.0.len() != hw.cols() {
        return Err(Error::dimension("decode_haptic latent", hw.cols(), z.0.len()));
    }
    let h = relu(&linear_forward(hw, &bias(params, "dec.hidden.b")?, &z.0)?);
    let (h, _) = crate::numerics::dropout(&h, dropout_rate, training, rng)?;
    linear_forward(params.require("dec.out.w")?, &bias(params, "dec.out.b")?, &h)
}

/// `½·Σ (exp(logσ²) + μ² − 1 − logσ²)` against the standard normal prior.
pub fn kl_divergence(post: &GaussianPosterior) -> f64 {
    0.5 * post
        .mean
        .iter()
        .zip(&post.log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::dimension("mse", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `β·KL + MSE` for one trajectory.
pub fn elbo_loss(tau: &[f64], recon: &[f64], post: &GaussianPosterior, beta: f64) -> Result<f64> {
    let m = mse(tau, recon)?;
    let kl = kl_divergence(post);
    let loss = beta * kl + m;
    if !loss.is_finite() {
        return Err(Error::numeric("elbo_loss"));
    }
    Ok(loss)
}

/// Tape handles for the encoder layers.
pub struct EncoderVars {
    hidden: (Var, Var),
    mu: (Var, Var),
    log_var: (Var, Var),
}

impl EncoderVars {
    pub fn from_params(vars: &ParamVars) -> Result<Self> {
        let get = |n: &str| {
            vars.get(n)
                .ok_or_else(|| Error::Data(format!("missing parameter `{n}` on tape")))
        };
        Ok(EncoderVars {
            hidden: (get("enc.hidden.w")?, get("enc.hidden.b")?),
            mu: (get("enc.mu.w")?, get("enc.mu.b")?),
            log_var: (get("enc.logvar.w")?, get("enc.logvar.b")?),
        })
    }

    /// Record the encoder on `tape`; returns `(μ, clamped logσ²)`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<(Var, Var)> {
        let h = tape.affine(x, self.hidden.0, self.hidden.1)?;
        let h = tape.relu(h);
        let mu = tape.affine(h, self.mu.0, self.mu.1)?;
        let lv = tape.affine(h, self.log_var.0, self.log_var.1)?;
        let lv = tape.clamp(lv, LOG_VAR_MIN, LOG_VAR_MAX);
        Ok((mu, lv))
    }
}

/// Record `μ + exp(½·logσ²) ⊙ ε` with a fixed noise tensor.
pub fn reparameterize_on_tape(tape: &mut Tape, mu: Var, log_var: Var, eps: Tensor2) -> Result<Var> {
    let half = tape.scale(log_var, 0.5);
    let sd = tape.exp(half);
    let noise = tape.mul_const(sd, eps)?;
    tape.add(mu, noise)
}

/// Batch-mean Gaussian KL on the tape.
pub fn kl_on_tape(tape: &mut Tape, mu: Var, log_var: Var) -> Result<Var> {
    let batch = tape.value(mu).rows() as f64;
    let var = tape.exp(log_var);
    let mu2 = tape.square(mu);
    let s = tape.add(var, mu2)?;
    let s = tape.sub(s, log_var)?;
    let s = tape.add_scalar(s, -1.0);
    let total = tape.sum(s);
    Ok(tape.scale(total, 0.5 / batch))
}

/// One mini-batch of the VAE objective, with noise and dropout mask held fixed.
pub struct VaeBatch<'a> {
    pub x: &'a Tensor2,
    pub eps: Tensor2,
    pub mask: Tensor2,
    pub beta: f64,
}

/// Components of the objective for one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Loss and gradient for one batch.
pub fn vae_loss_and_grad(params: &ParamSet, batch: VaeBatch<'_>) -> Result<(LossParts, ParamSet)> {
    let mut parts = LossParts::default();
    let (loss, grads) = value_and_grad(params, |t, p| {
        let enc = EncoderVars::from_params(p)?;
        let x = t.constant_ref(batch.x);
        let (mu, lv) = enc.forward(t, x)?;
        let z = reparameterize_on_tape(t, mu, lv, batch.eps)?;
        let h = t.affine(z, p["dec.hidden.w"], p["dec.hidden.b"])?;
        let h = t.relu(h);
        let h = t.mul_const(h, batch.mask)?;
        let out = t.affine(h, p["dec.out.w"], p["dec.out.b"])?;
        let diff = t.sub(out, x)?;
        let sq = t.square(diff);
        let recon = t.mean(sq);
        let kl = kl_on_tape(t, mu, lv)?;
        parts.reconstruction = t.scalar(recon)?;
        parts.kl = t.scalar(kl)?;
        let weighted = t.scale(kl, batch.beta);
        t.add(weighted, recon)
    })?;
    parts.loss = loss;
    Ok((parts, grads))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainOutcome {
    pub params: ParamSet,
    /// Sample-weighted mean of each loss component, one entry per epoch.
    pub history: Vec<LossParts>,
}

impl PretrainOutcome {
    /// The frozen encoder half (`enc.*`).
    pub fn encoder(&self) -> ParamSet {
        self.params.subset("enc.")
    }
}

/// Mini-batch Adam on the β-VAE objective over normalized trajectories.
pub fn pretrain(dataset: &[Vec<f64>], cfg: &VaeConfig) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("pretraining needs at least one trajectory".into()));
    }
    if let Some(bad) = dataset.iter().find(|r| r.len() != cfg.input_dim) {
        return Err(Error::dimension("pretrain sample", cfg.input_dim, bad.len()));
    }
    let data = Tensor2::from_rows(dataset)?;
    let mut params = init_params(cfg, &mut stream(cfg.seed, "vae-init", 0))?;
    let mut adam = AdamState::new(&params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, "vae-epoch", epoch as u64);
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.select_rows(chunk);
            let b = chunk.len();
            let eps = Tensor2::from_vec(b, cfg.latent_dim, normal_vec(&mut rng, b * cfg.latent_dim))?;
            let mask = dropout_mask(b, cfg.decoder_hidden, cfg.decoder_dropout, &mut rng)?;
            let (parts, grads) = vae_loss_and_grad(
                &params,
                VaeBatch {
                    x: &x,
                    eps,
                    mask,
                    beta: cfg.beta,
                },
            )
            .map_err(|e| e.at(format!("pretrain epoch {}", epoch + 1)))?;
            adam.step(&mut params, &grads)?;
            let w = b as f64;
            sum.loss += parts.loss * w;
            sum.reconstruction += parts.reconstruction * w;
            sum.kl += parts.kl * w;
        }
        let n = dataset.len() as f64;
        history.push(LossParts {
            loss: sum.loss / n,
            reconstruction: sum.reconstruction / n,
            kl: sum.kl / n,
        });
    }
    Ok(PretrainOutcome { params, history })
}

/// Posterior means for each row, as plain vectors.
pub fn posterior_means(encoder: &ParamSet, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let (mu, _) = encode_batch(encoder, &Tensor2::from_rows(inputs)?)?;
    Ok((0..mu.rows()).map(|r| mu.row(r).to_vec()).collect())
}

/// Deterministic helper for callers that only need one reconstruction.
pub fn reconstruct_mean(params: &ParamSet, tau: &[f64]) -> Result<Vec<f64>> {
    let post = encode(params, tau)?;
    decode_haptic(params, &LatentCode(post.mean), false, 0.0, &mut seeded(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> VaeConfig {
        VaeConfig {
            input_dim: 12,
            latent_dim: 5,
            encoder_hidden: 8,
            decoder_hidden: 7,
            epochs: 5,
            batch_size: 4,
            ..Default::default()
        }
    }

    fn zero_params(cfg: &VaeConfig) -> ParamSet {
        init_params(cfg, &mut seeded(0)).unwrap().zeros_like()
    }

    #[test]
    fn zero_network_gives_standard_posterior() {
        let cfg = small_cfg();
        let p = zero_params(&cfg);
        let post = encode(&p, &[0.3; 12]).unwrap();
        assert_eq!(post.mean, vec![0.0; 5]);
        assert_eq!(post.log_var, vec![0.0; 5]);
        assert_eq!(post.mean.len(), 5);
    }

    #[test]
    fn encode_is_deterministic_and_checks_dims() {
        let cfg = small_cfg();
        let p = init_params(&cfg, &mut seeded(4)).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        assert_eq!(encode(&p, &x).unwrap(), encode(&p, &x).unwrap());
        assert!(matches!(encode(&p, &x[..11]), Err(Error::Dimension { .. })));
        let (mu, lv) = encode_batch(&p, &Tensor2::from_rows(&[x.clone()]).unwrap()).unwrap();
        let post = encode(&p, &x).unwrap();
        for i in 0..5 {
            assert!((mu.get(0, i) - post.mean[i]).abs() < 1e-12);
            assert!((lv.get(0, i) - post.log_var[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn reparameterize_cases() {
        let post = GaussianPosterior {
            mean: vec![1.0, -2.0],
            log_var: vec![0.0, 0.0],
        };
        assert_eq!(reparameterize(&post, &[0.0, 0.0]).unwrap().0, post.mean);
        assert_eq!(reparameterize(&post, &[0.5, 2.0]).unwrap().0, vec![1.5, 0.0]);
        assert!(reparameterize(&post, &[0.0]).is_err());
    }

    #[test]
    fn reparameterized_variance_matches() {
        let post = GaussianPosterior {
            mean: vec![0.7],
            log_var: vec![(0.3f64).ln()],
        };
        let mut rng = seeded(21);
        let n = 100_000;
        let zs: Vec<f64> = (0..n)
            .map(|_| reparameterize(&post, &normal_vec(&mut rng, 1)).unwrap().0[0])
            .collect();
        let mean = zs.iter().sum::<f64>() / n as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 0.3 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn decoder_cases() {
        let cfg = VaeConfig {
            input_dim: FORCE_LEN,
            encoder_hidden: 4,
            decoder_hidden: 4,
            ..Default::default()
        };
        let p = init_params(&cfg, &mut seeded(2)).unwrap();
        let z = LatentCode(vec![0.1, -0.2, 0.3, 0.0, 1.0]);
        let mut rng = seeded(0);
        let a = decode_haptic(&p, &z, false, 0.1, &mut rng).unwrap();
        assert_eq!(a.len(), 2400);
        assert_eq!(a, decode_haptic(&p, &z, false, 0.1, &mut rng).unwrap());

        let mut zero = p.zeros_like();
        let bias: Vec<f64> = (0..FORCE_LEN).map(|i| i as f64).collect();
        *zero.iter_mut().find(|(n, _)| *n == "dec.out.b").unwrap().1 = Tensor2::row_vector(bias.clone());
        assert_eq!(decode_haptic(&zero, &z, true, 0.1, &mut rng).unwrap(), bias);
        assert!(decode_haptic(&p, &LatentCode(vec![0.0; 4]), false, 0.1, &mut rng).is_err());
    }

    #[test]
    fn kl_and_elbo_closed_forms() {
        let prior = GaussianPosterior {
            mean: vec![0.0; 5],
            log_var: vec![0.0; 5],
        };
        assert_eq!(kl_divergence(&prior), 0.0);
        let shifted = GaussianPosterior {
            mean: vec![1.0, 0.0, 0.0, 0.0, 0.0],
            log_var: vec![0.0; 5],
        };
        assert!((kl_divergence(&shifted) - 0.5).abs() < 1e-12);
        let tau = vec![0.25; 2400];
        assert_eq!(elbo_loss(&tau, &tau, &prior, 0.06).unwrap(), 0.0);
        assert!(elbo_loss(&tau, &tau[..10], &prior, 0.06).is_err());
        let bad = GaussianPosterior {
            mean: vec![f64::NAN],
            log_var: vec![0.0],
        };
        assert!(matches!(elbo_loss(&tau, &tau, &bad, 1.0), Err(Error::Numeric { .. })));
    }

    #[test]
    fn elbo_composition() {
        // Construct a posterior with KL exactly 2: μ = (2, 0, ...), logσ² = 0.
        let post = GaussianPosterior {
            mean: vec![2.0, 0.0, 0.0, 0.0, 0.0],
            log_var: vec![0.0; 5],
        };
        assert_eq!(kl_divergence(&post), 2.0);
        let tau = vec![0.0; 2400];
        let recon = vec![0.1; 2400];
        let loss = elbo_loss(&tau, &recon, &post, 0.06).unwrap();
        assert!((loss - 0.13).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn pretrain_guards() {
        let cfg = small_cfg();
        assert!(matches!(pretrain(&[], &cfg), Err(Error::Data(_))));
        assert!(matches!(pretrain(&[vec![0.0; 3]], &cfg), Err(Error::Dimension { .. })));
        let bad = VaeConfig {
            decoder_dropout: 1.0,
            ..cfg
        };
        assert!(matches!(pretrain(&[vec![0.0; 12]], &bad), Err(Error::Config(_))));
    }

    fn toy_data(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let a = (i as f64 * 0.37).sin() * 0.4 + 0.45;
                (0..12).map(|j| a * (j as f64 / 12.0) + 0.05 * (j % 3) as f64).collect()
            })
            .collect()
    }

    #[test]
    fn pretrain_is_deterministic() {
        let cfg = small_cfg();
        let data = toy_data(10);
        let a = pretrain(&data, &cfg).unwrap();
        let b = pretrain(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 5);
    }

    #[test]
    fn zero_beta_is_pure_reconstruction() {
        let cfg = VaeConfig {
            beta: 0.0,
            ..small_cfg()
        };
        let out = pretrain(&toy_data(9), &cfg).unwrap();
        for h in &out.history {
            assert_eq!(h.loss, h.reconstruction);
        }
    }
}

use rand::Rng;

use super::Tensor2;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// `W·x + b` for a single sample.
pub fn linear_forward(w: &Tensor2, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::dimension(
            "linear_forward",
            format!("W {}x{} with x[{}] and b[{}]", w.rows(), w.cols(), w.cols(), w.rows()),
            format!("x[{}] and b[{}]", x.len(), b.len()),
        ));
    }
    Ok((0..w.rows())
        .map(|i| w.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[i])
        .collect())
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise `1/(1-rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut RandomStream) -> Result<Tensor2> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(Tensor2::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor2::from_vec(rows, cols, data)
}

/// Apply inverted dropout; returns the output and the mask that produced it.
/// In inference mode the input passes through and the mask is all ones.
pub fn dropout(
    x: &[f64],
    rate: f64,
    training: bool,
    rng: &mut RandomStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rate(rate)?;
    if !training {
        return Ok((x.to_vec(), vec![1.0; x.len()]));
    }
    let mask = dropout_mask(1, x.len(), rate, rng)?.into_vec();
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((out, mask))
}

/// Uniform fan-in initialisation, `U(-√(6/fan_in), √(6/fan_in))`.
pub fn he_uniform(rows: usize, cols: usize, rng: &mut RandomStream) -> Tensor2 {
    let bound = (6.0 / cols.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("length matches by construction")
}

//! Minimum-order Butterworth low-pass design via the bilinear transform, and
//! zero-phase forward-backward application.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{ForceTrajectory, FORCE_CHANNELS};

/// Low-pass requirements: at most `passband_loss` dB attenuation up to
/// `passband_edge`, at least `stopband_loss` dB from `stopband_edge`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    /// Hz
    pub sample_rate: f64,
    /// Hz
    pub passband_edge: f64,
    /// Hz
    pub stopband_edge: f64,
    /// dB
    pub passband_loss: f64,
    /// dB
    pub stopband_loss: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            sample_rate: 100.0,
            passband_edge: 10.0,
            stopband_edge: 30.0,
            passband_loss: 3.0,
            stopband_loss: 40.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.sample_rate,
            self.passband_edge,
            self.stopband_edge,
            self.passband_loss,
            self.stopband_loss,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Config(format!(
                "filter frequencies and losses must be positive and finite: {self:?}"
            )));
        }
        let nyquist = self.sample_rate / 2.0;
        if !(self.passband_edge < self.stopband_edge && self.stopband_edge < nyquist) {
            return Err(Error::Config(format!(
                "filter needs passband_edge < stopband_edge < sample_rate/2, got {} < {} < {}",
                self.passband_edge, self.stopband_edge, nyquist
            )));
        }
        if self.stopband_loss <= self.passband_loss {
            return Err(Error::Config(format!(
                "stopband_loss ({}) must exceed passband_loss ({})",
                self.stopband_loss, self.passband_loss
            )));
        }
        Ok(())
    }
}

/// Transfer function `b(z⁻¹) / a(z⁻¹)` with `a[0] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub order: usize,
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Design the lowest-order Butterworth filter meeting `spec`.
pub fn design_butterworth(spec: &FilterSpec) -> Result<FilterCoeffs> {
    spec.validate()?;
    // Prewarped analog edges for s = (z - 1) / (z + 1).
    let warp = |f: f64| (PI * f / spec.sample_rate).tan();
    let (wp, ws) = (warp(spec.passband_edge), warp(spec.stopband_edge));
    let ep = 10f64.powf(0.1 * spec.passband_loss) - 1.0;
    let es = 10f64.powf(0.1 * spec.stopband_loss) - 1.0;
    let order = ((es / ep).log10() / (2.0 * (ws / wp).log10())).ceil().max(1.0) as usize;
    // Meet the passband exactly; the stopband is then met with margin.
    let wc = wp / ep.powf(1.0 / (2.0 * order as f64));

    let n = order as f64;
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let s = Complex64::from_polar(wc, theta);
            (1.0 + s) / (1.0 - s)
        })
        .collect();
    if let Some(p) = poles.iter().find(|p| p.norm() >= 1.0) {
        return Err(Error::numeric(format!("unstable pole {p} in butterworth design")));
    }
    let zeros = vec![Complex64::new(-1.0, 0.0); order];
    let a: Vec<f64> = poly_from_roots(&poles).iter().map(|c| c.re).collect();
    let mut b: Vec<f64> = poly_from_roots(&zeros).iter().map(|c| c.re).collect();
    let dc = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    for v in &mut b {
        *v *= dc;
    }
    Ok(FilterCoeffs { b, a, order })
}

impl FilterCoeffs {
    /// Complex response at frequency `freq` (Hz).
    pub fn response(&self, freq: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * PI * freq / sample_rate;
        let eval = |c: &[f64]| {
            c.iter()
                .enumerate()
                .map(|(k, &v)| Complex64::from_polar(v, -w * k as f64))
                .sum::<Complex64>()
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Magnitude response in dB.
    pub fn gain_db(&self, freq: f64, sample_rate: f64) -> f64 {
        20.0 * self.response(freq, sample_rate).norm().log10()
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Direct-form II transposed state that holds a unit-step input in steady state.
    fn steady_state(&self) -> Vec<f64> {
        let n = self.a.len().max(self.b.len()) - 1;
        let coef = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
        let g = self.dc_gain();
        let mut zi = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += coef(&self.b, i + 1) - coef(&self.a, i + 1) * g;
            zi[i] = acc;
        }
        zi
    }

    /// Causal filtering from the given initial state.
    fn lfilter(&self, x: &[f64], mut state: Vec<f64>) -> Vec<f64> {
        let n = state.len();
        let coef = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
        let mut y = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = coef(&self.b, 0) * xi + state.first().copied().unwrap_or(0.0);
            for i in 0..n {
                let next = if i + 1 < n { state[i + 1] } else { 0.0 };
                state[i] = coef(&self.b, i + 1) * xi - coef(&self.a, i + 1) * yi + next;
            }
            y.push(yi);
        }
        y
    }

    /// Causal filtering from rest. Used to inspect the impulse response.
    pub fn filter_causal(&self, x: &[f64]) -> Vec<f64> {
        let n = self.a.len().max(self.b.len()) - 1;
        self.lfilter(x, vec![0.0; n])
    }
}

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions. Output length equals input length.
pub fn filter_apply(coeffs: &FilterCoeffs, signal: &[f64]) -> Result<Vec<f64>> {
    let len = signal.len();
    if len == 0 {
        return Err(Error::Data("cannot filter an empty signal".into()));
    }
    let pad = (3 * coeffs.a.len().max(coeffs.b.len())).min(len - 1);
    let (first, last) = (signal[0], signal[len - 1]);
    let mut ext = Vec::with_capacity(len + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[len - 1 - i]));

    let zi = coeffs.steady_state();
    let scaled = |s: f64| zi.iter().map(|z| z * s).collect::<Vec<_>>();
    let mut fwd = coeffs.lfilter(&ext, scaled(ext[0]));
    fwd.reverse();
    let mut back = coeffs.lfilter(&fwd, scaled(fwd[0]));
    back.reverse();
    Ok(back[pad..pad + len].to_vec())
}

/// Filter each force/torque channel along time (both actions back to back).
pub fn filter_force(coeffs: &FilterCoeffs, tr: &ForceTrajectory) -> Result<ForceTrajectory> {
    let mut out = tr.as_slice().to_vec();
    for ch in 0..FORCE_CHANNELS {
        let filtered = filter_apply(coeffs, &tr.channel(ch))?;
        for (i, v) in filtered.into_iter().enumerate() {
            out[i * FORCE_CHANNELS + ch] = v;
        }
    }
    ForceTrajectory::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_coeffs() -> FilterCoeffs {
        design_butterworth(&FilterSpec::default()).unwrap()
    }

    #[test]
    fn default_design_is_fourth_order_and_stable() {
        let c = default_coeffs();
        assert_eq!(c.order, 4);
        assert_eq!(c.a[0], 1.0);
        assert_eq!(c.a.len(), 5);
    }

    #[test]
    fn dc_gain_and_edges() {
        let spec = FilterSpec::default();
        let c = default_coeffs();
        assert!((c.dc_gain() - 1.0).abs() < 1e-9);
        assert!((c.response(0.0, spec.sample_rate).norm() - 1.0).abs() < 1e-9);
        assert!(c.gain_db(spec.stopband_edge, spec.sample_rate) <= -spec.stopband_loss);
        assert!(c.gain_db(spec.passband_edge, spec.sample_rate) >= -spec.passband_loss - 1e-9);
    }

    #[test]
    fn infeasible_specs_are_config_errors() {
        let bad = [
            FilterSpec { passband_edge: 30.0, stopband_edge: 10.0, ..Default::default() },
            FilterSpec { stopband_edge: 50.0, ..Default::default() },
            FilterSpec { passband_loss: -1.0, ..Default::default() },
            // Literal values from the original hardware setup: stopband below passband.
            FilterSpec {
                sample_rate: 70000.0,
                passband_edge: 1000.0,
                stopband_edge: 100.0,
                passband_loss: 3.0,
                stopband_loss: 40.0,
            },
        ];
        for spec in bad {
            assert!(matches!(design_butterworth(&spec), Err(Error::Config(_))), "{spec:?}");
        }
    }

    #[test]
    fn constant_signal_is_preserved() {
        let c = default_coeffs();
        let y = filter_apply(&c, &[3.25; 400]).unwrap();
        assert_eq!(y.len(), 400);
        assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-6));
        assert_eq!(filter_apply(&c, &[7.0]).unwrap(), vec![7.0]);
        assert!(filter_apply(&c, &[]).is_err());
    }

    #[test]
    fn impulse_response_decays() {
        let c = default_coeffs();
        let mut x = vec![0.0; 400];
        x[0] = 1.0;
        let h = c.filter_causal(&x);
        assert!(h[399].abs() < 1e-9 && h[300..].iter().all(|v| v.abs() < 1e-9));
    }
}

use serde::{Deserialize, Serialize};

use crate::contact::{simulate_wipe_replay, ObjectProperties};
use crate::error::{Error, Result};
use crate::trajectory::MotionTrajectory;

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension("rmse operands", a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// RMSE over all position components, in metres.
pub fn motion_rmse(generated: &MotionTrajectory, demonstrated: &MotionTrajectory) -> Result<f64> {
    rmse(generated.as_slice(), demonstrated.as_slice())
}

/// RMSE between the normal-force profiles of replaying both motions on `obj`, in newtons.
pub fn force_rmse(
    obj: &ObjectProperties,
    generated: &MotionTrajectory,
    demonstrated: &MotionTrajectory,
    table_height: f64,
) -> Result<f64> {
    rmse(
        &simulate_wipe_replay(obj, generated, table_height),
        &simulate_wipe_replay(obj, demonstrated, table_height),
    )
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_value: f64,
}

/// Exact one-sided Wilcoxon signed-rank test of `x − y > 0`.
///
/// Zero differences are dropped; tied magnitudes get mid-ranks and the null
/// distribution is enumerated over those mid-ranks, so ties are exact too.
pub fn wilcoxon_greater(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::dimension("wilcoxon pairs", x.len(), y.len()));
    }
    let mut d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("wilcoxon"));
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            n,
            p_value: 1.0,
        });
    }
    // Doubled mid-ranks are integers.
    let mut rank2 = vec![0usize; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        for r in &mut rank2[i..=j] {
            *r = i + j + 2;
        }
        i = j + 1;
    }
    let observed: usize = d.iter().zip(&rank2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let total: usize = rank2.iter().sum();
    let mut dist = vec![0.0f64; total + 1];
    dist[0] = 1.0;
    for &r in &rank2 {
        for s in (r..=total).rev() {
            dist[s] = 0.5 * (dist[s] + dist[s - r]);
        }
        for v in &mut dist[..r] {
            *v *= 0.5;
        }
    }
    let p_value: f64 = dist[observed..].iter().sum();
    Ok(WilcoxonResult {
        w_plus: observed as f64 / 2.0,
        n,
        p_value: p_value.min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::grid_objects;
    use crate::trajectory::MOTION_LEN;

    fn motion(f: impl Fn(usize) -> f64) -> MotionTrajectory {
        MotionTrajectory::new((0..MOTION_LEN).map(f).collect()).unwrap()
    }

    #[test]
    fn motion_rmse_closed_forms() {
        let a = motion(|i| (i as f64).sin());
        assert_eq!(motion_rmse(&a, &a).unwrap(), 0.0);
        let b = motion(|i| (i as f64).sin() + 0.01);
        assert!((motion_rmse(&a, &b).unwrap() - 0.01).abs() < 1e-12);
        let c = motion(|i| (i as f64).sin() + if i % 3 == 2 { 0.01 } else { 0.0 });
        assert!((motion_rmse(&a, &c).unwrap() - 0.01 / 3f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn force_rmse_closed_forms() {
        let obj = grid_objects()[4].properties;
        let deep = motion(|i| if i % 3 == 2 { -0.02 } else { 0.1 });
        let shallow = motion(|i| if i % 3 == 2 { -0.015 } else { 0.1 });
        assert_eq!(force_rmse(&obj, &deep, &deep, 0.0).unwrap(), 0.0);
        let want = obj.stiffness * 0.005;
        assert!((force_rmse(&obj, &shallow, &deep, 0.0).unwrap() - want).abs() < 1e-9);
        let above = motion(|i| if i % 3 == 2 { 0.01 } else { 0.0 });
        let higher = motion(|i| if i % 3 == 2 { 0.05 } else { 0.0 });
        assert_eq!(force_rmse(&obj, &above, &higher, 0.0).unwrap(), 0.0);
    }

    fn brute_force_p(d: &[f64]) -> f64 {
        // Enumerate all sign assignments over the same mid-ranks.
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
        let mut ranks = vec![0.0; d.len()];
        for (pos, &i) in idx.iter().enumerate() {
            let tied: Vec<usize> = (0..d.len()).filter(|&j| d[j].abs() == d[i].abs()).collect();
            let first = idx.iter().position(|&k| tied.contains(&k)).unwrap();
            ranks[i] = first as f64 + 1.0 + (tied.len() as f64 - 1.0) / 2.0;
            let _ = pos;
        }
        let obs: f64 = (0..d.len()).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
        let n = d.len();
        let mut hits = 0usize;
        for mask in 0..(1usize << n) {
            let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w >= obs - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1usize << n) as f64
    }

    #[test]
    fn wilcoxon_matches_enumeration() {
        let cases: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.5, -0.2, 1.3, 0.7, -0.1, 2.2, 0.9],
            vec![1.0, 1.0, -1.0, 2.0, 2.0, -3.0, 0.5, 0.5, 0.5],
            vec![-1.0, -2.0, 0.3, -0.4, -0.5, -0.6],
        ];
        for d in cases {
            let zeros = vec![0.0; d.len()];
            let r = wilcoxon_greater(&d, &zeros).unwrap();
            let want = brute_force_p(&d);
            assert!((r.p_value - want).abs() < 1e-12, "{d:?}: {} vs {want}", r.p_value);
        }
    }

    #[test]
    fn wilcoxon_all_positive() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let r = wilcoxon_greater(&x, &vec![0.0; 10]).unwrap();
        assert_eq!(r.w_plus, 55.0);
        assert!((r.p_value - 1.0 / 1024.0).abs() < 1e-15);
        let r = wilcoxon_greater(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.n, r.p_value), (0, 1.0));
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }
}

use crate::error::{Error, Result};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient of `points` grouped by `labels`.
///
/// Points in singleton clusters contribute 0.
pub fn silhouette<L: PartialEq + Copy>(points: &[Vec<f64>], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::dimension("silhouette labels", points.len(), labels.len()));
    }
    let mut clusters: Vec<L> = Vec::new();
    for &l in labels {
        if !clusters.contains(&l) {
            clusters.push(l);
        }
    }
    if clusters.len() < 2 {
        return Err(Error::Config(format!(
            "silhouette needs at least 2 distinct labels, got {}",
            clusters.len()
        )));
    }
    let ids: Vec<usize> = labels
        .iter()
        .map(|l| clusters.iter().position(|c| c == l).expect("collected above"))
        .collect();
    let sizes: Vec<usize> = (0..clusters.len())
        .map(|c| ids.iter().filter(|&&i| i == c).count())
        .collect();

    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; clusters.len()];
    for i in 0..n {
        let own = ids[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[ids[j]] += distance(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

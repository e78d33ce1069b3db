use haptic_lfd::embedding::{silhouette, tsne, TsneConfig};
use haptic_lfd::rng::{normal_vec, seeded};

/// Three tight Gaussian blobs in 5-D, centres far apart.
fn blobs(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = seeded(seed);
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3u8 {
        for _ in 0..per {
            let noise = normal_vec(&mut rng, 5);
            pts.push(
                noise
                    .iter()
                    .enumerate()
                    .map(|(d, e)| if d == c as usize { 20.0 } else { 0.0 } + 0.5 * e)
                    .collect(),
            );
            labels.push(c);
        }
    }
    (pts, labels)
}

fn cfg() -> TsneConfig {
    TsneConfig {
        perplexity: 10.0,
        seed: 3,
        ..TsneConfig::default()
    }
}

#[test]
fn separated_clusters_stay_separated() {
    let (pts, labels) = blobs(15, 1);
    let out = tsne(&pts, &cfg()).unwrap();
    let emb: Vec<Vec<f64>> = out.embedding.iter().map(|p| p.to_vec()).collect();
    let s = silhouette(&emb, &labels).unwrap();
    assert!(s > 0.8, "silhouette of embedding {s}");
}

#[test]
fn duplicate_points_are_handled() {
    let (mut pts, _) = blobs(6, 2);
    let dup = pts[0].clone();
    pts.extend(std::iter::repeat(dup).take(5));
    let out = tsne(&pts, &cfg()).unwrap();
    assert!(out.embedding.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
    assert!(out.kl_history.iter().all(|k| k.is_finite() && *k >= -1e-12));
}

#[test]
fn translation_of_the_input_does_not_change_the_embedding() {
    // Dyadic coordinates and shift, so every pairwise difference is exact.
    let pts: Vec<Vec<f64>> = (0..24)
        .map(|i| vec![(i % 5) as f64 / 8.0, (i / 5) as f64 / 4.0, (i % 3) as f64 * 3.0])
        .collect();
    let shifted: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v + 64.0).collect()).collect();
    let c = TsneConfig { perplexity: 6.0, ..cfg() };
    let a = tsne(&pts, &c).unwrap();
    let b = tsne(&shifted, &c).unwrap();
    for (p, q) in a.embedding.iter().zip(&b.embedding) {
        assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
    }
}

#[test]
fn kl_mostly_decreases_after_exaggeration() {
    let (pts, _) = blobs(12, 4);
    let c = cfg();
    let out = tsne(&pts, &c).unwrap();
    let tail = &out.kl_history[c.exaggeration_iterations..];
    let steps = tail.len() - 1;
    let non_increasing = tail.windows(2).filter(|w| w[1] <= w[0] + 1e-12).count();
    assert!(
        non_increasing as f64 >= 0.95 * steps as f64,
        "{non_increasing}/{steps} non-increasing steps"
    );
    assert!(tail.last().unwrap() < &tail[0]);
}

#[test]
fn same_seed_same_embedding() {
    let (pts, _) = blobs(8, 5);
    assert_eq!(tsne(&pts, &cfg()).unwrap(), tsne(&pts, &cfg()).unwrap());
}

#[test]
fn invalid_settings_are_rejected() {
    let (pts, _) = blobs(3, 6);
    let c = TsneConfig { perplexity: 40.0, ..cfg() };
    assert_eq!(tsne(&pts, &c).unwrap_err().exit_code(), 2);
    assert!(tsne(&pts[..3], &cfg()).is_err());
}

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use traffic_events::pipeline::{generate_scenario, scenes};

/// Box-corner offsets between a noisy and a noise-free rendering follow
/// N(0, σ²): χ² goodness of fit over equiprobable bins at the 1% level.
#[test]
fn box_corner_noise_is_gaussian() {
    let sigma = 2.0;
    let clean_scene = scenes::maneuver_scene(0.0).unwrap();
    let noisy_scene = scenes::maneuver_scene(sigma).unwrap();
    let clean = generate_scenario(&clean_scene, 17);
    let noisy = generate_scenario(&noisy_scene, 17);
    assert_eq!(clean.len(), noisy.len());

    let mut samples = Vec::new();
    for (c, n) in clean.iter().zip(&noisy) {
        assert_eq!((c.track_id, c.frame_index), (n.track_id, n.frame_index));
        samples.push(n.bbox.left - c.bbox.left);
        samples.push(n.bbox.top - c.bbox.top);
        samples.push(n.bbox.right() - c.bbox.right());
        samples.push(n.bbox.bottom() - c.bbox.bottom());
    }
    samples.truncate(10_000);
    assert_eq!(samples.len(), 10_000);

    let bins = 20;
    let normal = Normal::new(0.0, sigma).unwrap();
    let edges: Vec<f64> = (1..bins).map(|i| normal.inverse_cdf(i as f64 / bins as f64)).collect();
    let mut counts = vec![0usize; bins];
    for x in &samples {
        counts[edges.partition_point(|e| e < x)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(
        stat < critical,
        "chi-square {stat:.2} >= {critical:.2}, counts {counts:?}"
    );

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    assert!(mean.abs() < 0.1, "{mean}");
    assert!((var.sqrt() - sigma).abs() < 0.1, "{}", var.sqrt());
}

#[test]
fn zero_noise_reproduces_projection() {
    let scene = scenes::maneuver_scene(0.0).unwrap();
    let a = generate_scenario(&scene, 1);
    let b = generate_scenario(&scene, 2);
    assert_eq!(a, b);
}

use usal_core::data::{
    generate_synthetic, generate_synthetic_with_truth, inject_label_noise, Covariance, SyntheticSpec,
};
use usal_core::linalg::{dot, norm};
use usal_core::metrics::{evaluate, fit_rate};
use usal_core::model::{Sample, Sign};
use usal_core::rff::{median_pairwise_distance, RffMap};
use usal_core::{Error, Label};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent rescan of the minimum labelled margin.
fn rescan_margin(theta: &[f64], dim: usize, samples: &[Sample]) -> f64 {
    let mut best = f64::INFINITY;
    for s in samples {
        let m = match s.label.unwrap() {
            Label::Binary(y) => y.value() * dot(theta, &s.features),
            Label::Class(y) => {
                let scores: Vec<f64> = theta.chunks(dim).map(|b| dot(b, &s.features)).collect();
                let other = scores.iter().enumerate().filter(|(j, _)| *j != y).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
                scores[y] - other
            }
        };
        best = best.min(m);
    }
    best
}

#[test]
fn binary_rho_star_matches_rescan() {
    for seed in 0..5 {
        let mut spec = SyntheticSpec::binary(7, 300, 50, seed);
        spec.margin_floor = if seed % 2 == 0 { Some(1.5) } else { None };
        let data = generate_synthetic(&spec).unwrap();
        let t = &data.truth;
        assert_eq!(t.rho_star.to_bits(), rescan_margin(&t.theta_star, 7, &data.train.samples).to_bits());
    }
}

#[test]
fn floor_two_after_rescale() {
    let mut spec = SyntheticSpec::binary(6, 500, 10, 99);
    spec.margin_floor = Some(2.0);
    let data = generate_synthetic(&spec).unwrap();
    assert!((rescan_margin(&data.truth.theta_star, 6, &data.train.samples) - 2.0).abs() <= 1e-12);
}

#[test]
fn multiclass_rho_star_matches_rescan() {
    for k in 2..=5 {
        let data = generate_synthetic(&SyntheticSpec::multiclass(k, 4, 300, 20, k as u64)).unwrap();
        let t = &data.truth;
        assert_eq!(t.rho_star.to_bits(), rescan_margin(&t.theta_star, 4, &data.train.samples).to_bits());
        assert!((t.rho_star - 1.5).abs() <= 1e-12);
    }
}

#[test]
fn truth_separates_both_splits() {
    for spec in [
        SyntheticSpec::binary(10, 1000, 1000, 1),
        SyntheticSpec::multiclass(3, 5, 1000, 1000, 2),
        SyntheticSpec { margin_floor: None, ..SyntheticSpec::binary(3, 500, 500, 3) },
    ] {
        let data = generate_synthetic(&spec).unwrap();
        for split in [&data.train, &data.test] {
            assert_eq!(evaluate(&data.truth.theta_star, split).unwrap().test_error, 0.0);
        }
    }
}

#[test]
fn exported_radius_covers_every_point() {
    let data = generate_synthetic(&SyntheticSpec::binary(8, 400, 400, 4)).unwrap();
    for s in data.train.samples.iter().chain(&data.test.samples) {
        assert!(data.truth.r >= norm(&s.features));
    }
    let k = 4;
    let data = generate_synthetic(&SyntheticSpec::multiclass(k, 3, 200, 200, 4)).unwrap();
    for s in data.train.samples.iter().chain(&data.test.samples) {
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let d = usal_core::loss::delta_x(&s.features, i, j, k).unwrap();
                    assert!(data.truth.r >= norm(&d) * (1.0 - 1e-15));
                }
            }
        }
    }
}

#[test]
fn two_classes_reduce_to_binary() {
    let d = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let blocks: Vec<f64> = (0..2 * d).map(|_| rng.random::<f64>() - 0.5).collect();
    let diff: Vec<f64> = (0..d).map(|i| blocks[i] - blocks[d + i]).collect();
    let mc = generate_synthetic_with_truth(&SyntheticSpec::multiclass(2, d, 500, 100, 7), blocks).unwrap();
    let bin = generate_synthetic_with_truth(&SyntheticSpec::binary(d, 500, 100, 7), diff).unwrap();
    for (m, b) in mc.train.samples.iter().zip(&bin.train.samples) {
        assert_eq!(m.features, b.features);
        let class = m.label.unwrap().as_class(2).unwrap();
        let sign = b.label.unwrap().as_sign().unwrap();
        assert_eq!(class == 0, sign == Sign::Pos);
    }
}

#[test]
fn identical_blocks_cannot_be_floored() {
    let spec = SyntheticSpec::multiclass(3, 2, 10, 10, 0);
    let err = generate_synthetic_with_truth(&spec, vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0]).unwrap_err();
    assert!(matches!(err, Error::Generation(_)));
}

#[test]
fn generators_are_deterministic() {
    let spec = SyntheticSpec { covariance: Covariance::Diagonal(vec![1.0, 0.2, 3.0]), ..SyntheticSpec::binary(3, 100, 30, 5) };
    assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    let mc = SyntheticSpec::multiclass(4, 3, 100, 30, 5);
    assert_eq!(generate_synthetic(&mc).unwrap(), generate_synthetic(&mc).unwrap());
}

#[test]
fn invalid_diagonal_is_rejected() {
    let spec = SyntheticSpec { covariance: Covariance::Diagonal(vec![1.0, 0.0]), ..SyntheticSpec::binary(2, 10, 10, 0) };
    assert!(generate_synthetic(&spec).is_err());
}

#[test]
fn noise_fraction_within_binomial_band() {
    let spec = SyntheticSpec { margin_floor: None, ..SyntheticSpec::binary(2, 100_000, 1, 11) };
    let data = generate_synthetic(&spec).unwrap();
    let (noisy, mask) = inject_label_noise(&data.train, 0.1, 3).unwrap();
    let flipped = mask.iter().filter(|&&m| m).count();
    let frac = flipped as f64 / 1e5;
    assert!((frac - 0.1).abs() <= 3.0 * (0.1f64 * 0.9 / 1e5).sqrt(), "fraction {frac}");
    let differing = noisy.samples.iter().zip(&data.train.samples).filter(|(a, b)| a.label != b.label).count();
    assert_eq!(differing, flipped);
}

#[test]
fn multiclass_noise_moves_to_other_classes() {
    let data = generate_synthetic(&SyntheticSpec::multiclass(4, 3, 5000, 1, 2)).unwrap();
    let (noisy, mask) = inject_label_noise(&data.train, 0.3, 9).unwrap();
    let differing = noisy.samples.iter().zip(&data.train.samples).filter(|(a, b)| a.label != b.label).count();
    assert_eq!(differing, mask.iter().filter(|&&m| m).count());
    assert!(noisy.samples.iter().all(|s| s.label.unwrap().as_class(4).is_ok()));
    assert!(inject_label_noise(&data.train, 1.5, 0).is_err());
}

#[test]
fn rff_kernel_fidelity() {
    let d = 4;
    let bandwidth = 1.3;
    let map = RffMap::new(d, 10_000, bandwidth, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let approx = dot(&map.apply(&x).unwrap(), &map.apply(&y).unwrap());
        let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let exact = (-dist / (2.0 * bandwidth * bandwidth)).exp();
        assert!((approx - exact).abs() <= 0.05, "approx {approx} exact {exact}");
    }
}

#[test]
fn median_heuristic_is_seeded() {
    let data = generate_synthetic(&SyntheticSpec::binary(3, 3000, 1, 1)).unwrap();
    let a = median_pairwise_distance(&data.train.samples, 1000, 4).unwrap();
    assert_eq!(a, median_pairwise_distance(&data.train.samples, 1000, 4).unwrap());
    assert!(a > 0.0);
}

#[test]
fn noisy_power_law_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = rand_distr::StandardNormal;
    let pts: Vec<(u64, f64)> = (0..30)
        .map(|i| {
            let t = (10.0 * 1.3f64.powi(i)).round() as u64;
            let clean = 4.0 / t as f64;
            let eps: f64 = rng.sample(normal);
            (t, clean + 0.01 * clean * eps)
        })
        .collect();
    let slope = fit_rate(&pts).unwrap().slope;
    assert!((-1.1..=-0.9).contains(&slope), "slope {slope}");
}

#[test]
fn uninformative_model_errs_half_the_time() {
    // Isotropic inputs and a direction orthogonal to the truth: the prediction
    // is independent of the label, so the error rate is exactly 1/2 in law.
    let spec = SyntheticSpec { margin_floor: None, covariance: Covariance::Identity, ..SyntheticSpec::binary(10, 1, 100_000, 31) };
    let data = generate_synthetic(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw: Vec<f64> = (0..10).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let t = &data.truth.theta_star;
    let c = dot(&raw, t) / dot(t, t);
    let theta: Vec<f64> = raw.iter().zip(t).map(|(a, b)| a - c * b).collect();
    let e = evaluate(&theta, &data.test).unwrap();
    assert!((e.test_error - 0.5).abs() <= 3.0 * (0.25f64 / 1e5).sqrt(), "error {}", e.test_error);
    assert!(e.test_error <= e.mean_hinge && e.test_error <= e.mean_sq_hinge);
}

mod common;

use common::test_rng;
use dyndrop::nn::{Matrix, SiteTransform};
use dyndrop::regularizers::{
    alpha_affine, apply_alpha, apply_classical, gaussian_transform, OverfitMonitor, ALPHA_PRIME,
};
use rand_distr::{Distribution, StandardNormal};

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[test]
fn classical_preserves_the_mean() {
    let z = Matrix::filled(100, 1000, 1.0);
    let out = apply_classical(&z, 0.5, 7, true).unwrap();
    let (mean, _) = mean_var(out.as_slice());
    assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
    assert!(out.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
    assert_eq!(apply_classical(&z, 0.5, 7, false).unwrap(), z);
}

#[test]
fn gaussian_multiplier_has_unit_variance_at_half_rate() {
    let SiteTransform::Affine { scale, shift: None } =
        gaussian_transform(1000, 1000, 0.5, 11).unwrap()
    else {
        panic!("gaussian noise is a pure scale");
    };
    let (mean, var) = mean_var(scale.as_slice());
    assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    assert!((0.99..=1.01).contains(&var), "variance {var}");
}

#[test]
fn alpha_keeps_standard_normal_moments() {
    let mut rng = test_rng(3);
    let data: Vec<f64> = (0..1_000_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let z = Matrix::from_vec(1000, 1000, data).unwrap();
    for rate in [0.05, 0.1, 0.2] {
        let out = apply_alpha(&z, rate, 5, true).unwrap();
        let (mean, var) = mean_var(out.as_slice());
        assert!(mean.abs() <= 0.02, "rate {rate}: mean {mean}");
        assert!((0.97..=1.03).contains(&var), "rate {rate}: variance {var}");
    }
}

#[test]
fn alpha_affine_matches_closed_form() {
    let rate = 0.1f64;
    let q = 1.0 - rate;
    let a = (q + ALPHA_PRIME * ALPHA_PRIME * q * (1.0 - q)).powf(-0.5);
    let b = -a * (1.0 - q) * ALPHA_PRIME;
    let (ga, gb) = alpha_affine(rate);
    assert!((ga - a).abs() < 1e-15 && (gb - b).abs() < 1e-15);
    // moments of a·x̂ + b, x̂ = x w.p. q else α′, x ~ N(0, 1)
    let mean = a * rate * ALPHA_PRIME + b;
    let second = q + rate * ALPHA_PRIME * ALPHA_PRIME;
    let var = a * a * (second - (rate * ALPHA_PRIME).powi(2));
    assert!(
        mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12,
        "{mean} {var}"
    );
}

fn triggers(losses: &[f64], patience: usize, min_delta: f64) -> Vec<usize> {
    let mut m = OverfitMonitor::new(patience, min_delta).unwrap();
    let mut fired = Vec::new();
    for (t, &loss) in losses.iter().enumerate() {
        let (next, hit) = m.update(loss).unwrap();
        if hit {
            fired.push(t + 1);
        }
        m = next;
    }
    fired
}

#[test]
fn monitor_trigger_updates() {
    let none: Vec<usize> = Vec::new();
    assert_eq!(triggers(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4], 3, 0.0), none);
    assert_eq!(triggers(&[1.0, 1.0, 1.0, 1.0], 3, 0.0), vec![4]);
    assert_eq!(triggers(&[1.0, 0.5, 1.0, 1.0, 1.0], 3, 0.0), vec![5]);
    // re-armed after firing
    assert_eq!(triggers(&[1.0; 8], 3, 0.0), vec![4, 7]);
    // improvements smaller than min_delta do not count
    assert_eq!(triggers(&[1.0, 0.9995, 0.9992, 0.9991], 3, 1e-3), vec![4]);
}

//! Statistical calibration of the noise samplers, run at fixed seeds so the
//! outcomes are reproducible.

use dpkmeans::core::RngStream;
use dpkmeans::mechanisms::{gaussian_sample, laplace_sample, GaussianParam, LaplaceParam};

const N: usize = 100_000;

fn laplace_draws(scale: f64, seed: u64) -> Vec<f64> {
    let param = LaplaceParam::new(scale).unwrap();
    let mut rng = RngStream::new(seed);
    (0..N).map(|_| laplace_sample(param, &mut rng)).collect()
}

fn gaussian_draws(sigma: f64, seed: u64) -> Vec<f64> {
    let param = GaussianParam::new(sigma).unwrap();
    let mut rng = RngStream::new(seed);
    (0..N).map(|_| gaussian_sample(param, &mut rng)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn laplace_mean_and_variance() {
    let xs = laplace_draws(1.0, 101);
    assert!(mean(&xs).abs() < 0.05, "mean {}", mean(&xs));
    // Var(Lap(b)) = 2 b^2.
    let v = variance(&xs);
    assert!((v - 2.0).abs() < 0.2, "variance {v}");
}

#[test]
fn laplace_median_at_zero() {
    let xs = laplace_draws(2.0, 202);
    let below = xs.iter().filter(|&&x| x < 0.0).count() as f64 / N as f64;
    assert!((below - 0.5).abs() < 0.01, "fraction below zero {below}");
}

#[test]
fn gaussian_mean_variance_and_coverage() {
    let xs = gaussian_draws(1.0, 303);
    assert!(mean(&xs).abs() < 0.05, "mean {}", mean(&xs));

    let ys = gaussian_draws(3.0, 404);
    let v = variance(&ys);
    assert!((v - 9.0).abs() < 0.9, "variance {v}");

    // About 68.27% of standard normal draws land in [-1, 1].
    let inside = xs.iter().filter(|x| x.abs() <= 1.0).count() as f64 / N as f64;
    assert!((inside - 0.6827).abs() < 0.02, "coverage {inside}");
}

/// Empirical differential-privacy check for Laplace-noised counts: two
/// counts differing by one, noised with `Lap(1/eps)`, rounded to integer
/// bins. On every bin with at least 1000 hits on both sides the frequency
/// ratio must stay within `exp(eps)` times a 10% statistical slack.
#[test]
fn laplace_counts_satisfy_empirical_dp() {
    let eps = 1.0;
    let draws = 1_000_000usize;
    let param = LaplaceParam::new(1.0 / eps).unwrap();
    let mut histogram = |center: f64, seed: u64| {
        let mut rng = RngStream::new(seed);
        let mut bins = std::collections::HashMap::<i64, u64>::new();
        for _ in 0..draws {
            let x = center + laplace_sample(param, &mut rng);
            *bins.entry(x.round() as i64).or_default() += 1;
        }
        bins
    };
    let a = histogram(5.0, 707);
    let b = histogram(6.0, 808);
    let bound = eps.exp() * 1.1;
    let mut checked = 0;
    for (bin, &ca) in &a {
        if let Some(&cb) = b.get(bin) {
            if ca >= 1000 && cb >= 1000 {
                let ratio = ca as f64 / cb as f64;
                assert!(
                    ratio < bound && 1.0 / ratio < bound,
                    "bin {bin}: ratio {ratio} exceeds {bound}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 8, "only {checked} bins had enough mass");
}

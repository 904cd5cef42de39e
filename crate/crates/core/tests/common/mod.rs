#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reliopt::data::{generate_synthetic, Bounds, Dataset};
use reliopt::logistic::LogisticModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Random logistic model with `|beta_i|` in `[0.1, 2)` and a random
/// non-degenerate box.
pub fn random_logistic_case(seed: u64, n: usize) -> (LogisticModel<f64>, Bounds<f64>) {
    let mut rng = rng(seed);
    let beta: Vec<f64> = (0..=n).map(|_| signed(&mut rng, 0.1, 2.0)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..10.0)).collect();
    (LogisticModel::from_beta(beta).unwrap(), Bounds::new(lo, hi).unwrap())
}

/// Labeled data over `[0, 1]^n` from slopes `+-[0.5, 2)` and an intercept
/// that centres the box at probability one half.
pub fn synthetic_ratio_dataset(seed: u64, n: usize, rows: usize) -> (Dataset<f64>, Vec<f64>) {
    let mut rng = rng(500 + seed);
    let slopes: Vec<f64> = (0..n).map(|_| signed(&mut rng, 0.5, 2.0)).collect();
    let intercept = -0.5 * slopes.iter().sum::<f64>();
    let beta: Vec<f64> = std::iter::once(intercept).chain(slopes).collect();
    let ranges = Bounds::uniform(n, 0.0, 1.0).unwrap();
    generate_synthetic(n, rows, &beta, &ranges, seed).unwrap()
}

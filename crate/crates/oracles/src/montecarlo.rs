//! Balls-into-bins simulation of spare occupancy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub n: u64,
    pub m: u64,
    pub k: u64,
    pub trials: u32,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McResult {
    /// Mean of `X / n`, where `X = sum_i max(B_i - k, 0)`.
    pub mean_fraction: f64,
    /// Standard error of that mean (zero for a single trial).
    pub std_error: f64,
}

/// Throws `n` balls into `m` bins uniformly, `trials` times.
pub fn balls_into_bins_mc(cfg: MonteCarloConfig) -> McResult {
    assert!(cfg.trials >= 1 && cfg.m >= 1 && cfg.n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut loads = vec![0u64; cfg.m as usize];
    let mut fractions = Vec::with_capacity(cfg.trials as usize);
    for _ in 0..cfg.trials {
        loads.iter_mut().for_each(|b| *b = 0);
        for _ in 0..cfg.n {
            loads[rng.random_range(0..cfg.m) as usize] += 1;
        }
        let x: u64 = loads.iter().map(|&b| b.saturating_sub(cfg.k)).sum();
        fractions.push(x as f64 / cfg.n as f64);
    }
    let t = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / t;
    let std_error = if fractions.len() > 1 {
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    McResult {
        mean_fraction: mean,
        std_error,
    }
}

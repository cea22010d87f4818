use prefix_filter::{fingerprint_of, hash64, FilterParams, HashSeed, LoadFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_keys(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

/// Upper 10^-6 quantile of chi-square with `df` degrees of freedom
/// (Wilson-Hilferty).
fn chi2_critical(df: f64) -> f64 {
    const Z: f64 = 4.753_424;
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + Z * a.sqrt()).powi(3)
}

fn check_uniform(counts: &[u64], total: u64) {
    let cells = counts.len() as f64;
    let expect = total as f64 / cells;
    let sigma = (expect * (1.0 - 1.0 / cells)).sqrt();
    let mut chi2 = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let d = c as f64 - expect;
        assert!(d.abs() < 5.0 * sigma, "cell {i}: {c} vs {expect}");
        chi2 += d * d / expect;
    }
    let crit = chi2_critical(cells - 1.0);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
}

#[test]
fn output_bits_are_balanced() {
    let keys = random_keys(1, 1_000_000);
    let mut ones = [0u64; 64];
    for &k in &keys {
        let h = hash64(k, 0xABCD);
        for (b, slot) in ones.iter_mut().enumerate() {
            *slot += h >> b & 1;
        }
    }
    for (b, &c) in ones.iter().enumerate() {
        let f = c as f64 / keys.len() as f64;
        assert!((f - 0.5).abs() < 0.01, "bit {b}: {f}");
    }
}

#[test]
fn consecutive_keys_are_balanced() {
    let mut ones = [0u64; 64];
    for k in 0..1_000_000u64 {
        let h = hash64(k, 7);
        for (b, slot) in ones.iter_mut().enumerate() {
            *slot += h >> b & 1;
        }
    }
    assert!(ones.iter().all(|&c| (c as f64 / 1e6 - 0.5).abs() < 0.01));
}

#[test]
fn seeds_give_different_functions() {
    let keys = random_keys(2, 100_000);
    let same = keys.iter().filter(|&&k| hash64(k, 1) == hash64(k, 2)).count();
    assert!(same <= 100, "{same} collisions");
}

#[test]
fn deterministic() {
    for k in random_keys(3, 1000) {
        assert_eq!(hash64(k, 99), hash64(k, 99));
    }
}

#[test]
fn fingerprint_fields_are_uniform() {
    // n chosen so that m = 997
    let params = FilterParams::new(997 * 25, LoadFactor::ONE).unwrap();
    assert_eq!(params.bins(), 997);
    let seed = HashSeed::from_u64(4);
    let keys = random_keys(4, 1_000_000);
    let mut bins = vec![0u64; 997];
    let mut quotients = vec![0u64; 25];
    let mut remainders = vec![0u64; 256];
    for &k in &keys {
        let fp = fingerprint_of(k, &params, seed);
        bins[fp.bin as usize] += 1;
        quotients[fp.quotient as usize] += 1;
        remainders[fp.remainder as usize] += 1;
    }
    let total = keys.len() as u64;
    check_uniform(&bins, total);
    check_uniform(&quotients, total);
    check_uniform(&remainders, total);
}

#[test]
fn quotient_and_remainder_are_independent() {
    let params = FilterParams::new(1000, LoadFactor::ONE).unwrap();
    let seed = HashSeed::from_u64(5);
    let mut joint = vec![0u64; 25 * 16];
    let n = 2_000_000u64;
    for k in random_keys(5, n as usize) {
        let fp = fingerprint_of(k, &params, seed);
        joint[fp.quotient as usize * 16 + (fp.remainder & 15) as usize] += 1;
    }
    check_uniform(&joint, n);
}

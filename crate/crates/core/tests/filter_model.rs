use std::collections::HashSet;

use pf_oracles::{ShadowPrefixFilter, ShadowRoute};
use prefix_filter::{
    spare_key_of, FilterParams, Fingerprint, HashSeed, LoadFactor, PrefixFilter, Route,
    SpareFilter, SpareOverflow,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact spare that logs every forwarded key.
#[derive(Default)]
struct RecordingSpare {
    log: Vec<u64>,
    set: HashSet<u64>,
}

impl SpareFilter for RecordingSpare {
    fn insert(&mut self, key: u64) -> Result<(), SpareOverflow> {
        self.log.push(key);
        self.set.insert(key);
        Ok(())
    }

    fn contains(&self, key: u64) -> bool {
        self.set.contains(&key)
    }

    fn capacity(&self) -> u64 {
        u64::MAX
    }

    fn len(&self) -> u64 {
        self.log.len() as u64
    }

    fn space_bits(&self) -> u64 {
        self.set.len() as u64 * 64
    }
}

fn mini(fp: Fingerprint) -> (u32, u32) {
    (fp.quotient, fp.remainder)
}

/// Inserts `keys` into both the filter and the shadow, checking the prefix
/// invariant and the forwarded multiset after every insert.
fn run(keys: &[u64], alpha: LoadFactor, seed: HashSeed, probes: &[u64]) {
    let params = FilterParams::new(keys.len() as u64, alpha).unwrap();
    let mut f = PrefixFilter::with_spare(params, seed, RecordingSpare::default()).unwrap();
    let mut shadow = ShadowPrefixFilter::new(params.bins() as usize, 25);
    for (i, &key) in keys.iter().enumerate() {
        let fp = f.fingerprint(key);
        let expect = shadow.insert(fp.bin, mini(fp));
        let before = f.spare().log.len();
        f.insert(key).unwrap();
        match expect {
            None => assert_eq!(f.spare().log.len(), before),
            Some((q, r)) => {
                assert_eq!(f.spare().log.len(), before + 1);
                let want = spare_key_of(Fingerprint { bin: fp.bin, quotient: q, remainder: r }, &params);
                assert_eq!(*f.spare().log.last().unwrap(), want, "insert {i}");
            }
        }
        let bin = &f.bins()[fp.bin as usize];
        let mut got: Vec<(u32, u32)> = bin
            .entries()
            .map(|e| (e.quotient as u32, e.remainder as u32))
            .collect();
        got.sort();
        assert_eq!(got, shadow.stored_prefix(fp.bin), "bin {} after insert {i}", fp.bin);
        assert_eq!(bin.is_overflowed(), shadow.overflowed(fp.bin));
    }
    let mut log = f.spare().log.clone();
    log.sort_unstable();
    let want: Vec<u64> = shadow
        .forwarded()
        .into_iter()
        .map(|(bin, (q, r))| spare_key_of(Fingerprint { bin, quotient: q, remainder: r }, &params))
        .collect::<Vec<_>>();
    let mut want = want;
    want.sort_unstable();
    assert_eq!(log, want);

    for &key in keys {
        assert!(f.query(key), "false negative");
    }
    f.reset_counters();
    for &key in probes {
        let fp = f.fingerprint(key);
        let route = f.route(key);
        let expect = match shadow.route(fp.bin, mini(fp)) {
            ShadowRoute::BinOnly => Route::BinOnly,
            ShadowRoute::Spare => Route::Spare,
        };
        assert_eq!(route, expect);
        let before = f.counters().query_spare_accesses;
        f.query(key);
        assert_eq!(f.counters().query_spare_accesses - before, (route == Route::Spare) as u64);
    }
    let c = f.counters();
    assert_eq!(c.query_total, probes.len() as u64);
    assert_eq!(c.bins_touched, probes.len() as u64);
}

#[test]
fn randomized_sequences_follow_shadow() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..400 {
        let len = rng.random_range(1..1500);
        let keys: Vec<u64> = (0..len).map(|_| rng.random()).collect();
        let probes: Vec<u64> = (0..200).map(|_| rng.random()).collect();
        let alpha = if rng.random_bool(0.5) { LoadFactor::ONE } else { LoadFactor::new(19, 20).unwrap() };
        run(&keys, alpha, HashSeed(rng.random(), rng.random()), &probes);
    }
}

#[test]
fn duplicate_fingerprints_are_forwarded() {
    // the same key repeated yields identical fingerprints in one bin
    let keys = vec![42u64; 60];
    run(&keys, LoadFactor::ONE, HashSeed(1, 2), &[42, 43]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_shadow_equivalence(
        keys in prop::collection::vec(any::<u64>(), 1..600),
        s0 in any::<u64>(),
        s1 in any::<u64>(),
    ) {
        run(&keys, LoadFactor::ONE, HashSeed(s0, s1), &keys[..keys.len().min(50)]);
    }
}

use pf_oracles::NaivePd;
use prefix_filter::{PdEntry, PocketDictionary, QueryPath};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_pair(e: PdEntry) -> (u32, u32) {
    (e.quotient as u32, e.remainder as u32)
}

fn sorted_entries(pd: &PocketDictionary) -> Vec<(u32, u32)> {
    let mut v: Vec<_> = pd.entries().map(to_pair).collect();
    v.sort();
    v
}

fn assert_same(pd: &PocketDictionary, model: &NaivePd) {
    assert_eq!(sorted_entries(pd), model.entries());
    assert_eq!(pd.len(), model.len());
    assert_eq!(pd.is_overflowed(), model.is_overflowed());
    assert_eq!(pd.max_entry().map(to_pair), model.max());
    assert!(pd.is_well_formed());
    assert_eq!(PocketDictionary::encode(&pd.decode()), Some(*pd));
    assert_eq!(PocketDictionary::from_bytes(*pd.as_bytes()), Some(*pd));
}

fn random_entry(rng: &mut ChaCha8Rng, narrow: bool) -> PdEntry {
    // a narrow remainder alphabet forces repeated remainders and the select path
    let r = if narrow { rng.random_range(0..4) } else { rng.random() };
    PdEntry::new(rng.random_range(0..25), r)
}

/// Random mix of inserts, evictions and overflow marks, checked after every
/// step. Returns the final pair.
fn random_run(rng: &mut ChaCha8Rng, steps: usize) -> (PocketDictionary, NaivePd) {
    let narrow = rng.random_bool(0.3);
    let mut pd = PocketDictionary::new();
    let mut model = NaivePd::new(25, 8, 25);
    for _ in 0..steps {
        let e = random_entry(rng, narrow);
        let roll = rng.random_range(0..100);
        if roll < 3 {
            pd.mark_overflowed();
            model.mark_overflowed();
        } else if pd.is_full() {
            let max = model.max().unwrap();
            if to_pair(e) < max {
                let got = pd.evict_max_and_insert(e);
                assert_eq!(to_pair(got), model.evict_max_and_insert(to_pair(e)));
            } else {
                let before = pd;
                assert!(pd.insert(e).is_err());
                assert_eq!(*pd.as_bytes(), *before.as_bytes());
                assert!(!model.insert(to_pair(e)));
            }
        } else {
            pd.insert(e).unwrap();
            assert!(model.insert(to_pair(e)));
        }
        assert_same(&pd, &model);
    }
    (pd, model)
}

fn check_query(pd: &PocketDictionary, model: &NaivePd, e: PdEntry) {
    let want = model.contains(to_pair(e));
    let (got, path) = pd.query_traced(e);
    assert_eq!(got, want, "{e:?} in {pd:?}");
    assert_eq!(pd.contains_by_select(e), want);
    if path == QueryPath::Cutoff {
        assert!(!want);
    }
}

#[test]
fn random_sequences_match_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for run in 0..100_000 {
        let steps = rng.random_range(1..60);
        let (pd, model) = random_run(&mut rng, steps);
        if run < 1000 {
            for q in 0..25 {
                for r in 0..=255 {
                    check_query(&pd, &model, PdEntry::new(q, r));
                }
            }
        } else {
            for _ in 0..100 {
                let narrow = rng.random_bool(0.5);
                let e = random_entry(&mut rng, narrow);
                check_query(&pd, &model, e);
            }
            for &(q, r) in model.entries() {
                check_query(&pd, &model, PdEntry::new(q as u8, r as u8));
            }
        }
    }
}

#[test]
fn marking_full_dictionary_keeps_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let narrow = rng.random_bool(0.5);
        let mut pd = PocketDictionary::new();
        let mut model = NaivePd::new(25, 8, 25);
        while !pd.is_full() {
            let e = random_entry(&mut rng, narrow);
            pd.insert(e).unwrap();
            model.insert(to_pair(e));
        }
        let computed = pd.max_entry().unwrap();
        assert_eq!(to_pair(computed), model.max().unwrap());
        pd.mark_overflowed();
        assert_eq!(pd.max_entry(), Some(computed));
        assert_eq!(pd.max_quotient_field(), computed.quotient);
        assert_eq!(pd.body()[24], computed.remainder);
        model.mark_overflowed();
        assert_same(&pd, &model);
    }
}

#[derive(Clone, Debug)]
enum Op {
    Insert(u8, u8),
    Mark,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        20 => (0u8..25, any::<u8>()).prop_map(|(q, r)| Op::Insert(q, r)),
        20 => (0u8..25, 0u8..3).prop_map(|(q, r)| Op::Insert(q, r)),
        1 => Just(Op::Mark),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn prop_matches_model(ops in prop::collection::vec(op(), 0..80)) {
        let mut pd = PocketDictionary::new();
        let mut model = NaivePd::new(25, 8, 25);
        for op in ops {
            match op {
                Op::Mark => {
                    pd.mark_overflowed();
                    model.mark_overflowed();
                }
                Op::Insert(q, r) => {
                    let e = PdEntry::new(q, r);
                    if !pd.is_full() {
                        pd.insert(e).unwrap();
                        model.insert(to_pair(e));
                    } else if to_pair(e) < model.max().unwrap() {
                        prop_assert_eq!(to_pair(pd.evict_max_and_insert(e)), model.evict_max_and_insert(to_pair(e)));
                    }
                }
            }
            prop_assert_eq!(sorted_entries(&pd), model.entries().to_vec());
            prop_assert_eq!(pd.len(), 50 - pd.header().count_ones() as usize);
            prop_assert!(pd.is_well_formed());
        }
        for q in 0..25u8 {
            for r in [0u8, 1, 2, 3, 77, 255] {
                let e = PdEntry::new(q, r);
                prop_assert_eq!(pd.contains(e), model.contains(to_pair(e)));
            }
        }
    }

    #[test]
    fn prop_decode_encode_round_trip(ops in prop::collection::vec(op(), 0..40)) {
        let mut pd = PocketDictionary::new();
        for op in ops {
            match op {
                Op::Mark => pd.mark_overflowed(),
                Op::Insert(q, r) => { let _ = pd.insert(PdEntry::new(q, r)); }
            }
        }
        prop_assert_eq!(PocketDictionary::encode(&pd.decode()), Some(pd));
    }

    #[test]
    fn prop_arbitrary_bytes_never_panic(raw in prop::array::uniform32(any::<u8>())) {
        if let Some(pd) = PocketDictionary::from_bytes(raw) {
            prop_assert_eq!(PocketDictionary::encode(&pd.decode()), Some(pd));
            for q in 0..25u8 {
                let e = PdEntry::new(q, raw[7]);
                prop_assert_eq!(pd.contains(e), pd.contains_by_select(e));
            }
        }
    }
}

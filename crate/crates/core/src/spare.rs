//! Second-level filters that absorb fingerprints evicted from full bins.
//!
//! Any incremental filter over 64-bit keys can serve as a spare. Two are
//! provided: a flexible blocked Bloom filter (the default) and an exact set
//! used to isolate the bin table's error in tests.

use std::collections::HashSet;

use crate::codec::{Reader, Writer};
use crate::error::{DecodeError, SpareOverflow};
use crate::fingerprint::{reduce, HashSeed, SeededHash};

/// Behavioral contract for a spare.
pub trait SpareFilter {
    fn insert(&mut self, key: u64) -> Result<(), SpareOverflow>;

    fn contains(&self, key: u64) -> bool;

    /// Dataset size the spare was built for.
    fn capacity(&self) -> u64;

    /// Insertions accepted so far.
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bits of storage the spare allocates.
    fn space_bits(&self) -> u64;

    /// Memory blocks read by one lookup.
    fn blocks_per_access(&self) -> u32 {
        1
    }
}

pub const DEFAULT_BITS_PER_KEY: u32 = 12;
pub const PROBES: u32 = 8;
const BLOCK_BITS: u64 = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[repr(C, align(64))]
struct Block([u64; 8]);

/// Blocked Bloom filter with an arbitrary block count: each key sets
/// [`PROBES`] bits inside one 512-bit block.
#[derive(Clone, Debug)]
pub struct BlockedBloomSpare {
    blocks: Vec<Block>,
    capacity: u64,
    inserted: u64,
    seed: HashSeed,
    block_hash: SeededHash,
    probe_hash: SeededHash,
}

impl BlockedBloomSpare {
    pub fn new(capacity: u64, seed: HashSeed) -> Self {
        Self::with_bits_per_key(capacity, DEFAULT_BITS_PER_KEY, seed)
    }

    pub fn with_bits_per_key(capacity: u64, bits_per_key: u32, seed: HashSeed) -> Self {
        let bits = capacity as u128 * bits_per_key as u128;
        let count = bits.div_ceil(BLOCK_BITS as u128).max(1) as usize;
        Self::from_parts(vec![Block::default(); count], capacity, 0, seed)
    }

    fn from_parts(blocks: Vec<Block>, capacity: u64, inserted: u64, seed: HashSeed) -> Self {
        BlockedBloomSpare {
            blocks,
            capacity,
            inserted,
            seed,
            block_hash: SeededHash::new(seed.0),
            probe_hash: SeededHash::new(seed.1),
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn seed(&self) -> HashSeed {
        self.seed
    }

    /// Block index and the eight 9-bit probe offsets of `key`.
    ///
    /// Probes 0..7 are consecutive 9-bit slices of the probe hash; the last
    /// probe combines its top bit with the low byte of the block hash, which
    /// the multiply-high block reduction leaves effectively unused.
    #[inline]
    fn locate(&self, key: u64) -> (usize, [u16; 8]) {
        let h1 = self.block_hash.hash(key);
        let h2 = self.probe_hash.hash(key);
        let block = reduce(h1, self.blocks.len() as u64) as usize;
        let mut probes = [0u16; 8];
        for (i, p) in probes.iter_mut().take(7).enumerate() {
            *p = ((h2 >> (9 * i)) & 0x1FF) as u16;
        }
        probes[7] = ((h2 >> 63) | (h1 & 0xFF) << 1) as u16;
        (block, probes)
    }

    /// Sets every bit of every block.
    pub fn saturate(&mut self) {
        self.blocks.iter_mut().for_each(|b| b.0 = [u64::MAX; 8]);
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u8(SPARE_TAG_BBF);
        w.u64(self.capacity);
        w.u64(self.seed.0);
        w.u64(self.seed.1);
        w.u64(self.inserted);
        w.u64(self.blocks.len() as u64);
        for block in &self.blocks {
            for word in block.0 {
                w.u64(word);
            }
        }
    }

    fn decode_body(r: &mut Reader) -> Result<Self, DecodeError> {
        let capacity = r.u64()?;
        let seed = HashSeed(r.u64()?, r.u64()?);
        let inserted = r.u64()?;
        let count = r.u64()?;
        if count == 0 {
            return Err(DecodeError::CorruptSpare("blocked Bloom spare has no blocks"));
        }
        if count.saturating_mul(64) > r.remaining() as u64 {
            return Err(DecodeError::Truncated);
        }
        let mut blocks = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut b = Block::default();
            for word in b.0.iter_mut() {
                *word = r.u64()?;
            }
            blocks.push(b);
        }
        Ok(Self::from_parts(blocks, capacity, inserted, seed))
    }
}

impl SpareFilter for BlockedBloomSpare {
    #[inline]
    fn insert(&mut self, key: u64) -> Result<(), SpareOverflow> {
        let (block, probes) = self.locate(key);
        let words = &mut self.blocks[block].0;
        for p in probes {
            words[(p >> 6) as usize] |= 1 << (p & 63);
        }
        self.inserted += 1;
        Ok(())
    }

    #[inline]
    fn contains(&self, key: u64) -> bool {
        let (block, probes) = self.locate(key);
        let words = &self.blocks[block].0;
        probes
            .iter()
            .all(|&p| words[(p >> 6) as usize] >> (p & 63) & 1 == 1)
    }

    fn capacity(&self) -> u64 {
        self.capacity
    }

    fn len(&self) -> u64 {
        self.inserted
    }

    fn space_bits(&self) -> u64 {
        self.blocks.len() as u64 * BLOCK_BITS
    }
}

/// Exact set of keys with a hard capacity; never reports a false positive.
#[derive(Clone, Debug, Default)]
pub struct ExactSetSpare {
    keys: HashSet<u64>,
    capacity: u64,
}

impl ExactSetSpare {
    pub fn new(capacity: u64) -> Self {
        ExactSetSpare {
            keys: HashSet::new(),
            capacity,
        }
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u8(SPARE_TAG_EXACT);
        w.u64(self.capacity);
        // no hashing, seed words kept for a uniform blob layout
        w.u64(0);
        w.u64(0);
        let mut keys: Vec<u64> = self.keys.iter().copied().collect();
        keys.sort_unstable();
        w.u64(keys.len() as u64);
        for k in keys {
            w.u64(k);
        }
    }

    fn decode_body(r: &mut Reader) -> Result<Self, DecodeError> {
        let capacity = r.u64()?;
        r.u64()?;
        r.u64()?;
        let count = r.u64()?;
        if count > capacity {
            return Err(DecodeError::CorruptSpare("exact spare holds more keys than its capacity"));
        }
        if count.saturating_mul(8) > r.remaining() as u64 {
            return Err(DecodeError::Truncated);
        }
        let mut keys = HashSet::with_capacity(count as usize);
        let mut prev = None;
        for _ in 0..count {
            let k = r.u64()?;
            if prev.is_some_and(|p| p >= k) {
                return Err(DecodeError::CorruptSpare("exact spare keys not strictly sorted"));
            }
            prev = Some(k);
            keys.insert(k);
        }
        Ok(ExactSetSpare { keys, capacity })
    }
}

impl SpareFilter for ExactSetSpare {
    fn insert(&mut self, key: u64) -> Result<(), SpareOverflow> {
        if self.keys.contains(&key) {
            return Ok(());
        }
        if self.keys.len() as u64 >= self.capacity {
            return Err(SpareOverflow);
        }
        self.keys.insert(key);
        Ok(())
    }

    fn contains(&self, key: u64) -> bool {
        self.keys.contains(&key)
    }

    fn capacity(&self) -> u64 {
        self.capacity
    }

    fn len(&self) -> u64 {
        self.keys.len() as u64
    }

    fn space_bits(&self) -> u64 {
        self.keys.len() as u64 * 64
    }
}

const SPARE_TAG_BBF: u8 = 0;
const SPARE_TAG_EXACT: u8 = 1;

/// Which spare implementation a filter uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SpareKind {
    #[default]
    BlockedBloom,
    ExactSet,
}

impl SpareKind {
    pub fn tag(self) -> u8 {
        match self {
            SpareKind::BlockedBloom => SPARE_TAG_BBF,
            SpareKind::ExactSet => SPARE_TAG_EXACT,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            SPARE_TAG_BBF => Some(SpareKind::BlockedBloom),
            SPARE_TAG_EXACT => Some(SpareKind::ExactSet),
            _ => None,
        }
    }

    /// Capacity headroom over the analytic dataset size `n'`.
    pub fn default_headroom(self) -> f64 {
        match self {
            SpareKind::BlockedBloom => 2.0,
            SpareKind::ExactSet => 1.0 / 0.935,
        }
    }
}

impl std::str::FromStr for SpareKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bbf" => Ok(SpareKind::BlockedBloom),
            "exact" => Ok(SpareKind::ExactSet),
            other => Err(format!("unknown spare kind `{other}` (expected bbf or exact)")),
        }
    }
}

impl std::fmt::Display for SpareKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpareKind::BlockedBloom => "bbf",
            SpareKind::ExactSet => "exact",
        })
    }
}

/// The built-in spares behind one type.
#[derive(Clone, Debug)]
pub enum Spare {
    BlockedBloom(BlockedBloomSpare),
    ExactSet(ExactSetSpare),
}

impl Spare {
    pub fn new(kind: SpareKind, capacity: u64, seed: HashSeed) -> Self {
        match kind {
            SpareKind::BlockedBloom => Spare::BlockedBloom(BlockedBloomSpare::new(capacity, seed)),
            SpareKind::ExactSet => Spare::ExactSet(ExactSetSpare::new(capacity)),
        }
    }

    pub fn kind(&self) -> SpareKind {
        match self {
            Spare::BlockedBloom(_) => SpareKind::BlockedBloom,
            Spare::ExactSet(_) => SpareKind::ExactSet,
        }
    }

    /// Serializes as: kind tag, capacity, two seed words, then the
    /// kind-specific payload.
    pub fn to_blob(&self) -> Vec<u8> {
        let mut w = Writer::default();
        match self {
            Spare::BlockedBloom(s) => s.encode(&mut w),
            Spare::ExactSet(s) => s.encode(&mut w),
        }
        w.into_inner()
    }

    pub fn from_blob(blob: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(blob);
        let spare = match SpareKind::from_tag(r.u8()?) {
            Some(SpareKind::BlockedBloom) => Spare::BlockedBloom(BlockedBloomSpare::decode_body(&mut r)?),
            Some(SpareKind::ExactSet) => Spare::ExactSet(ExactSetSpare::decode_body(&mut r)?),
            None => return Err(DecodeError::CorruptSpare("unknown spare kind tag")),
        };
        if r.remaining() != 0 {
            return Err(DecodeError::CorruptSpare("trailing bytes in spare blob"));
        }
        Ok(spare)
    }
}

impl SpareFilter for Spare {
    #[inline]
    fn insert(&mut self, key: u64) -> Result<(), SpareOverflow> {
        match self {
            Spare::BlockedBloom(s) => s.insert(key),
            Spare::ExactSet(s) => s.insert(key),
        }
    }

    #[inline]
    fn contains(&self, key: u64) -> bool {
        match self {
            Spare::BlockedBloom(s) => s.contains(key),
            Spare::ExactSet(s) => s.contains(key),
        }
    }

    fn capacity(&self) -> u64 {
        match self {
            Spare::BlockedBloom(s) => s.capacity(),
            Spare::ExactSet(s) => s.capacity(),
        }
    }

    fn len(&self) -> u64 {
        match self {
            Spare::BlockedBloom(s) => s.len(),
            Spare::ExactSet(s) => s.len(),
        }
    }

    fn space_bits(&self) -> u64 {
        match self {
            Spare::BlockedBloom(s) => s.space_bits(),
            Spare::ExactSet(s) => s.space_bits(),
        }
    }

    fn blocks_per_access(&self) -> u32 {
        match self {
            Spare::BlockedBloom(s) => s.blocks_per_access(),
            Spare::ExactSet(s) => s.blocks_per_access(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(seed: u64, count: usize) -> Vec<u64> {
        let h = SeededHash::new(seed);
        (0..count as u64).map(|i| h.hash(i)).collect()
    }

    #[test]
    fn bbf_sizing() {
        let s = BlockedBloomSpare::new(1000, HashSeed(1, 2));
        assert_eq!(s.block_count(), 24); // ceil(12000 / 512)
        assert_eq!(s.space_bits(), 24 * 512);
        assert_eq!(BlockedBloomSpare::new(0, HashSeed(1, 2)).block_count(), 1);
    }

    #[test]
    fn bbf_fresh_is_empty() {
        let s = BlockedBloomSpare::new(1000, HashSeed(1, 2));
        assert!(s.blocks.iter().all(|b| b.0 == [0; 8]));
        assert!(keys(9, 10_000).into_iter().all(|k| !s.contains(k)));
    }

    #[test]
    fn bbf_no_false_negatives_and_idempotent() {
        let mut s = BlockedBloomSpare::new(5000, HashSeed(3, 4));
        let ks = keys(1, 5000);
        for &k in &ks {
            s.insert(k).unwrap();
        }
        assert!(ks.iter().all(|&k| s.contains(k)));
        let before = s.blocks.clone();
        for &k in &ks[..100] {
            s.insert(k).unwrap();
        }
        assert_eq!(before, s.blocks);
    }

    #[test]
    fn bbf_half_load_fpr_below_one_percent() {
        let capacity = 100_000;
        let mut s = BlockedBloomSpare::new(capacity, HashSeed(5, 6));
        for k in keys(11, capacity as usize / 2) {
            s.insert(k).unwrap();
        }
        let probes = keys(12, 200_000);
        let fp = probes.iter().filter(|&&k| s.contains(k)).count();
        let rate = fp as f64 / probes.len() as f64;
        assert!(rate < 0.01, "fpr {rate}");
    }

    #[test]
    fn bbf_saturated_accepts_everything() {
        let mut s = BlockedBloomSpare::new(1, HashSeed(7, 8));
        assert_eq!(s.block_count(), 1);
        s.saturate();
        assert!(keys(13, 1000).into_iter().all(|k| s.contains(k)));
    }

    #[test]
    fn exact_set_semantics() {
        let mut s = ExactSetSpare::new(5);
        for k in 0..5 {
            s.insert(k).unwrap();
        }
        assert!(s.contains(3));
        assert!(!s.contains(99));
        s.insert(2).unwrap(); // duplicate does not count
        assert_eq!(s.insert(5), Err(SpareOverflow));
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn blob_round_trip() {
        let mut bbf = Spare::new(SpareKind::BlockedBloom, 300, HashSeed(9, 10));
        let mut exact = Spare::new(SpareKind::ExactSet, 300, HashSeed(9, 10));
        for k in keys(14, 200) {
            bbf.insert(k).unwrap();
            exact.insert(k).unwrap();
        }
        for spare in [bbf, exact] {
            let blob = spare.to_blob();
            let back = Spare::from_blob(&blob).unwrap();
            assert_eq!(back.to_blob(), blob);
            assert_eq!(back.len(), spare.len());
            assert!(keys(14, 200).into_iter().all(|k| back.contains(k)));
        }
        assert!(matches!(Spare::from_blob(&[7]), Err(DecodeError::CorruptSpare(_))));
        assert_eq!(Spare::from_blob(&[0, 1, 2]).unwrap_err(), DecodeError::Truncated);
    }
}

//! The prefix filter: a table of pocket-dictionary bins that each keep the
//! smallest mini-fingerprints routed to them, backed by a spare that receives
//! everything a full bin pushes out.

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use crate::analysis;
use crate::codec::{Reader, Writer};
use crate::error::{DecodeError, InsertError, ParamError};
use crate::fingerprint::{
    spare_key_of, Fingerprint, FilterParams, FingerprintHasher, HashSeed, LoadFactor,
};
use crate::pd::{PdEntry, PocketDictionary};
use crate::spare::{Spare, SpareFilter, SpareKind};

const MAGIC: &[u8; 4] = b"PFLT";
pub const FORMAT_VERSION: u32 = 1;

/// Where a query for a key is answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    BinOnly,
    Spare,
}

/// Snapshot of the operation counters.
///
/// `bins_touched` counts one bin per insert and per query;
/// `spare_blocks_touched` charges each spare access the spare's
/// [`blocks_per_access`](SpareFilter::blocks_per_access).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InstrumentationCounters {
    pub insert_total: u64,
    pub insert_spare_forwards: u64,
    pub query_total: u64,
    pub query_spare_accesses: u64,
    pub bins_touched: u64,
    pub spare_blocks_touched: u64,
}

#[derive(Debug, Default)]
struct Counters {
    insert_total: AtomicU64,
    insert_spare_forwards: AtomicU64,
    query_total: AtomicU64,
    query_spare_accesses: AtomicU64,
    bins_touched: AtomicU64,
    spare_blocks_touched: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> InstrumentationCounters {
        InstrumentationCounters {
            insert_total: self.insert_total.load(Relaxed),
            insert_spare_forwards: self.insert_spare_forwards.load(Relaxed),
            query_total: self.query_total.load(Relaxed),
            query_spare_accesses: self.query_spare_accesses.load(Relaxed),
            bins_touched: self.bins_touched.load(Relaxed),
            spare_blocks_touched: self.spare_blocks_touched.load(Relaxed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterStats {
    pub counters: InstrumentationCounters,
    pub inserted: u64,
    pub spare_len: u64,
    pub spare_capacity: u64,
    pub bin_bits: u64,
    pub spare_bits: u64,
    pub total_bits: u64,
    /// `bin_bits / inserted`; `None` while empty.
    pub bin_bits_per_key: Option<f64>,
    /// `total_bits / inserted`; `None` while empty.
    pub bits_per_key: Option<f64>,
}

/// Construction options for a filter with one of the built-in spares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub n: u64,
    pub alpha: LoadFactor,
    pub spare_kind: SpareKind,
    pub seed: HashSeed,
    /// Spare capacity as a multiple of `ceil(1.1 E[X])`. Defaults to
    /// [`SpareKind::default_headroom`].
    pub spare_headroom: Option<f64>,
}

impl FilterConfig {
    pub fn new(n: u64, alpha: LoadFactor) -> Self {
        FilterConfig {
            n,
            alpha,
            spare_kind: SpareKind::default(),
            seed: HashSeed::default(),
            spare_headroom: None,
        }
    }

    pub fn spare_kind(mut self, kind: SpareKind) -> Self {
        self.spare_kind = kind;
        self
    }

    pub fn seed(mut self, seed: HashSeed) -> Self {
        self.seed = seed;
        self
    }

    pub fn spare_headroom(mut self, factor: f64) -> Self {
        self.spare_headroom = Some(factor);
        self
    }
}

/// Incremental approximate-membership filter for at most `n` distinct keys.
///
/// Queries take `&self` and may run concurrently once building is done; the
/// counters are relaxed atomics.
#[derive(Debug)]
pub struct PrefixFilter<S = Spare> {
    params: FilterParams,
    seed: HashSeed,
    hasher: FingerprintHasher,
    bins: Vec<PocketDictionary>,
    spare: S,
    counters: Counters,
    inserted: u64,
}

/// Spare size for `params`: `ceil(headroom * ceil(1.1 E[X]))`, at least 1.
pub fn spare_capacity_for(params: &FilterParams, headroom: f64) -> u64 {
    let base = analysis::spare_capacity(params.n(), params.bins(), params.bin_capacity() as u64)
        .expect("validated parameters");
    ((base as f64 * headroom).ceil() as u64).max(1)
}

impl PrefixFilter<Spare> {
    /// `alpha` is converted with [`LoadFactor::from_f64`].
    pub fn new(n: u64, alpha: f64, spare_kind: SpareKind, seed: HashSeed) -> Result<Self, ParamError> {
        let alpha = LoadFactor::from_f64(alpha)?;
        Self::with_config(FilterConfig::new(n, alpha).spare_kind(spare_kind).seed(seed))
    }

    pub fn with_config(cfg: FilterConfig) -> Result<Self, ParamError> {
        let params = FilterParams::new(cfg.n, cfg.alpha)?;
        let headroom = cfg
            .spare_headroom
            .unwrap_or_else(|| cfg.spare_kind.default_headroom());
        if !(headroom.is_finite() && headroom > 0.0) {
            return Err(ParamError::SpareHeadroom(headroom));
        }
        let capacity = spare_capacity_for(&params, headroom);
        let spare_seed = HashSeed::from_u64(cfg.seed.0 ^ cfg.seed.1.rotate_left(32));
        let spare = Spare::new(cfg.spare_kind, capacity, spare_seed);
        Self::with_spare(params, cfg.seed, spare)
    }

    /// Serializes the filter. Counters are not persisted.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        let p = &self.params;
        w.u64(p.n());
        w.u32(p.alpha().numerator());
        w.u32(p.alpha().denominator());
        w.u32(p.bin_capacity());
        w.u32(p.quotient_range());
        w.u32(p.remainder_bits());
        w.u64(p.bins());
        w.u64(self.seed.0);
        w.u64(self.seed.1);
        w.u64(self.inserted);
        for bin in &self.bins {
            w.bytes(bin.as_bytes());
        }
        w.u8(self.spare.kind().tag());
        let blob = self.spare.to_blob();
        w.u64(blob.len() as u64);
        w.bytes(&blob);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(DecodeError::UnsupportedVersion(version));
        }
        let n = r.u64()?;
        let (num, den) = (r.u32()?, r.u32()?);
        let (k, q, rbits) = (r.u32()?, r.u32()?, r.u32()?);
        let m = r.u64()?;
        let seed = HashSeed(r.u64()?, r.u64()?);
        let inserted = r.u64()?;

        let invalid = |e: ParamError| DecodeError::InvalidParams(e.to_string());
        let alpha = LoadFactor::new(num, den).map_err(invalid)?;
        let params = FilterParams::with_shape(n, alpha, k, q, rbits).map_err(invalid)?;
        if !params.is_default_shape() {
            return Err(invalid(ParamError::UnsupportedShape));
        }
        if params.bins() != m {
            return Err(DecodeError::InvalidParams(format!(
                "bin count {m} does not match n and alpha (expected {})",
                params.bins()
            )));
        }
        if inserted > n {
            return Err(DecodeError::InvalidParams(format!(
                "inserted count {inserted} exceeds n = {n}"
            )));
        }
        if (m as u128) * 32 > r.remaining() as u128 {
            return Err(DecodeError::Truncated);
        }
        let mut bins = Vec::with_capacity(m as usize);
        for i in 0..m {
            let raw: [u8; 32] = r.take(32)?.try_into().unwrap();
            bins.push(PocketDictionary::from_bytes(raw).ok_or(DecodeError::CorruptBin(i))?);
        }
        let kind = SpareKind::from_tag(r.u8()?).ok_or(DecodeError::CorruptSpare("unknown spare kind tag"))?;
        let len = r.u64()?;
        if len > r.remaining() as u64 {
            return Err(DecodeError::Truncated);
        }
        let spare = Spare::from_blob(r.take(len as usize)?)?;
        if spare.kind() != kind {
            return Err(DecodeError::CorruptSpare("spare kind tag disagrees with blob"));
        }
        if r.remaining() != 0 {
            return Err(DecodeError::TrailingBytes(r.remaining()));
        }
        Ok(PrefixFilter {
            hasher: FingerprintHasher::new(&params, seed),
            params,
            seed,
            bins,
            spare,
            counters: Counters::default(),
            inserted,
        })
    }
}

impl<S: SpareFilter> PrefixFilter<S> {
    /// Builds an empty filter over a caller-supplied spare.
    pub fn with_spare(params: FilterParams, seed: HashSeed, spare: S) -> Result<Self, ParamError> {
        if !params.is_default_shape() {
            return Err(ParamError::UnsupportedShape);
        }
        Ok(PrefixFilter {
            hasher: FingerprintHasher::new(&params, seed),
            params,
            seed,
            bins: vec![PocketDictionary::new(); params.bins() as usize],
            spare,
            counters: Counters::default(),
            inserted: 0,
        })
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn seed(&self) -> HashSeed {
        self.seed
    }

    pub fn bins(&self) -> &[PocketDictionary] {
        &self.bins
    }

    pub fn spare(&self) -> &S {
        &self.spare
    }

    /// Number of successful insertions.
    pub fn len(&self) -> u64 {
        self.inserted
    }

    pub fn is_empty(&self) -> bool {
        self.inserted == 0
    }

    #[inline]
    pub fn fingerprint(&self, key: u64) -> Fingerprint {
        self.hasher.fingerprint(key)
    }

    #[inline]
    fn entry(fp: Fingerprint) -> PdEntry {
        PdEntry::new(fp.quotient as u8, fp.remainder as u8)
    }

    /// Adds `key`. Keys are assumed distinct; re-inserting a key consumes
    /// capacity again.
    ///
    /// On [`InsertError::SpareOverflow`] the bin table is left unchanged.
    pub fn insert(&mut self, key: u64) -> Result<(), InsertError> {
        if self.inserted >= self.params.n() {
            return Err(InsertError::CapacityExceeded { n: self.params.n() });
        }
        self.counters.insert_total.fetch_add(1, Relaxed);
        self.counters.bins_touched.fetch_add(1, Relaxed);
        let fp = self.hasher.fingerprint(key);
        let e = Self::entry(fp);
        let bin = &mut self.bins[fp.bin as usize];
        if !bin.is_full() {
            bin.insert(e).expect("bin has room");
            self.inserted += 1;
            return Ok(());
        }

        let max = bin.max_entry().expect("full bin has a maximum");
        // a tie forwards the same value either way and leaves the bin as is
        let keep_bin = e >= max;
        let forwarded = if keep_bin {
            fp
        } else {
            Fingerprint {
                bin: fp.bin,
                quotient: max.quotient as u32,
                remainder: max.remainder as u32,
            }
        };
        self.counters.insert_spare_forwards.fetch_add(1, Relaxed);
        self.counters
            .spare_blocks_touched
            .fetch_add(self.spare.blocks_per_access() as u64, Relaxed);
        self.spare
            .insert(spare_key_of(forwarded, &self.params))
            .map_err(|_| InsertError::SpareOverflow)?;
        if keep_bin {
            bin.mark_overflowed();
        } else {
            bin.evict_max_and_insert(e);
        }
        self.inserted += 1;
        Ok(())
    }

    /// Which structure answers a query for `fp`.
    #[inline]
    fn route_of(&self, fp: Fingerprint) -> Route {
        let bin = &self.bins[fp.bin as usize];
        if bin.is_overflowed() {
            if let Some(max) = bin.max_entry() {
                if Self::entry(fp) > max {
                    return Route::Spare;
                }
            }
        }
        Route::BinOnly
    }

    /// Routing decision for `key` without touching counters.
    pub fn route(&self, key: u64) -> Route {
        self.route_of(self.hasher.fingerprint(key))
    }

    /// Membership query: never false for an inserted key.
    #[inline]
    pub fn query(&self, key: u64) -> bool {
        self.counters.query_total.fetch_add(1, Relaxed);
        self.counters.bins_touched.fetch_add(1, Relaxed);
        let fp = self.hasher.fingerprint(key);
        match self.route_of(fp) {
            Route::Spare => {
                self.counters.query_spare_accesses.fetch_add(1, Relaxed);
                self.counters
                    .spare_blocks_touched
                    .fetch_add(self.spare.blocks_per_access() as u64, Relaxed);
                self.spare.contains(spare_key_of(fp, &self.params))
            }
            Route::BinOnly => self.bins[fp.bin as usize].contains(Self::entry(fp)),
        }
    }

    pub fn counters(&self) -> InstrumentationCounters {
        self.counters.snapshot()
    }

    pub fn reset_counters(&self) {
        let c = &self.counters;
        for a in [
            &c.insert_total,
            &c.insert_spare_forwards,
            &c.query_total,
            &c.query_spare_accesses,
            &c.bins_touched,
            &c.spare_blocks_touched,
        ] {
            a.store(0, Relaxed);
        }
    }

    pub fn stats(&self) -> FilterStats {
        let bin_bits = self.bins.len() as u64 * 256;
        let spare_bits = self.spare.space_bits();
        let total_bits = bin_bits + spare_bits;
        let per_key = |bits: u64| (self.inserted > 0).then(|| bits as f64 / self.inserted as f64);
        FilterStats {
            counters: self.counters(),
            inserted: self.inserted,
            spare_len: self.spare.len(),
            spare_capacity: self.spare.capacity(),
            bin_bits,
            spare_bits,
            total_bits,
            bin_bits_per_key: per_key(bin_bits),
            bits_per_key: per_key(total_bits),
        }
    }
}

//! Prefix filter: an incremental approximate-membership filter whose bins are
//! 32-byte pocket dictionaries, backed by a small spare filter that receives
//! the fingerprints full bins push out.
//!
//! ```
//! use prefix_filter::{HashSeed, PrefixFilter, SpareKind};
//!
//! let mut f = PrefixFilter::new(10_000, 0.95, SpareKind::BlockedBloom, HashSeed::from_u64(1)).unwrap();
//! for key in 0..10_000u64 {
//!     f.insert(key).unwrap();
//! }
//! assert!((0..10_000u64).all(|key| f.query(key)));
//! ```

pub mod analysis;
pub mod bits;
mod codec;
pub mod error;
pub mod filter;
pub mod fingerprint;
pub mod pd;
pub mod spare;

pub use error::{AnalysisError, DecodeError, InsertError, ParamError, PdFull, SpareOverflow};
pub use filter::{
    spare_capacity_for, FilterConfig, FilterStats, InstrumentationCounters, PrefixFilter, Route,
    FORMAT_VERSION,
};
pub use fingerprint::{
    fingerprint_of, hash64, reduce, spare_key_of, FilterParams, Fingerprint, FingerprintHasher,
    HashSeed, LoadFactor, SeededHash,
};
pub use pd::{PdContents, PdEntry, PocketDictionary, QueryPath};
pub use spare::{BlockedBloomSpare, ExactSetSpare, Spare, SpareFilter, SpareKind};

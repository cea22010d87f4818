//! Key hashing, filter sizing and the `(bin, quotient, remainder)` fingerprint.
//!
//! A key is hashed twice with independent seeds. The first word picks the bin
//! through a multiply-high range reduction, so the bin count need not be a
//! power of two. The second word supplies the mini-fingerprint: the quotient
//! comes from a multiply-high of its top 32 bits by `Q`, the remainder from
//! its low `R` bits.

use std::f64::consts::PI;

use crate::error::ParamError;

pub const DEFAULT_BIN_CAPACITY: u32 = 25;
pub const DEFAULT_QUOTIENT_RANGE: u32 = 25;
pub const DEFAULT_REMAINDER_BITS: u32 = 8;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x = x.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    x ^ (x >> 33)
}

/// `floor(x * range / 2^64)`: maps a uniform 64-bit word onto `[0, range)`.
#[inline]
pub fn reduce(x: u64, range: u64) -> u64 {
    ((x as u128 * range as u128) >> 64) as u64
}

/// Seeded 64-bit hash: 128-bit multiply-shift (`(a*x + b) mod 2^128 >> 64`,
/// `a` odd) followed by a bijective finalizer so that structured key sets
/// such as consecutive integers still scatter.
#[derive(Clone, Copy, Debug)]
pub struct SeededHash {
    mul: u128,
    add: u128,
}

impl SeededHash {
    pub fn new(seed: u64) -> Self {
        let w0 = splitmix64(seed);
        let w1 = splitmix64(w0);
        let w2 = splitmix64(w1);
        let w3 = splitmix64(w2);
        SeededHash {
            mul: ((w0 as u128) << 64 | w1 as u128) | 1,
            add: (w2 as u128) << 64 | w3 as u128,
        }
    }

    #[inline]
    pub fn hash(&self, key: u64) -> u64 {
        let h = (self.mul.wrapping_mul(key as u128).wrapping_add(self.add) >> 64) as u64;
        fmix64(h)
    }
}

/// One-shot form of [`SeededHash::hash`].
pub fn hash64(key: u64, seed: u64) -> u64 {
    SeededHash::new(seed).hash(key)
}

/// The two seed words of a filter: word 0 drives bin selection, word 1 the
/// mini-fingerprint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct HashSeed(pub u64, pub u64);

impl HashSeed {
    /// Expands a single seed into two decorrelated words.
    pub fn from_u64(seed: u64) -> Self {
        let a = splitmix64(seed);
        HashSeed(a, splitmix64(a ^ 0x5851_F42D_4C95_7F2D))
    }
}

/// Maximum bin-table load factor, kept as an exact fraction so the bin count
/// `ceil(n / (alpha * k))` is computed without rounding error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LoadFactor {
    num: u32,
    den: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl LoadFactor {
    pub const ONE: LoadFactor = LoadFactor { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, ParamError> {
        if num == 0 || den == 0 || num > den {
            return Err(ParamError::LoadFactor(num as f64 / den as f64));
        }
        let g = gcd(num as u64, den as u64) as u32;
        Ok(LoadFactor {
            num: num / g,
            den: den / g,
        })
    }

    /// Rational approximation with denominator 10^6.
    pub fn from_f64(alpha: f64) -> Result<Self, ParamError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ParamError::LoadFactor(alpha));
        }
        const DEN: u32 = 1_000_000;
        let num = (alpha * DEN as f64).round() as u32;
        if num == 0 {
            return Err(ParamError::LoadFactor(alpha));
        }
        LoadFactor::new(num, DEN)
    }

    pub fn numerator(&self) -> u32 {
        self.num
    }

    pub fn denominator(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Sizing constants for one filter instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterParams {
    n: u64,
    alpha: LoadFactor,
    k: u32,
    quotients: u32,
    remainder_bits: u32,
    bins: u64,
}

impl FilterParams {
    /// Parameters with the default bin shape `k = 25, Q = 25, R = 8`.
    pub fn new(n: u64, alpha: LoadFactor) -> Result<Self, ParamError> {
        Self::with_shape(
            n,
            alpha,
            DEFAULT_BIN_CAPACITY,
            DEFAULT_QUOTIENT_RANGE,
            DEFAULT_REMAINDER_BITS,
        )
    }

    pub fn with_shape(
        n: u64,
        alpha: LoadFactor,
        k: u32,
        quotients: u32,
        remainder_bits: u32,
    ) -> Result<Self, ParamError> {
        if n == 0 {
            return Err(ParamError::ZeroCapacity);
        }
        let shape_err = ParamError::Shape {
            k,
            quotients,
            remainder_bits,
        };
        if k == 0 || quotients == 0 || remainder_bits == 0 || remainder_bits > 32 {
            return Err(shape_err);
        }
        let s = (quotients as u128) << remainder_bits;
        if k as u128 > s {
            return Err(shape_err);
        }
        // m = ceil(n * den / (num * k))
        let numer = n as u128 * alpha.den as u128;
        let denom = alpha.num as u128 * k as u128;
        let bins = numer.div_ceil(denom);
        if bins * s > 1u128 << 64 || bins > u64::MAX as u128 {
            return Err(ParamError::FingerprintRange);
        }
        Ok(FilterParams {
            n,
            alpha,
            k,
            quotients,
            remainder_bits,
            bins: bins as u64,
        })
    }

    /// Maximum dataset size `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> LoadFactor {
        self.alpha
    }

    /// Bin capacity `k`.
    pub fn bin_capacity(&self) -> u32 {
        self.k
    }

    /// Quotient range `Q`.
    pub fn quotient_range(&self) -> u32 {
        self.quotients
    }

    /// Remainder width `R` in bits.
    pub fn remainder_bits(&self) -> u32 {
        self.remainder_bits
    }

    /// Mini-fingerprint range `s = Q * 2^R`.
    pub fn mini_range(&self) -> u64 {
        (self.quotients as u64) << self.remainder_bits
    }

    /// Bin count `m`.
    pub fn bins(&self) -> u64 {
        self.bins
    }

    /// `p = 1/m`.
    pub fn bin_probability(&self) -> f64 {
        1.0 / self.bins as f64
    }

    /// `gamma = 1/sqrt(2 pi k)`.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * PI * self.k as f64).sqrt()
    }

    pub fn is_default_shape(&self) -> bool {
        self.k == DEFAULT_BIN_CAPACITY
            && self.quotients == DEFAULT_QUOTIENT_RANGE
            && self.remainder_bits == DEFAULT_REMAINDER_BITS
    }
}

/// `FP(x) = (bin(x), fp(x))`, with the mini-fingerprint split into quotient
/// and remainder. Ordering compares mini-fingerprints lexicographically after
/// the bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    pub bin: u64,
    pub quotient: u32,
    pub remainder: u32,
}

/// Precomputed hashing state for one filter.
#[derive(Clone, Copy, Debug)]
pub struct FingerprintHasher {
    bin_hash: SeededHash,
    mini_hash: SeededHash,
    bins: u64,
    quotients: u64,
    remainder_mask: u64,
}

impl FingerprintHasher {
    pub fn new(params: &FilterParams, seed: HashSeed) -> Self {
        FingerprintHasher {
            bin_hash: SeededHash::new(seed.0),
            mini_hash: SeededHash::new(seed.1),
            bins: params.bins,
            quotients: params.quotients as u64,
            remainder_mask: (1u64 << params.remainder_bits) - 1,
        }
    }

    #[inline]
    pub fn fingerprint(&self, key: u64) -> Fingerprint {
        let h1 = self.bin_hash.hash(key);
        let h2 = self.mini_hash.hash(key);
        Fingerprint {
            bin: reduce(h1, self.bins),
            quotient: (((h2 >> 32) * self.quotients) >> 32) as u32,
            remainder: (h2 & self.remainder_mask) as u32,
        }
    }
}

/// One-shot fingerprint computation; see [`FingerprintHasher`] for the hot path.
pub fn fingerprint_of(key: u64, params: &FilterParams, seed: HashSeed) -> Fingerprint {
    FingerprintHasher::new(params, seed).fingerprint(key)
}

/// Packs a fingerprint into the spare's key space: `bin*s + q*2^R + r`.
#[inline]
pub fn spare_key_of(fp: Fingerprint, params: &FilterParams) -> u64 {
    fp.bin
        .wrapping_mul(params.mini_range())
        .wrapping_add((fp.quotient as u64) << params.remainder_bits)
        .wrapping_add(fp.remainder as u64)
}

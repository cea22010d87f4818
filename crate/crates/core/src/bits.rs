//! Rank and select over a single 64-bit word.

/// Number of set bits in positions `[0, j]` of `word`.
#[inline]
pub fn rank(word: u64, j: u32) -> u32 {
    debug_assert!(j < 64);
    let mask = u64::MAX >> (63 - j);
    (word & mask).count_ones()
}

/// Position of the `j`-th set bit (1-indexed), or 64 when `word` has fewer
/// than `j` set bits.
///
/// Satisfies `rank(word, select(word, j)) == j` whenever the result is < 64.
#[inline]
pub fn select(word: u64, j: u32) -> u32 {
    debug_assert!(j >= 1);
    if j == 0 || word.count_ones() < j {
        return 64;
    }
    let mut w = word;
    // Narrow by bytes first, then clear the remaining low bits one at a time.
    let mut base = 0;
    let mut remaining = j;
    loop {
        let ones = (w & 0xFF).count_ones();
        if ones >= remaining {
            break;
        }
        remaining -= ones;
        w >>= 8;
        base += 8;
    }
    for _ in 1..remaining {
        w &= w - 1;
    }
    base + w.trailing_zeros()
}

//! The 32-byte pocket dictionary `PD(25, 8, 25)`.
//!
//! Layout (little-endian):
//!
//! ```text
//! bytes 0..7   control word (56 bits)
//!              bits  0..50  header: occ(0) zeros, 1, occ(1) zeros, 1, ... occ(24) zeros, 1,
//!                           then 1-padding up to bit 49
//!              bit   50     overflowed flag
//!              bits 51..56  quotient of the maximum element (overflowed and full only)
//! bytes 7..32  body: 25 one-byte remainders, grouped by quotient, vacant slots zero
//! ```
//!
//! With 1-padding the element count is `t = 50 - popcount(header)`. Within a
//! list remainders keep insertion order, except that an overflowed full
//! dictionary keeps its maximum element in the last body slot.

use std::fmt;

use crate::bits::select;
use crate::error::PdFull;

/// Maximum number of stored elements `k`.
pub const CAPACITY: usize = 25;
/// Number of quotient lists `Q`.
pub const QUOTIENTS: u32 = 25;
/// Remainder width `R`.
pub const REMAINDER_BITS: u32 = 8;

const HEADER_BITS: u32 = 50;
const HEADER_MASK: u64 = (1 << HEADER_BITS) - 1;
const OVERFLOW_BIT: u64 = 1 << 50;
const MAX_Q_SHIFT: u32 = 51;
const MAX_Q_MASK: u64 = 0x1F << MAX_Q_SHIFT;
const CONTROL_BYTES: usize = 7;
const BODY: usize = CONTROL_BYTES;
const LAST: usize = CAPACITY - 1;

/// A mini-fingerprint as stored in a pocket dictionary. Ordered
/// lexicographically: quotient first, then remainder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PdEntry {
    pub quotient: u8,
    pub remainder: u8,
}

impl PdEntry {
    pub fn new(quotient: u8, remainder: u8) -> Self {
        debug_assert!((quotient as u32) < QUOTIENTS);
        PdEntry {
            quotient,
            remainder,
        }
    }
}

/// Which branch of the search answered a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryPath {
    /// No body slot holds the queried remainder.
    Cutoff,
    /// Exactly one body slot matched; resolved with a single rank.
    SingleMatch,
    /// Several slots matched; list bounds located with select.
    SelectFallback,
}

/// The decoded form of a dictionary: per-quotient remainder lists in body
/// order plus the control flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdContents {
    pub lists: Vec<Vec<u8>>,
    pub overflowed: bool,
    pub max_quotient: u8,
}

/// One bin of the prefix filter.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
#[repr(C, align(32))]
pub struct PocketDictionary {
    raw: [u8; 32],
}

impl Default for PocketDictionary {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for PocketDictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PocketDictionary")
            .field("header", &format_args!("{:050b}", self.header()))
            .field("len", &self.len())
            .field("overflowed", &self.is_overflowed())
            .field("body", &&self.body()[..self.len()])
            .finish()
    }
}

#[inline]
fn bytes_eq_mask(chunk: u64, r: u8) -> u64 {
    // exact per-byte zero test on chunk ^ broadcast(r), high bit set on match
    const LO7: u64 = 0x7F7F_7F7F_7F7F_7F7F;
    let x = chunk ^ (u64::from(r) * 0x0101_0101_0101_0101);
    let y = !(((x & LO7) + LO7) | x | LO7);
    // gather the eight high bits into the low byte
    ((y >> 7).wrapping_mul(0x0102_0408_1020_4080) >> 56) & 0xFF
}

/// Body index range `[start, start + len)` of list `q`, via select.
#[inline]
fn list_bounds(header: u64, q: u32) -> (usize, usize) {
    let begin = if q == 0 { 0 } else { select(header, q) + 1 };
    let end = select(header, q + 1);
    ((begin - q) as usize, (end - begin) as usize)
}

/// Quotient of the last non-empty list and the header position of its last
/// zero.
#[inline]
fn last_list(header: u64) -> Option<(u32, u32)> {
    let zeros = !header & HEADER_MASK;
    if zeros == 0 {
        return None;
    }
    let pos = 63 - zeros.leading_zeros();
    let q = (header & ((1u64 << pos) - 1)).count_ones();
    Some((q, pos))
}

impl PocketDictionary {
    pub const fn new() -> Self {
        let mut raw = [0u8; 32];
        // 50 header ones, nothing else
        raw[0] = 0xFF;
        raw[1] = 0xFF;
        raw[2] = 0xFF;
        raw[3] = 0xFF;
        raw[4] = 0xFF;
        raw[5] = 0xFF;
        raw[6] = 0x03;
        PocketDictionary { raw }
    }

    #[inline]
    fn control(&self) -> u64 {
        let mut word = [0u8; 8];
        word[..CONTROL_BYTES].copy_from_slice(&self.raw[..CONTROL_BYTES]);
        u64::from_le_bytes(word)
    }

    #[inline]
    fn set_control(&mut self, control: u64) {
        self.raw[..CONTROL_BYTES].copy_from_slice(&control.to_le_bytes()[..CONTROL_BYTES]);
    }

    /// The 50-bit header field.
    #[inline]
    pub fn header(&self) -> u64 {
        self.control() & HEADER_MASK
    }

    #[inline]
    fn set_header(&mut self, header: u64) {
        let c = self.control() & !HEADER_MASK;
        self.set_control(c | (header & HEADER_MASK));
    }

    #[inline]
    pub fn body(&self) -> &[u8] {
        &self.raw[BODY..]
    }

    /// Number of stored elements `t`.
    #[inline]
    pub fn len(&self) -> usize {
        (HEADER_BITS - self.header().count_ones()) as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.len() == CAPACITY
    }

    #[inline]
    pub fn is_overflowed(&self) -> bool {
        self.control() & OVERFLOW_BIT != 0
    }

    /// The stored max-quotient field; meaningful only on an overflowed full
    /// dictionary.
    pub fn max_quotient_field(&self) -> u8 {
        ((self.control() & MAX_Q_MASK) >> MAX_Q_SHIFT) as u8
    }

    fn set_max_quotient_field(&mut self, q: u8) {
        let c = self.control() & !MAX_Q_MASK;
        self.set_control(c | (u64::from(q) << MAX_Q_SHIFT));
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.raw
    }

    /// Parses a serialized record, rejecting anything that violates the
    /// layout invariants.
    pub fn from_bytes(raw: [u8; 32]) -> Option<Self> {
        let pd = PocketDictionary { raw };
        pd.is_well_formed().then_some(pd)
    }

    /// Checks every layout invariant.
    pub fn is_well_formed(&self) -> bool {
        let control = self.control();
        let header = control & HEADER_MASK;
        let ones = header.count_ones();
        if ones < QUOTIENTS {
            return false;
        }
        let t = (HEADER_BITS - ones) as usize;
        let used = t as u32 + QUOTIENTS;
        // encoding ends with a separator and everything above it is padding
        if header >> (used - 1) != (1u64 << (HEADER_BITS - used + 1)) - 1 {
            return false;
        }
        if self.body()[t..].iter().any(|&b| b != 0) {
            return false;
        }
        let field = self.max_quotient_field();
        if !self.is_overflowed() || t < CAPACITY {
            return field == 0;
        }
        // overflowed and full: slot 24 must hold the maximum, field its quotient
        let Some((q, _)) = last_list(header) else {
            return false;
        };
        let (start, _) = list_bounds(header, q);
        let body = self.body();
        field as u32 == q && body[start..CAPACITY].iter().all(|&r| r <= body[LAST])
    }

    /// Bitvector of body slots in `[0, t)` equal to `r`.
    #[inline]
    fn match_mask(&self, r: u8, t: usize) -> u64 {
        let chunk = |at: usize| u64::from_le_bytes(self.raw[at..at + 8].try_into().unwrap());
        let mask = u64::from(self.raw[BODY] == r)
            | bytes_eq_mask(chunk(8), r) << 1
            | bytes_eq_mask(chunk(16), r) << 9
            | bytes_eq_mask(chunk(24), r) << 17;
        mask & ((1u64 << t) - 1)
    }

    /// Membership test.
    #[inline]
    pub fn contains(&self, e: PdEntry) -> bool {
        self.query_traced(e).0
    }

    /// Membership test that also reports which search branch decided it.
    #[inline]
    pub fn query_traced(&self, e: PdEntry) -> (bool, QueryPath) {
        let header = self.header();
        let t = (HEADER_BITS - header.count_ones()) as usize;
        let v = self.match_mask(e.remainder, t);
        if v == 0 {
            return (false, QueryPath::Cutoff);
        }
        if v & (v - 1) == 0 {
            let w = v << e.quotient;
            let hit = (header & (w - 1)).count_ones() == u32::from(e.quotient) && header & w == 0;
            return (hit, QueryPath::SingleMatch);
        }
        (self.contains_by_select(e), QueryPath::SelectFallback)
    }

    /// Reference search: locate list `q` with select and scan it.
    pub fn contains_by_select(&self, e: PdEntry) -> bool {
        let (start, len) = list_bounds(self.header(), u32::from(e.quotient));
        self.body()[start..start + len].contains(&e.remainder)
    }

    /// Appends `e` to the end of its quotient list.
    pub fn insert(&mut self, e: PdEntry) -> Result<(), PdFull> {
        let header = self.header();
        let t = (HEADER_BITS - header.count_ones()) as usize;
        if t == CAPACITY {
            return Err(PdFull);
        }
        let q = u32::from(e.quotient);
        let (start, occ) = list_bounds(header, q);
        let zero_at = start as u32 + q;
        let low = header & ((1u64 << zero_at) - 1);
        let high = (header >> zero_at) << (zero_at + 1);
        self.set_header(low | high);

        let at = start + occ;
        self.raw.copy_within(BODY + at..BODY + t, BODY + at + 1);
        self.raw[BODY + at] = e.remainder;

        if t + 1 == CAPACITY && self.is_overflowed() {
            self.place_max();
        }
        Ok(())
    }

    /// Finds the maximum of the last non-empty list: `(quotient, body index)`.
    fn find_max(&self) -> Option<(u8, usize)> {
        let header = self.header();
        let (q, _) = last_list(header)?;
        let (start, _) = list_bounds(header, q);
        let t = self.len();
        let body = self.body();
        let mut best = start;
        for i in start + 1..t {
            if body[i] >= body[best] {
                best = i;
            }
        }
        Some((q as u8, best))
    }

    /// Moves the maximum into the last slot and records its quotient.
    fn place_max(&mut self) {
        debug_assert!(self.is_full());
        if let Some((q, i)) = self.find_max() {
            self.raw.swap(BODY + i, BODY + LAST);
            self.set_max_quotient_field(q);
        }
    }

    /// The lexicographically largest stored element, or `None` when empty.
    ///
    /// Constant time on an overflowed full dictionary; otherwise computed
    /// from the header and the last list.
    #[inline]
    pub fn max_entry(&self) -> Option<PdEntry> {
        if self.is_overflowed() && self.is_full() {
            return Some(PdEntry {
                quotient: self.max_quotient_field(),
                remainder: self.raw[BODY + LAST],
            });
        }
        self.find_max().map(|(q, i)| PdEntry {
            quotient: q,
            remainder: self.body()[i],
        })
    }

    /// Sets the overflowed flag. On a full dictionary this also moves the
    /// maximum into the last slot.
    pub fn mark_overflowed(&mut self) {
        if self.is_overflowed() {
            return;
        }
        let c = self.control();
        self.set_control(c | OVERFLOW_BIT);
        if self.is_full() {
            self.place_max();
        }
    }

    /// Replaces the maximum element of a full dictionary with `e` and
    /// returns the old maximum. Leaves the dictionary marked overflowed.
    ///
    /// # Panics
    ///
    /// If the dictionary is not full or `e` is not strictly below the current
    /// maximum.
    pub fn evict_max_and_insert(&mut self, e: PdEntry) -> PdEntry {
        assert!(self.is_full(), "eviction requires a full dictionary");
        self.mark_overflowed();
        let max = self.max_entry().expect("full dictionary has a maximum");
        assert!(e < max, "evicted maximum must exceed the new entry");

        // drop slot 24: it is the tail of the last list, whose final zero is
        // the highest zero in the header
        let header = self.header();
        let (_, pos) = last_list(header).expect("full dictionary has a last list");
        let low = header & ((1u64 << pos) - 1);
        let high = (header >> (pos + 1)) << pos;
        self.set_header(low | high | (1 << (HEADER_BITS - 1)));
        self.raw[BODY + LAST] = 0;

        self.insert(e).expect("a slot was just freed");
        max
    }

    /// Stored elements in body order.
    pub fn entries(&self) -> impl Iterator<Item = PdEntry> + '_ {
        let contents = self.decode();
        let mut out = Vec::with_capacity(self.len());
        for (q, list) in contents.lists.iter().enumerate() {
            for &r in list {
                out.push(PdEntry::new(q as u8, r));
            }
        }
        out.into_iter()
    }

    pub fn decode(&self) -> PdContents {
        let header = self.header();
        let body = self.body();
        let lists = (0..QUOTIENTS)
            .map(|q| {
                let (start, len) = list_bounds(header, q);
                body[start..start + len].to_vec()
            })
            .collect();
        PdContents {
            lists,
            overflowed: self.is_overflowed(),
            max_quotient: self.max_quotient_field(),
        }
    }

    /// Inverse of [`decode`](Self::decode). Returns `None` if the contents do
    /// not describe a well-formed dictionary.
    pub fn encode(contents: &PdContents) -> Option<Self> {
        if contents.lists.len() != QUOTIENTS as usize {
            return None;
        }
        let t: usize = contents.lists.iter().map(Vec::len).sum();
        if t > CAPACITY {
            return None;
        }
        let mut header = 0u64;
        let mut pos = 0;
        let mut raw = [0u8; 32];
        let mut at = BODY;
        for list in &contents.lists {
            pos += list.len() as u32;
            header |= 1 << pos;
            pos += 1;
            raw[at..at + list.len()].copy_from_slice(list);
            at += list.len();
        }
        header |= HEADER_MASK & !((1u64 << pos) - 1);
        let mut control = header;
        if contents.overflowed {
            control |= OVERFLOW_BIT;
        }
        control |= u64::from(contents.max_quotient) << MAX_Q_SHIFT;
        if control >> 56 != 0 {
            return None;
        }
        let mut pd = PocketDictionary { raw };
        pd.set_control(control);
        pd.is_well_formed().then_some(pd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(q: u8, r: u8) -> PdEntry {
        PdEntry::new(q, r)
    }

    fn example_set() -> Vec<PdEntry> {
        vec![e(1, 13), e(2, 15), e(3, 3), e(5, 0), e(5, 5), e(5, 15), e(7, 6)]
    }

    /// Parses a header written most-significant-symbol-last as a bit string
    /// in reading order (bit 0 first).
    fn bits_in_order(s: &str) -> u64 {
        s.chars()
            .filter(|c| *c == '0' || *c == '1')
            .enumerate()
            .fold(0, |acc, (i, c)| acc | (u64::from(c == '1') << i))
    }

    #[test]
    fn empty_dictionary() {
        let pd = PocketDictionary::new();
        assert_eq!(pd.len(), 0);
        assert_eq!(pd.header(), HEADER_MASK);
        assert!(!pd.is_overflowed());
        assert!(pd.is_well_formed());
        assert_eq!(pd.max_entry(), None);
        for q in 0..25 {
            for r in [0u8, 1, 255] {
                assert_eq!(pd.query_traced(e(q, r)), (false, QueryPath::Cutoff));
            }
        }
    }

    #[test]
    fn first_insert() {
        let mut pd = PocketDictionary::new();
        pd.insert(e(4, 9)).unwrap();
        assert_eq!(pd.len(), 1);
        assert!(pd.contains(e(4, 9)));
        assert!(!pd.contains(e(4, 8)));
        assert!(!pd.contains(e(3, 9)));
        assert!(pd.is_well_formed());
    }

    #[test]
    fn example_set_encoding_is_order_independent() {
        // 1∘01∘01∘01∘1∘0001∘1∘01 for lists 0..8, then lists 8..25 empty
        let prefix = bits_in_order("1 01 01 01 1 0001 1 01");
        let prefix_len = 15;
        let set = example_set();
        let mut orders = vec![set.clone()];
        let mut rev = set.clone();
        rev.reverse();
        orders.push(rev);
        orders.push(vec![set[4], set[0], set[6], set[2], set[5], set[1], set[3]]);
        for order in orders {
            let mut pd = PocketDictionary::new();
            for x in &order {
                pd.insert(*x).unwrap();
            }
            let header = pd.header();
            assert_eq!(header & ((1 << prefix_len) - 1), prefix);
            // remaining 17 separators and 18 padding ones are all set
            assert_eq!(header >> prefix_len, (1 << (50 - prefix_len)) - 1);
            assert_eq!(pd.len(), 7);
            let mut lists = pd.decode().lists;
            lists.iter_mut().for_each(|l| l.sort());
            let body: Vec<u8> = lists.concat();
            assert_eq!(body, vec![13, 15, 3, 0, 5, 15, 6]);
        }
        // sorted insertion reproduces the body byte for byte
        let mut pd = PocketDictionary::new();
        for x in example_set() {
            pd.insert(x).unwrap();
        }
        assert_eq!(&pd.body()[..7], &[13, 15, 3, 0, 5, 15, 6]);
        assert!(pd.body()[7..].iter().all(|&b| b == 0));
    }

    #[test]
    fn example_set_queries() {
        let mut pd = PocketDictionary::new();
        for x in example_set() {
            pd.insert(x).unwrap();
        }
        assert!(pd.contains(e(5, 5)));
        assert!(!pd.contains(e(5, 6)));
        assert!(!pd.contains(e(4, 5)));
        for x in example_set() {
            assert!(pd.contains(x));
        }
        // 15 appears twice: the select fallback handles it
        assert_eq!(pd.query_traced(e(5, 15)), (true, QueryPath::SelectFallback));
        assert_eq!(pd.query_traced(e(2, 15)), (true, QueryPath::SelectFallback));
        assert_eq!(pd.query_traced(e(7, 6)), (true, QueryPath::SingleMatch));
        assert_eq!(pd.query_traced(e(6, 6)), (false, QueryPath::SingleMatch));
        assert_eq!(pd.max_entry(), Some(e(7, 6)));
    }

    fn full_example() -> PocketDictionary {
        // the example set padded with 18 small entries in list 0
        let mut pd = PocketDictionary::new();
        for x in example_set() {
            pd.insert(x).unwrap();
        }
        for r in 0..18 {
            pd.insert(e(0, r)).unwrap();
        }
        pd
    }

    #[test]
    fn full_dictionary_rejects_insert_unchanged() {
        let mut pd = full_example();
        assert!(pd.is_full());
        let before = pd;
        assert_eq!(pd.insert(e(3, 3)), Err(PdFull));
        assert_eq!(pd.as_bytes(), before.as_bytes());
    }

    #[test]
    fn max_of_full_dictionary() {
        let mut pd = full_example();
        assert_eq!(pd.max_entry(), Some(e(7, 6)));
        pd.mark_overflowed();
        assert!(pd.is_overflowed());
        assert_eq!(pd.max_quotient_field(), 7);
        assert_eq!(pd.body()[24], 6);
        assert_eq!(pd.max_entry(), Some(e(7, 6)));
        assert!(pd.is_well_formed());
    }

    #[test]
    fn constant_multiset() {
        let mut pd = PocketDictionary::new();
        for _ in 0..25 {
            pd.insert(e(3, 9)).unwrap();
        }
        assert_eq!(pd.max_entry(), Some(e(3, 9)));
        assert_eq!(pd.query_traced(e(3, 9)), (true, QueryPath::SelectFallback));
        assert!(!pd.contains(e(2, 9)));
        assert!(!pd.contains(e(4, 9)));
        let evicted = pd.evict_max_and_insert(e(3, 8));
        assert_eq!(evicted, e(3, 9));
        assert_eq!(pd.body()[24], 9);
        assert_eq!(pd.max_quotient_field(), 3);
        assert!(pd.contains(e(3, 8)));
        assert!(pd.is_well_formed());
    }

    #[test]
    fn evict_from_example() {
        let mut pd = full_example();
        let evicted = pd.evict_max_and_insert(e(0, 1));
        assert_eq!(evicted, e(7, 6));
        assert!(pd.is_overflowed());
        // second largest of the original multiset
        assert_eq!(pd.max_entry(), Some(e(5, 15)));
        assert!(!pd.contains(e(7, 6)));
        assert_eq!(pd.len(), 25);
        assert!(pd.is_well_formed());
    }

    #[test]
    #[should_panic]
    fn evict_requires_smaller_entry() {
        let mut pd = full_example();
        pd.evict_max_and_insert(e(7, 6));
    }

    #[test]
    fn mark_on_empty_and_round_trip() {
        let mut pd = PocketDictionary::new();
        assert!(!pd.is_overflowed());
        pd.mark_overflowed();
        assert!(pd.is_overflowed());
        let copy = PocketDictionary::from_bytes(*pd.as_bytes()).unwrap();
        assert!(copy.is_overflowed());
        assert_eq!(copy, pd);
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut pd = full_example();
        pd.mark_overflowed();
        let back = PocketDictionary::encode(&pd.decode()).unwrap();
        assert_eq!(back, pd);
    }

    #[test]
    fn malformed_records_rejected() {
        let mut raw = *PocketDictionary::new().as_bytes();
        raw[BODY + 3] = 1; // vacant slot not zero
        assert!(PocketDictionary::from_bytes(raw).is_none());
        let mut raw = *PocketDictionary::new().as_bytes();
        raw[6] = 0x01; // header bit 49 cleared: padding broken
        assert!(PocketDictionary::from_bytes(raw).is_none());
        let mut raw = *PocketDictionary::new().as_bytes();
        raw[6] |= 0x08; // max-quotient field set on an empty dictionary
        assert!(PocketDictionary::from_bytes(raw).is_none());
    }

    #[test]
    fn byte_mask_matches_scalar() {
        let mut x = 0x1234_5678_9ABC_DEF1u64;
        for _ in 0..10_000 {
            x = x.rotate_left(7).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x55;
            let r = (x >> 40) as u8;
            let chunk = x & 0xFF00_FFFF_00FF_FFFF | (u64::from(r) << 24);
            let expect = (0..8).fold(0, |m, i| m | (u64::from((chunk >> (8 * i)) as u8 == r) << i));
            assert_eq!(bytes_eq_mask(chunk, r), expect);
        }
    }
}

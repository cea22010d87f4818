//! Pocket dictionary semantics as a sorted multiset.

/// `(quotient, remainder)`, compared lexicographically.
pub type Entry = (u32, u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaivePd {
    entries: Vec<Entry>,
    capacity: usize,
    quotients: u32,
    remainder_bits: u32,
    overflowed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaivePdOp {
    Insert(Entry),
    Query(Entry),
    Max,
    EvictMaxAndInsert(Entry),
    MarkOverflowed,
    IsOverflowed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaivePdResult {
    Inserted,
    Full,
    Found(bool),
    Max(Option<Entry>),
    Evicted(Entry),
    Flag(bool),
}

impl NaivePd {
    pub fn new(quotients: u32, remainder_bits: u32, capacity: usize) -> Self {
        NaivePd {
            entries: Vec::with_capacity(capacity),
            capacity,
            quotients,
            remainder_bits,
            overflowed: false,
        }
    }

    fn check(&self, e: Entry) {
        assert!(e.0 < self.quotients, "quotient {} out of range", e.0);
        assert!(e.1 < 1 << self.remainder_bits, "remainder {} out of range", e.1);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn is_overflowed(&self) -> bool {
        self.overflowed
    }

    /// Sorted contents.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn contains(&self, e: Entry) -> bool {
        self.entries.binary_search(&e).is_ok()
    }

    /// Returns false when full.
    pub fn insert(&mut self, e: Entry) -> bool {
        self.check(e);
        if self.is_full() {
            return false;
        }
        let at = self.entries.partition_point(|x| *x <= e);
        self.entries.insert(at, e);
        true
    }

    pub fn max(&self) -> Option<Entry> {
        self.entries.last().copied()
    }

    /// Panics unless full and `e` is strictly below the maximum.
    pub fn evict_max_and_insert(&mut self, e: Entry) -> Entry {
        assert!(self.is_full());
        let max = self.entries.pop().unwrap();
        assert!(e < max);
        self.overflowed = true;
        self.insert(e);
        max
    }

    pub fn mark_overflowed(&mut self) {
        self.overflowed = true;
    }

    pub fn apply(&mut self, op: NaivePdOp) -> NaivePdResult {
        match op {
            NaivePdOp::Insert(e) => {
                if self.insert(e) {
                    NaivePdResult::Inserted
                } else {
                    NaivePdResult::Full
                }
            }
            NaivePdOp::Query(e) => NaivePdResult::Found(self.contains(e)),
            NaivePdOp::Max => NaivePdResult::Max(self.max()),
            NaivePdOp::EvictMaxAndInsert(e) => NaivePdResult::Evicted(self.evict_max_and_insert(e)),
            NaivePdOp::MarkOverflowed => {
                self.mark_overflowed();
                NaivePdResult::Flag(true)
            }
            NaivePdOp::IsOverflowed => NaivePdResult::Flag(self.overflowed),
        }
    }
}

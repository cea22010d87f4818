//! Unbounded model of the prefix filter: every bin remembers all
//! mini-fingerprints routed to it, and the first `k` in sorted order are the
//! ones the real bin must hold.

/// `(quotient, remainder)`.
pub type Mini = (u32, u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShadowRoute {
    BinOnly,
    Spare,
}

#[derive(Clone, Debug)]
pub struct ShadowPrefixFilter {
    k: usize,
    bins: Vec<Vec<Mini>>,
    forwarded: Vec<(u64, Mini)>,
}

impl ShadowPrefixFilter {
    pub fn new(bins: usize, k: usize) -> Self {
        ShadowPrefixFilter {
            k,
            bins: vec![Vec::new(); bins],
            forwarded: Vec::new(),
        }
    }

    /// Records `fp` in `bin` and returns the mini-fingerprint the real filter
    /// must send to the spare, if any.
    pub fn insert(&mut self, bin: u64, fp: Mini) -> Option<Mini> {
        let list = &mut self.bins[bin as usize];
        let out = (list.len() >= self.k).then(|| fp.max(list[self.k - 1]));
        let at = list.partition_point(|x| *x <= fp);
        list.insert(at, fp);
        if let Some(m) = out {
            self.forwarded.push((bin, m));
        }
        out
    }

    /// The `min(k, |D_i|)` smallest mini-fingerprints of `bin`.
    pub fn stored_prefix(&self, bin: u64) -> &[Mini] {
        let list = &self.bins[bin as usize];
        &list[..list.len().min(self.k)]
    }

    pub fn overflowed(&self, bin: u64) -> bool {
        self.bins[bin as usize].len() > self.k
    }

    /// Where a query for `fp` in `bin` must be answered.
    pub fn route(&self, bin: u64, fp: Mini) -> ShadowRoute {
        let list = &self.bins[bin as usize];
        if list.len() > self.k && fp > list[self.k - 1] {
            ShadowRoute::Spare
        } else {
            ShadowRoute::BinOnly
        }
    }

    /// Everything sent to the spare, sorted.
    pub fn forwarded(&self) -> Vec<(u64, Mini)> {
        let mut v = self.forwarded.clone();
        v.sort_unstable();
        v
    }

    pub fn forwarded_count(&self) -> usize {
        self.forwarded.len()
    }
}

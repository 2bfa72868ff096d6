//! Fixed-universe bit sets used for both hypothesis sets and source sets.
//!
//! Universes of up to 64 elements live inline in a single word; larger ones
//! spill to the heap.

use smallvec::SmallVec;
use std::fmt;

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    len: usize,
    words: SmallVec<[u64; 1]>,
}

/// A subset of the information sources `{0..n-1}`.
pub type SourceSet = BitSet;

fn word_count(len: usize) -> usize {
    len.div_ceil(WORD).max(1)
}

impl BitSet {
    pub fn empty(len: usize) -> Self {
        BitSet {
            len,
            words: SmallVec::from_elem(0, word_count(len)),
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    /// Builds a set from a bit mask; bit `i` set means element `i` is present.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= WORD, "from_mask needs a universe of at most 64");
        let mut s = Self::empty(len);
        let keep = if len == WORD {
            u64::MAX
        } else {
            (1u64 << len) - 1
        };
        s.words[0] = mask & keep;
        s
    }

    /// Panics when an index is outside the universe.
    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Universe size.
    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} outside universe of {}", self.len);
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / WORD] &= !(1 << (i % WORD));
        }
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= *b;
        }
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn union_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= *b;
        }
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    /// Low 64 bits as a mask. Only meaningful for universes of at most 64.
    pub fn mask(&self) -> u64 {
        self.words[0]
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let mut a = BitSet::from_indices(5, [0, 2, 4]);
        let b = BitSet::from_indices(5, [2, 3, 4]);
        assert_eq!(a.count(), 3);
        assert!(a.contains(2) && !a.contains(1));
        assert_eq!(a.intersection(&b).to_vec(), vec![2, 4]);
        a.remove(0);
        assert!(a.is_subset(&b));
        assert!(BitSet::empty(5).is_empty());
        assert_eq!(BitSet::full(3).to_vec(), vec![0, 1, 2]);
    }

    #[test]
    fn wide_universe() {
        let mut s = BitSet::empty(130);
        s.insert(0);
        s.insert(64);
        s.insert(129);
        assert_eq!(s.to_vec(), vec![0, 64, 129]);
        assert_eq!(BitSet::full(130).count(), 130);
        let t = BitSet::from_indices(130, [64, 100]);
        assert_eq!(s.intersection(&t).to_vec(), vec![64]);
    }

    #[test]
    fn mask_roundtrip() {
        let s = BitSet::from_mask(6, 0b101101);
        assert_eq!(s.to_vec(), vec![0, 2, 3, 5]);
        assert_eq!(s.mask(), 0b101101);
        // bits beyond the universe are dropped
        assert_eq!(BitSet::from_mask(2, 0b111).to_vec(), vec![0, 1]);
    }
}

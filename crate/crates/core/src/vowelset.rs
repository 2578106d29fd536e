//! Compact subsets of the vowel universe.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest universe a [`VowelSet`] can index.
pub const MAX_UNIVERSE: usize = 128;

/// A subset of `{0, .., N-1}` stored as a bitmask.
///
/// Iteration order is ascending index, which is also lexicographic symbol
/// order because vowel tables keep their symbols sorted.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VowelSet(u128);

impl VowelSet {
    pub const EMPTY: VowelSet = VowelSet(0);

    pub fn from_bits(bits: u128) -> Self {
        VowelSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    /// The full universe `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_UNIVERSE);
        if n == MAX_UNIVERSE {
            VowelSet(u128::MAX)
        } else {
            VowelSet((1u128 << n) - 1)
        }
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_UNIVERSE && self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }

    #[must_use]
    pub fn with(mut self, i: usize) -> Self {
        self.insert(i);
        self
    }

    #[must_use]
    pub fn toggled(self, i: usize) -> Self {
        VowelSet(self.0 ^ (1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[must_use]
    pub fn union(self, other: VowelSet) -> Self {
        VowelSet(self.0 | other.0)
    }

    #[must_use]
    pub fn intersection(self, other: VowelSet) -> Self {
        VowelSet(self.0 & other.0)
    }

    #[must_use]
    pub fn difference(self, other: VowelSet) -> Self {
        VowelSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: VowelSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest member index plus one, or 0 for the empty set.
    pub fn span(self) -> usize {
        128 - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> Iter {
        Iter(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for VowelSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = VowelSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl IntoIterator for VowelSet {
    type Item = usize;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

/// Ascending iterator over set members.
#[derive(Clone)]
pub struct Iter(u128);

impl Iterator for Iter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

impl fmt::Debug for VowelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for VowelSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for VowelSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<usize> = Vec::deserialize(d)?;
        if let Some(&bad) = v.iter().find(|&&i| i >= MAX_UNIVERSE) {
            return Err(serde::de::Error::custom(format!("vowel index {bad} out of range")));
        }
        Ok(v.into_iter().collect())
    }
}

/// All size-`k` subsets of `{0, .., n-1}` in lexicographic order.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = VowelSet;

    fn next(&mut self) -> Option<VowelSet> {
        if self.done {
            return None;
        }
        let out: VowelSet = self.idx.iter().copied().collect();
        let k = self.idx.len();
        // advance to the next combination
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if self.idx[pos] < self.n - k + pos {
                self.idx[pos] += 1;
                for j in pos + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(out);
            }
        }
        self.done = true;
        Some(out)
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

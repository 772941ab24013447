use alloc::vec::Vec;

/// Half-open range `start..end` of leaf indices.
///
/// Every ball and every cube in the supported spaces is such a range, because
/// leaves are stored in lexicographic path order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeafSpan {
    pub start: usize,
    pub end: usize,
}

impl LeafSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub const fn empty() -> Self {
        Self { start: 0, end: 0 }
    }

    pub const fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub const fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub const fn contains(&self, leaf: usize) -> bool {
        self.start <= leaf && leaf < self.end
    }

    pub fn contains_span(&self, other: &LeafSpan) -> bool {
        other.is_empty() || (self.start <= other.start && other.end <= self.end)
    }

    pub fn intersects(&self, other: &LeafSpan) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }

    pub fn iter(&self) -> core::ops::Range<usize> {
        self.start..self.end
    }
}

/// A subset of leaves stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeafSet {
    mask: Vec<bool>,
}

impl LeafSet {
    pub fn empty(leaf_count: usize) -> Self {
        Self { mask: alloc::vec![false; leaf_count] }
    }

    pub fn full(leaf_count: usize) -> Self {
        Self { mask: alloc::vec![true; leaf_count] }
    }

    pub fn from_span(leaf_count: usize, span: LeafSpan) -> Self {
        let mut s = Self::empty(leaf_count);
        s.insert_span(span);
        s
    }

    pub fn from_leaves(leaf_count: usize, leaves: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(leaf_count);
        for l in leaves {
            s.insert(l);
        }
        s
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    /// Size of the ambient leaf set.
    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn insert(&mut self, leaf: usize) {
        self.mask[leaf] = true;
    }

    pub fn remove(&mut self, leaf: usize) {
        self.mask[leaf] = false;
    }

    pub fn insert_span(&mut self, span: LeafSpan) {
        for m in &mut self.mask[span.start..span.end] {
            *m = true;
        }
    }

    pub fn contains(&self, leaf: usize) -> bool {
        self.mask.get(leaf).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn union_with(&mut self, other: &LeafSet) {
        for (a, b) in self.mask.iter_mut().zip(&other.mask) {
            *a |= *b;
        }
    }

    pub fn intersect_with(&mut self, other: &LeafSet) {
        for (a, b) in self.mask.iter_mut().zip(&other.mask) {
            *a &= *b;
        }
    }

    pub fn is_subset(&self, other: &LeafSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    pub fn is_disjoint(&self, other: &LeafSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !(*a && *b))
    }

    /// Sum of `weights` over members.
    pub fn mass(&self, weights: &[f64]) -> f64 {
        self.iter().map(|i| weights[i]).sum()
    }
}

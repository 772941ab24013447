use alloc::vec::Vec;

use super::leafset::LeafSpan;
use crate::error::{Error, Result};
use crate::num;

/// Largest supported leaf count.
pub const MAX_LEAVES: usize = 1 << 22;

/// How leaf masses are assigned when a tree is built.
#[derive(Debug, Clone, PartialEq)]
pub enum MassProfile {
    /// Every leaf carries `b^-N`.
    Uniform,
    /// Explicit per-leaf weights in leaf order.
    Custom(Vec<f64>),
}

/// A leaf of a [`TreeSpace`], identified by its index in lexicographic path order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryPoint(pub usize);

impl BoundaryPoint {
    pub const fn leaf(self) -> usize {
        self.0
    }
}

/// Depth-`N` truncation of the boundary of a `b`-ary tree with the ultrametric
/// `rho(x, y) = delta^lca(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpace {
    branching: usize,
    depth: usize,
    delta: f64,
    weights: Vec<f64>,
    prefix: Vec<f64>,
    delta_pow: Vec<f64>,
    level_size: Vec<usize>,
}

impl TreeSpace {
    pub fn new(branching: usize, depth: usize, delta: f64, profile: MassProfile) -> Result<Self> {
        if branching < 2 {
            return Err(Error::Branching(branching));
        }
        if depth == 0 {
            return Err(Error::Depth);
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Delta(delta));
        }
        let count = (branching as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
        if count > MAX_LEAVES as u128 {
            return Err(Error::TooLarge(count));
        }
        let n = count as usize;
        let weights = match profile {
            MassProfile::Uniform => alloc::vec![1.0 / n as f64; n],
            MassProfile::Custom(w) => {
                if w.len() != n {
                    return Err(Error::WeightCount { expected: n, got: w.len() });
                }
                if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::Weights);
                }
                w
            }
        };
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for w in &weights {
            acc += w;
            prefix.push(acc);
        }
        let delta_pow = (0..=depth).map(|l| num::powi(delta, l as i32)).collect();
        let mut level_size = alloc::vec![1usize; depth + 1];
        for l in (0..depth).rev() {
            level_size[l] = level_size[l + 1] * branching;
        }
        Ok(Self { branching, depth, delta, weights, prefix, delta_pow, level_size })
    }

    pub fn uniform(branching: usize, depth: usize, delta: f64) -> Result<Self> {
        Self::new(branching, depth, delta, MassProfile::Uniform)
    }

    /// Same shape with new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.branching, self.depth, self.delta, MassProfile::Custom(weights))
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn leaf_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, leaf: usize) -> f64 {
        self.weights[leaf]
    }

    pub fn total_mass(&self) -> f64 {
        self.prefix[self.weights.len()]
    }

    /// `delta^level` for `level` in `0..=N`.
    pub fn delta_pow(&self, level: usize) -> f64 {
        self.delta_pow[level]
    }

    /// Number of leaves below one node at `level`.
    pub fn level_size(&self, level: usize) -> usize {
        self.level_size[level]
    }

    /// `log b / log(1/delta)`, the dimension making the uniform measure exactly regular.
    pub fn canonical_dimension(&self) -> f64 {
        num::ln(self.branching as f64) / num::ln(1.0 / self.delta)
    }

    pub fn point(&self, leaf: usize) -> Result<BoundaryPoint> {
        if leaf < self.leaf_count() {
            Ok(BoundaryPoint(leaf))
        } else {
            Err(Error::Leaf(leaf))
        }
    }

    /// Path digits, most significant first.
    pub fn digits(&self, x: BoundaryPoint) -> Vec<usize> {
        (1..=self.depth)
            .map(|l| (x.0 / self.level_size[l]) % self.branching)
            .collect()
    }

    pub fn from_digits(&self, digits: &[usize]) -> Result<BoundaryPoint> {
        if digits.len() != self.depth || digits.iter().any(|&d| d >= self.branching) {
            return Err(Error::Invalid("digit path does not match the tree shape"));
        }
        Ok(BoundaryPoint(digits.iter().fold(0, |acc, &d| acc * self.branching + d)))
    }

    /// Number of leading digits shared by the two paths.
    pub fn lca_level(&self, x: BoundaryPoint, y: BoundaryPoint) -> usize {
        if x == y {
            return self.depth;
        }
        let mut l = 0;
        while l < self.depth && x.0 / self.level_size[l + 1] == y.0 / self.level_size[l + 1] {
            l += 1;
        }
        l
    }

    pub fn distance(&self, x: BoundaryPoint, y: BoundaryPoint) -> f64 {
        if x == y {
            0.0
        } else {
            self.delta_pow[self.lca_level(x, y)]
        }
    }

    /// Leaves sharing the first `level` digits with `x`.
    pub fn subtree(&self, x: BoundaryPoint, level: usize) -> LeafSpan {
        let size = self.level_size[level];
        let start = (x.0 / size) * size;
        LeafSpan::new(start, start + size)
    }

    /// Shallowest level whose subtree equals the open ball `B(x, r)`, or `None` for an empty ball.
    pub fn ball_level(&self, r: f64) -> Option<usize> {
        if r <= 0.0 {
            return None;
        }
        Some((0..self.depth).find(|&l| self.delta_pow[l] < r).unwrap_or(self.depth))
    }

    /// Open ball `{y : rho(x, y) < r}`.
    pub fn ball(&self, x: BoundaryPoint, r: f64) -> LeafSpan {
        match self.ball_level(r) {
            None => LeafSpan::empty(),
            Some(l) => self.subtree(x, l),
        }
    }

    pub fn mass(&self, span: LeafSpan) -> f64 {
        if span.is_empty() {
            0.0
        } else {
            self.prefix[span.end] - self.prefix[span.start]
        }
    }

    /// Prefix sums of the weights, length `leaf_count + 1`.
    pub fn prefix_mass(&self) -> &[f64] {
        &self.prefix
    }
}

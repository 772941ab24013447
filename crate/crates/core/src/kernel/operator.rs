use alloc::vec::Vec;

use super::radial::RadialKernel;
use crate::error::{Error, Result};
use crate::num;
use crate::space::{ModelSpace, SpaceKind, TreeSpace};

/// A symmetric nonnegative kernel acting on leaf masses.
pub trait KernelOperator {
    fn len(&self) -> usize;

    /// `out[x] = sum_y K(x, y) * masses[y]`.
    fn apply(&self, masses: &[f64], out: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Potential of the density `f` with respect to `weights`.
    fn convolve(&self, f: &[f64], weights: &[f64]) -> Vec<f64> {
        let masses: Vec<f64> = f.iter().zip(weights).map(|(a, w)| a * w).collect();
        let mut out = alloc::vec![0.0; self.len()];
        self.apply(&masses, &mut out);
        out
    }

    /// `sup_x int K(x, y) dm(y)`.
    fn norm_1(&self, weights: &[f64]) -> f64 {
        let mut out = alloc::vec![0.0; self.len()];
        self.apply(weights, &mut out);
        out.into_iter().fold(0.0, f64::max)
    }
}

/// Radial kernel on a tree boundary evaluated level by level.
///
/// A node at level `l` passes to each child the accumulated potential plus
/// `K_l` times the mass of the child's siblings, so every leaf receives
/// `sum_l K_l * (mass sharing exactly l digits)` in `O(n b)` operations.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeOperator {
    branching: usize,
    depth: usize,
    levels: Vec<f64>,
}

impl TreeOperator {
    pub fn new(tree: &TreeSpace, kernel: &RadialKernel) -> Result<Self> {
        Ok(Self::from_levels(tree, kernel.level_values(tree)?))
    }

    /// `levels[l]` is the kernel on pairs sharing exactly `l` digits; `levels[N]` is the atom term.
    pub fn from_levels(tree: &TreeSpace, levels: Vec<f64>) -> Self {
        assert_eq!(levels.len(), tree.depth() + 1);
        Self { branching: tree.branching(), depth: tree.depth(), levels }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

impl KernelOperator for TreeOperator {
    fn len(&self) -> usize {
        self.branching.pow(self.depth as u32)
    }

    fn apply(&self, masses: &[f64], out: &mut [f64]) {
        let b = self.branching;
        let n = masses.len();
        // sums[l] holds subtree masses of the b^l nodes at level l.
        let mut sums: Vec<Vec<f64>> = Vec::with_capacity(self.depth + 1);
        sums.push(masses.to_vec());
        for _ in 0..self.depth {
            let prev = sums.last().unwrap();
            let next: Vec<f64> = prev.chunks(b).map(|c| c.iter().sum()).collect();
            sums.push(next);
        }
        sums.reverse();
        let mut acc = alloc::vec![0.0];
        let mut suffix = alloc::vec![0.0; b + 1];
        for l in 0..self.depth {
            let k = self.levels[l];
            let child = &sums[l + 1];
            let mut next = alloc::vec![0.0; child.len()];
            for (v, a) in acc.iter().enumerate() {
                let kids = &child[v * b..(v + 1) * b];
                suffix[b] = 0.0;
                for c in (0..b).rev() {
                    suffix[c] = suffix[c + 1] + kids[c];
                }
                let mut prefix = 0.0;
                for c in 0..b {
                    next[v * b + c] = a + k * (prefix + suffix[c + 1]);
                    prefix += kids[c];
                }
            }
            acc = next;
        }
        let diag = self.levels[self.depth];
        for i in 0..n {
            out[i] = acc[i] + diag * masses[i];
        }
    }
}

/// Explicit symmetric kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    matrix: Vec<f64>,
}

impl DenseOperator {
    pub fn from_fn(n: usize, mut k: impl FnMut(usize, usize) -> f64) -> Self {
        let mut matrix = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = k(i, j);
                matrix[i * n + j] = v;
                matrix[j * n + i] = v;
            }
        }
        Self { n, matrix }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }
}

impl KernelOperator for DenseOperator {
    fn len(&self) -> usize {
        self.n
    }

    fn apply(&self, masses: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.matrix[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(masses).map(|(a, b)| a * b).sum();
        }
    }
}

/// Kernel operator matched to the geometry of a [`ModelSpace`].
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Tree(TreeOperator),
    Dense(DenseOperator),
}

impl Operator {
    /// Riesz kernel `c * d(x, y)^(-Q s)` in the dimension of `space`.
    ///
    /// Each leaf carries the self-interaction of its cell, `h^(-Q s) I` with `h`
    /// the cell scale and `I` the normalized self-energy of the model.
    pub fn riesz(space: &ModelSpace, s: f64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::KernelValues);
        }
        let a = space.dimension() * s;
        let diag = scale * num::pow(space.cell_scale(), -a) * space.self_energy(a)?;
        let tree = space.tree();
        Ok(match space.kind() {
            SpaceKind::TreeBoundary => {
                let mut levels: Vec<f64> =
                    (0..tree.depth()).map(|l| scale * num::pow(tree.delta_pow(l), -a)).collect();
                levels.push(diag);
                Operator::Tree(TreeOperator::from_levels(tree, levels))
            }
            _ => Operator::Dense(DenseOperator::from_fn(space.leaf_count(), |i, j| {
                if i == j {
                    diag
                } else {
                    scale * num::pow(space.distance(i, j), -a)
                }
            })),
        })
    }

    pub fn radial(tree: &TreeSpace, kernel: &RadialKernel) -> Result<Self> {
        Ok(Operator::Tree(TreeOperator::new(tree, kernel)?))
    }

    /// Kernel value between two leaves, including the atom term on the diagonal.
    pub fn entry(&self, tree: &TreeSpace, x: usize, y: usize) -> f64 {
        match self {
            Operator::Tree(t) => {
                let l = tree.lca_level(crate::space::BoundaryPoint(x), crate::space::BoundaryPoint(y));
                t.levels[l]
            }
            Operator::Dense(d) => d.entry(x, y),
        }
    }
}

impl KernelOperator for Operator {
    fn len(&self) -> usize {
        match self {
            Operator::Tree(t) => t.len(),
            Operator::Dense(d) => d.len(),
        }
    }

    fn apply(&self, masses: &[f64], out: &mut [f64]) {
        match self {
            Operator::Tree(t) => t.apply(masses, out),
            Operator::Dense(d) => d.apply(masses, out),
        }
    }
}

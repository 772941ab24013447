use alloc::vec::Vec;

use super::operator::{KernelOperator, TreeOperator};
use crate::error::{Error, Result};
use crate::num;
use crate::space::{tree_self_energy, BoundaryPoint, ModelSpace, TreeSpace};

/// Integrability exponent `1 < p < inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Exponent(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `p' = p / (p - 1)`.
    pub fn conjugate(self) -> f64 {
        self.0 / (self.0 - 1.0)
    }
}

/// Rejects `s` outside `[1/p', 1)`.
pub fn check_riesz_range(s: f64, p: Exponent) -> Result<()> {
    let lower = 1.0 / p.conjugate();
    if s.is_finite() && s >= lower - 1e-15 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::RieszRange { s, lower })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Value per shared-digit level `0..=N`; the last entry is the diagonal.
    Levels(Vec<f64>),
    /// `rho^(-Q s)` off the diagonal.
    Riesz { dimension: f64, s: f64 },
}

/// A kernel depending only on the ultrametric distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialKernel {
    kind: KernelKind,
    scale: f64,
}

impl RadialKernel {
    pub fn levels(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::KernelValues);
        }
        Ok(Self { kind: KernelKind::Levels(values), scale: 1.0 })
    }

    pub fn constant(depth: usize, value: f64) -> Result<Self> {
        Self::levels(alloc::vec![value; depth + 1])
    }

    pub fn riesz(dimension: f64, s: f64, p: Exponent) -> Result<Self> {
        if !(dimension.is_finite() && dimension > 0.0) {
            return Err(Error::Dimension(dimension));
        }
        check_riesz_range(s, p)?;
        Ok(Self { kind: KernelKind::Riesz { dimension, s }, scale: 1.0 })
    }

    /// The kernel `c K`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { kind: self.kind.clone(), scale: self.scale * c }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Kernel values by shared-digit level on `tree`, length `N + 1`.
    ///
    /// For the Riesz kind the last entry is the exact self-interaction of a
    /// uniformly charged cylinder, `delta^(-N Q s) (1 - 1/b) / (1 - delta^(-Q s) / b)`.
    pub fn level_values(&self, tree: &TreeSpace) -> Result<Vec<f64>> {
        let n = tree.depth();
        match &self.kind {
            KernelKind::Levels(v) => {
                if v.len() != n + 1 {
                    return Err(Error::LevelCount { expected: n + 1, got: v.len() });
                }
                Ok(v.iter().map(|x| x * self.scale).collect())
            }
            KernelKind::Riesz { dimension, s } => {
                let a = dimension * s;
                let energy = tree_self_energy(tree.branching(), tree.delta(), a)?;
                let mut out: Vec<f64> =
                    (0..n).map(|l| self.scale * num::pow(tree.delta_pow(l), -a)).collect();
                out.push(self.scale * num::pow(tree.delta_pow(n), -a) * energy);
                Ok(out)
            }
        }
    }
}

/// `K(rho(x, y))`; the Riesz kind is singular on the diagonal.
pub fn kernel_value(kernel: &RadialKernel, tree: &TreeSpace, x: BoundaryPoint, y: BoundaryPoint) -> Result<f64> {
    match kernel.kind() {
        KernelKind::Riesz { dimension, s } => {
            if x == y {
                return Err(Error::Diagonal);
            }
            Ok(kernel.scale() * num::pow(tree.distance(x, y), -dimension * s))
        }
        KernelKind::Levels(_) => {
            let l = tree.lca_level(x, y);
            Ok(kernel.level_values(tree)?[l])
        }
    }
}

/// `||K||_1`, the largest total kernel mass seen from a leaf.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct KernelNorm(pub f64);

impl KernelNorm {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn kernel_norm_1(kernel: &RadialKernel, tree: &TreeSpace) -> Result<KernelNorm> {
    let op = TreeOperator::new(tree, kernel)?;
    Ok(KernelNorm(op.norm_1(tree.weights())))
}

fn check_len(tree: &TreeSpace, v: &[f64]) -> Result<()> {
    if v.len() != tree.leaf_count() {
        return Err(Error::Length { expected: tree.leaf_count(), got: v.len() });
    }
    Ok(())
}

/// Direct `O(n^2)` summation of `sum_y K(x, y) f(y) w(y)`.
pub fn convolve_naive(kernel: &RadialKernel, tree: &TreeSpace, f: &[f64]) -> Result<Vec<f64>> {
    check_len(tree, f)?;
    let levels = kernel.level_values(tree)?;
    let n = tree.leaf_count();
    let w = tree.weights();
    Ok((0..n)
        .map(|x| {
            (0..n)
                .map(|y| levels[tree.lca_level(BoundaryPoint(x), BoundaryPoint(y))] * f[y] * w[y])
                .sum()
        })
        .collect())
}

/// Level-by-level evaluation of the same potential in `O(n b)`.
pub fn convolve_fast(kernel: &RadialKernel, tree: &TreeSpace, f: &[f64]) -> Result<Vec<f64>> {
    check_len(tree, f)?;
    Ok(TreeOperator::new(tree, kernel)?.convolve(f, tree.weights()))
}

/// Potential `sum_x K(x, y) mu(x)` of a measure given by its leaf masses.
pub fn convolve_measure(kernel: &RadialKernel, tree: &TreeSpace, mu: &[f64]) -> Result<Vec<f64>> {
    check_len(tree, mu)?;
    let op = TreeOperator::new(tree, kernel)?;
    let mut out = alloc::vec![0.0; tree.leaf_count()];
    op.apply(mu, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn lp_norm(v: &[f64], w: &[f64], p: f64) -> f64 {
    if p == f64::INFINITY {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        num::weighted_lp_norm(v, w, p)
    }
}

/// Compares `||K * f||_p` with `||K||_1 ||f||_p`; `p = f64::INFINITY` selects the sup norm.
pub fn young_check(kernel: &RadialKernel, tree: &TreeSpace, f: &[f64], p: f64) -> Result<YoungReport> {
    if !(p >= 1.0) {
        return Err(Error::Invalid("young_check needs p in [1, inf]"));
    }
    let u = convolve_fast(kernel, tree, f)?;
    let w = tree.weights();
    let lhs = lp_norm(&u, w, p);
    let rhs = kernel_norm_1(kernel, tree)?.value() * lp_norm(f, w, p);
    Ok(YoungReport { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-12) })
}

/// `lo = floor(log2 delta^N)`; `hi` is the first `j` with `2^j > diam`, so the
/// largest open ball is all of `X` even when the diameter is a power of two.
fn dyadic_range(space: &ModelSpace) -> (i32, i32) {
    let lo = num::floor(libm::log2(space.cell_scale())) as i32;
    let hi = num::floor(libm::log2(space.diameter())) as i32 + 1;
    (lo, hi)
}

/// `sum_j 2^(-Q s j) int_{B(x, 2^j)} g dm` over the dyadic scales of the discretization.
pub fn discretized_riesz(space: &ModelSpace, g: &[f64], dimension: f64, s: f64) -> Result<Vec<f64>> {
    check_len(space.tree(), g)?;
    let w = space.weights();
    let mut prefix = Vec::with_capacity(g.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for (a, b) in g.iter().zip(w) {
        acc += a * b;
        prefix.push(acc);
    }
    let (lo, hi) = dyadic_range(space);
    let a = dimension * s;
    Ok((0..space.leaf_count())
        .map(|x| {
            (lo..=hi)
                .map(|j| {
                    let span = space.ball(x, num::pow(2.0, j as f64));
                    num::pow(2.0, -a * j as f64) * (prefix[span.end] - prefix[span.start])
                })
                .sum()
        })
        .collect())
}

/// Extremes over all leaf pairs of the dyadic sum of a unit point mass divided
/// by the Riesz kernel `exact(x, z)`.
///
/// Both potentials are nonnegative combinations of the pairwise values, so every
/// ratio for `g >= 0` lies between these extremes.
pub fn riesz_discretization_bounds(
    space: &ModelSpace,
    dimension: f64,
    s: f64,
    exact: impl Fn(usize, usize) -> f64,
) -> (f64, f64) {
    let (lo, hi) = dyadic_range(space);
    let a = dimension * s;
    let n = space.leaf_count();
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for x in 0..n {
        for z in 0..n {
            let d = space.distance(x, z);
            let dyadic: f64 = (lo..=hi)
                .filter(|&j| d < num::pow(2.0, j as f64))
                .map(|j| num::pow(2.0, -a * j as f64))
                .sum();
            let ratio = dyadic / exact(x, z);
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
    }
    (c1, c2)
}

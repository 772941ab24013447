use alloc::vec::Vec;

use super::leafset::{LeafSet, LeafSpan};
use super::tree::{BoundaryPoint, MassProfile, TreeSpace};
use crate::error::{Error, Result};
use crate::num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    TreeBoundary,
    UnitInterval,
    CantorSet,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::TreeBoundary => "tree-boundary",
            SpaceKind::UnitInterval => "unit-interval",
            SpaceKind::CantorSet => "cantor-set",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tree-boundary" | "tree" => Some(SpaceKind::TreeBoundary),
            "unit-interval" | "interval" => Some(SpaceKind::UnitInterval),
            "cantor-set" | "cantor" => Some(SpaceKind::CantorSet),
            _ => None,
        }
    }
}

/// A compact Ahlfors-regular space discretized by the leaves of a tree.
///
/// For the interval and Cantor kinds each leaf stands for a construction cell
/// and sits at the cell's left endpoint, so leaf order matches coordinate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    tree: TreeSpace,
    dimension: f64,
    coords: Vec<f64>,
}

impl ModelSpace {
    /// The tree boundary itself with the canonical dimension.
    pub fn tree_boundary(tree: TreeSpace) -> Self {
        let dimension = tree.canonical_dimension();
        Self { kind: SpaceKind::TreeBoundary, tree, dimension, coords: Vec::new() }
    }

    /// `[0, 1]` cut into `b^N` cells of length `b^-N`.
    pub fn unit_interval(branching: usize, depth: usize, profile: MassProfile) -> Result<Self> {
        let tree = TreeSpace::new(branching, depth, 1.0 / branching as f64, profile)?;
        let n = tree.leaf_count() as f64;
        let coords = (0..tree.leaf_count()).map(|i| i as f64 / n).collect();
        Ok(Self { kind: SpaceKind::UnitInterval, tree, dimension: 1.0, coords })
    }

    /// Middle-thirds Cantor set at construction depth `N`.
    pub fn cantor(depth: usize, profile: MassProfile) -> Result<Self> {
        let tree = TreeSpace::new(2, depth, 1.0 / 3.0, profile)?;
        let coords = (0..tree.leaf_count())
            .map(|i| {
                let mut c = 0.0;
                let mut scale = 1.0;
                for d in tree.digits(BoundaryPoint(i)) {
                    scale /= 3.0;
                    c += 2.0 * d as f64 * scale;
                }
                c
            })
            .collect();
        let dimension = num::ln(2.0) / num::ln(3.0);
        Ok(Self { kind: SpaceKind::CantorSet, tree, dimension, coords })
    }

    pub fn build(
        kind: SpaceKind,
        branching: usize,
        depth: usize,
        delta: f64,
        profile: MassProfile,
    ) -> Result<Self> {
        match kind {
            SpaceKind::TreeBoundary => Ok(Self::tree_boundary(TreeSpace::new(branching, depth, delta, profile)?)),
            SpaceKind::UnitInterval => Self::unit_interval(branching, depth, profile),
            SpaceKind::CantorSet => Self::cantor(depth, profile),
        }
    }

    /// Overrides the dimension used by Riesz kernels and the Poisson integral.
    pub fn with_dimension(mut self, dimension: f64) -> Result<Self> {
        if !(dimension.is_finite() && dimension > 0.0) {
            return Err(Error::Dimension(dimension));
        }
        self.dimension = dimension;
        Ok(self)
    }

    /// Same geometry with new leaf weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let tree = self.tree.with_weights(weights)?;
        Ok(Self { tree, ..self.clone() })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn tree(&self) -> &TreeSpace {
        &self.tree
    }

    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }

    pub fn weights(&self) -> &[f64] {
        self.tree.weights()
    }

    pub fn delta(&self) -> f64 {
        self.tree.delta()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// Nominal diameter of the continuum space.
    pub fn diameter(&self) -> f64 {
        1.0
    }

    /// Scale of the finest cells, `delta^N`.
    pub fn cell_scale(&self) -> f64 {
        self.tree.delta_pow(self.tree.depth())
    }

    pub fn total_mass(&self) -> f64 {
        self.tree.total_mass()
    }

    pub fn mass(&self, span: LeafSpan) -> f64 {
        self.tree.mass(span)
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        match self.kind {
            SpaceKind::TreeBoundary => self.tree.distance(BoundaryPoint(x), BoundaryPoint(y)),
            _ => (self.coords[x] - self.coords[y]).abs(),
        }
    }

    /// Open ball `{y : d(x, y) < r}`; always a contiguous span of leaves.
    pub fn ball(&self, x: usize, r: f64) -> LeafSpan {
        if r <= 0.0 {
            return LeafSpan::empty();
        }
        match self.kind {
            SpaceKind::TreeBoundary => self.tree.ball(BoundaryPoint(x), r),
            _ => {
                let c = self.coords[x];
                let lo = self.coords.partition_point(|&v| c - v >= r);
                let hi = self.coords.partition_point(|&v| v - c < r);
                LeafSpan::new(lo, hi)
            }
        }
    }

    /// Coordinate of a leaf used for continuous test profiles.
    ///
    /// Equals the lambda map for interval and Cantor kinds and the `b`-adic
    /// left endpoint `leaf / b^N` on tree boundaries.
    pub fn coordinate(&self, x: usize) -> f64 {
        match self.kind {
            SpaceKind::TreeBoundary => x as f64 / self.leaf_count() as f64,
            _ => self.coords[x],
        }
    }

    /// Ambient coordinate of the cell nest along the path of `x`.
    pub fn lambda(&self, x: BoundaryPoint) -> Result<f64> {
        match self.kind {
            SpaceKind::TreeBoundary => Err(Error::LambdaOnTree),
            _ => self.coords.get(x.0).copied().ok_or(Error::Leaf(x.0)),
        }
    }

    /// Smallest distance between distinct leaves.
    pub fn min_separation(&self) -> f64 {
        match self.kind {
            SpaceKind::TreeBoundary => self.tree.delta_pow(self.tree.depth() - 1),
            _ => self
                .coords
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance from `x` to the nearest leaf outside `set`, `None` when `set` is everything.
    ///
    /// Distances from `x` grow monotonically away from `x` in leaf order, so the
    /// nearest outsider is the first non-member on either side.
    pub fn distance_to_complement(&self, x: usize, set: &LeafSet) -> Option<f64> {
        let n = self.leaf_count();
        let left = (0..x).rev().find(|&y| !set.contains(y));
        let right = (x + 1..n).find(|&y| !set.contains(y));
        let own = if set.contains(x) { None } else { Some(0.0) };
        let best = [left, right]
            .into_iter()
            .flatten()
            .map(|y| self.distance(x, y))
            .chain(own)
            .fold(f64::INFINITY, f64::min);
        best.is_finite().then_some(best)
    }

    /// Energy `int int d(u, v)^-a` of the normalized continuum model with unit mass.
    ///
    /// A leaf cell of scale `h` and mass `w` then has self-interaction
    /// `w^2 h^-a` times this value.
    pub fn self_energy(&self, a: f64) -> Result<f64> {
        match self.kind {
            SpaceKind::TreeBoundary => tree_self_energy(self.tree.branching(), self.tree.delta(), a),
            SpaceKind::UnitInterval => {
                if a >= 1.0 {
                    return Err(Error::NotIntegrable(a));
                }
                Ok(2.0 / ((1.0 - a) * (2.0 - a)))
            }
            SpaceKind::CantorSet => cantor_self_energy(a),
        }
    }
}

/// Self-energy of the uniform measure on a `b`-ary ultrametric boundary.
pub(crate) fn tree_self_energy(branching: usize, delta: f64, a: f64) -> Result<f64> {
    let b = branching as f64;
    let ratio = num::pow(delta, -a) / b;
    if ratio >= 1.0 {
        return Err(Error::NotIntegrable(a));
    }
    Ok((1.0 - 1.0 / b) / (1.0 - ratio))
}

/// Uses `I = X / (2 - 3^a)` with `X` the mean interaction between the two
/// first-generation pieces, evaluated on a fine midpoint discretization.
fn cantor_self_energy(a: f64) -> Result<f64> {
    let three_a = num::pow(3.0, a);
    if three_a >= 2.0 {
        return Err(Error::NotIntegrable(a));
    }
    const L: usize = 10;
    let n = 1usize << L;
    let cell = num::powi(3.0, -(L as i32));
    let pts: Vec<f64> = (0..n)
        .map(|i| {
            let mut c = 0.0;
            let mut scale = 1.0;
            for bit in (0..L).rev() {
                scale /= 3.0;
                c += 2.0 * ((i >> bit) & 1) as f64 * scale;
            }
            (c + 0.5 * cell) / 3.0
        })
        .collect();
    let mut total = 0.0;
    for &u in &pts {
        let mut row = 0.0;
        for &v in &pts {
            row += num::pow(2.0 / 3.0 + v - u, -a);
        }
        total += row;
    }
    let cross = total / (n * n) as f64;
    Ok(cross / (2.0 - three_a))
}

//! Tree boundaries, model Ahlfors-regular spaces and their dyadic structure.

mod christ;
mod leafset;
mod model;
mod tree;

pub use christ::{christ_decomposition, ChristCube, ChristDecomposition, ChristReport};
pub use leafset::{LeafSet, LeafSpan};
pub use model::{ModelSpace, SpaceKind};
pub(crate) use model::tree_self_energy;
pub use tree::{BoundaryPoint, MassProfile, TreeSpace, MAX_LEAVES};

use crate::error::Result;
use crate::num;

/// Ambient coordinate of `x`; rejects tree boundaries.
pub fn lambda_map(x: BoundaryPoint, space: &ModelSpace) -> Result<f64> {
    space.lambda(x)
}

/// Measured `inf` and `sup` of `m(B(x, r)) / r^Q` over all leaves and `r = delta^n`, `1 <= n <= N`.
pub fn ahlfors_constants(space: &ModelSpace) -> (f64, f64) {
    let tree = space.tree();
    let q = space.dimension();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for n in 1..=tree.depth() {
        let r = tree.delta_pow(n);
        let rq = num::pow(r, q);
        for x in 0..space.leaf_count() {
            let ratio = space.mass(space.ball(x, r)) / rq;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    (lo, hi)
}

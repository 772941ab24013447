//! Numerical potential theory on finite-depth tree boundaries and model
//! Ahlfors-regular spaces.
//!
//! The crate computes `L^p` capacities with certified duality gaps, Riesz
//! potentials, Aikawa-Borichev radii, dyadic Poisson integrals and the
//! boundary-convergence diagnostics built from them. It needs only `alloc`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod capacity;
pub mod convergence;
pub mod error;
pub mod kernel;
pub mod poisson;
pub mod quasiadd;
mod linalg;
mod num;
pub mod space;

pub use error::{Error, Result};
pub use num::{ls_slope, rel_diff, weighted_lp_norm};

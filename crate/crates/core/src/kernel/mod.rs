//! Radial kernels, their integrability norm and potential evaluation.

mod operator;
mod radial;

pub use operator::{DenseOperator, KernelOperator, Operator, TreeOperator};
pub use radial::{
    check_riesz_range, convolve_fast, convolve_measure, convolve_naive, discretized_riesz,
    kernel_norm_1, kernel_value, riesz_discretization_bounds, young_check, Exponent, KernelKind,
    KernelNorm, RadialKernel, YoungReport,
};

//! `L^p` capacities, equilibrium measures and Aikawa-Borichev radii.
//!
//! Both solvers run on the dual problem
//! `min (1/p') ||K mu||_{p'}^{p'} - mu(E)` over `mu >= 0` on `E`. Any dual
//! iterate yields a lower bound `(mu(E))^p / ||K mu||_{p'}^p` and, through
//! `f = (K mu)^{p'-1}`, a feasible primal density, so every returned value
//! carries its own duality-gap certificate.

mod exact;
mod solver;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

pub use solver::{CapacitySolution, SolverOptions};

use crate::error::{Error, Result};
use crate::kernel::{check_riesz_range, Exponent, KernelNorm, KernelOperator, Operator, RadialKernel};
use crate::num;
use crate::space::{BoundaryPoint, LeafSet, LeafSpan, ModelSpace, SpaceKind};
use solver::{solve_spg, Dual};

/// Target set, kernel and exponent of one capacity computation.
pub struct CapacityProblem<'a, K: KernelOperator + ?Sized> {
    pub operator: &'a K,
    pub weights: &'a [f64],
    pub target: &'a LeafSet,
    pub p: Exponent,
}

fn run<K: KernelOperator + ?Sized>(prob: &CapacityProblem<'_, K>, opts: &SolverOptions, primal: bool) -> CapacitySolution {
    let n = prob.operator.len();
    if prob.target.is_empty() {
        return CapacitySolution::empty(n);
    }
    let dual = Dual::new(prob.operator, prob.weights, prob.target, prob.p);
    solve_spg(&dual, n, opts, primal)
}

/// `inf ||f||_p^p` over `f >= 0` with `K * f >= 1` on the target; `value` is the certified upper bound.
pub fn capacity_primal<K: KernelOperator + ?Sized>(prob: &CapacityProblem<'_, K>, opts: &SolverOptions) -> CapacitySolution {
    run(prob, opts, true)
}

/// `sup mu(E)^p` over `mu >= 0` on `E` with `||K mu||_{p'} <= 1`; `value` is the certified lower bound.
pub fn capacity_dual<K: KernelOperator + ?Sized>(prob: &CapacityProblem<'_, K>, opts: &SolverOptions) -> CapacitySolution {
    run(prob, opts, false)
}

/// Exact active-set solve for `p = 2`.
pub fn capacity_quadratic_exact<K: KernelOperator + ?Sized>(prob: &CapacityProblem<'_, K>) -> Result<CapacitySolution> {
    if prob.p.value() != 2.0 {
        return Err(Error::Invalid("the active-set solver requires p = 2"));
    }
    Ok(exact::solve_quadratic(prob.operator, prob.weights, prob.target))
}

/// `(sum_y w(y) K(x, y)^{p'})^{1 - p}`, the capacity of the single leaf `x`.
pub fn singleton_capacity<K: KernelOperator + ?Sized>(op: &K, weights: &[f64], x: usize, p: Exponent) -> f64 {
    let n = op.len();
    let mut unit = alloc::vec![0.0; n];
    unit[x] = 1.0;
    let mut col = alloc::vec![0.0; n];
    op.apply(&unit, &mut col);
    let s: f64 = col.iter().zip(weights).map(|(k, w)| w * num::pow(*k, p.conjugate())).sum();
    num::pow(s, 1.0 - p.value())
}

/// Result of an Aikawa-Borichev radius search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEta {
    pub center: usize,
    pub radius: f64,
    /// `None` when no ball carries as much mass as the capacity.
    pub eta: Option<f64>,
    /// `max(r, eta)`, or the diameter when `eta` does not exist.
    pub eta_star: f64,
}

/// A space, kernel operator and exponent bundled with a cache of ball capacities.
#[derive(Debug, Clone)]
pub struct CapacityEngine {
    space: ModelSpace,
    operator: Operator,
    p: Exponent,
    options: SolverOptions,
    cache: BTreeMap<(usize, usize), f64>,
}

impl CapacityEngine {
    pub fn new(space: ModelSpace, operator: Operator, p: Exponent, options: SolverOptions) -> Result<Self> {
        if operator.len() != space.leaf_count() {
            return Err(Error::Length { expected: space.leaf_count(), got: operator.len() });
        }
        Ok(Self { space, operator, p, options, cache: BTreeMap::new() })
    }

    /// Riesz kernel `d^(-Q s)` on `space` with `1/p' <= s < 1`.
    pub fn riesz(space: ModelSpace, s: f64, p: Exponent, options: SolverOptions) -> Result<Self> {
        check_riesz_range(s, p)?;
        let operator = Operator::riesz(&space, s, 1.0)?;
        Self::new(space, operator, p, options)
    }

    /// General radial kernel on a tree boundary.
    pub fn radial(space: ModelSpace, kernel: &RadialKernel, p: Exponent, options: SolverOptions) -> Result<Self> {
        if space.kind() != SpaceKind::TreeBoundary {
            return Err(Error::Invalid("radial level kernels live on tree boundaries"));
        }
        let operator = Operator::radial(space.tree(), kernel)?;
        Self::new(space, operator, p, options)
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn exponent(&self) -> Exponent {
        self.p
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    pub fn set_options(&mut self, options: SolverOptions) {
        self.options = options;
        self.cache.clear();
    }

    pub fn kernel_norm(&self) -> KernelNorm {
        KernelNorm(self.operator.norm_1(self.space.weights()))
    }

    /// Potential `K * f`.
    pub fn potential(&self, f: &[f64]) -> Vec<f64> {
        self.operator.convolve(f, self.space.weights())
    }

    fn problem<'a>(&'a self, set: &'a LeafSet) -> CapacityProblem<'a, Operator> {
        CapacityProblem { operator: &self.operator, weights: self.space.weights(), target: set, p: self.p }
    }

    pub fn solve(&self, set: &LeafSet) -> CapacitySolution {
        capacity_primal(&self.problem(set), &self.options)
    }

    pub fn solve_dual(&self, set: &LeafSet) -> CapacitySolution {
        capacity_dual(&self.problem(set), &self.options)
    }

    pub fn solve_exact(&self, set: &LeafSet) -> Result<CapacitySolution> {
        capacity_quadratic_exact(&self.problem(set))
    }

    pub fn capacity(&self, set: &LeafSet) -> f64 {
        self.solve(set).value
    }

    pub fn singleton(&self, x: usize) -> f64 {
        singleton_capacity(&self.operator, self.space.weights(), x, self.p)
    }

    /// Capacity of a span of leaves, memoized.
    pub fn span_capacity(&mut self, span: LeafSpan) -> f64 {
        if span.is_empty() {
            return 0.0;
        }
        if let Some(v) = self.cache.get(&(span.start, span.end)) {
            return *v;
        }
        let v = if span.len() == 1 {
            self.singleton(span.start)
        } else {
            self.capacity(&LeafSet::from_span(self.space.leaf_count(), span))
        };
        self.cache.insert((span.start, span.end), v);
        v
    }

    pub fn ball_capacity(&mut self, x: usize, r: f64) -> f64 {
        let span = self.space.ball(x, r);
        self.span_capacity(span)
    }

    /// Radius `delta^(n - 1/2)` for the largest `n` whose depth-`n` subtree
    /// around `x` has mass at least `C(B(x, r))`.
    pub fn eta_tree(&mut self, x: usize, r: f64) -> RadiusEta {
        let cap = self.ball_capacity(x, r);
        let tree = self.space.tree();
        let delta = tree.delta();
        let found = (0..=tree.depth())
            .rev()
            .find(|&n| tree.mass(tree.subtree(BoundaryPoint(x), n)) >= cap);
        match found {
            Some(n) => {
                let eta = num::pow(delta, n as f64 - 0.5);
                RadiusEta { center: x, radius: r, eta: Some(eta), eta_star: r.max(eta) }
            }
            None => RadiusEta { center: x, radius: r, eta: None, eta_star: self.space.diameter() },
        }
    }

    /// Infimum of the radii `R` with `m(B(x, R)) >= C(B(x, r))`.
    ///
    /// `R -> m(B(x, R))` jumps just after each realized distance, so the infimum
    /// is the smallest distance `D` whose closed ball is heavy enough.
    pub fn eta_x(&mut self, x: usize, r: f64) -> RadiusEta {
        let cap = self.ball_capacity(x, r);
        let levels = distance_levels(&self.space, x);
        let idx = levels.partition_point(|&(_, m)| m < cap);
        match levels.get(idx) {
            Some(&(d, _)) => RadiusEta { center: x, radius: r, eta: Some(d), eta_star: r.max(d) },
            None => RadiusEta { center: x, radius: r, eta: None, eta_star: self.space.diameter() },
        }
    }
}

/// Distinct distances from `x` in increasing order with the mass of the closed ball at each.
pub fn distance_levels(space: &ModelSpace, x: usize) -> Vec<(f64, f64)> {
    let w = space.weights();
    let mut pairs: Vec<(f64, f64)> = (0..space.leaf_count()).map(|y| (space.distance(x, y), w[y])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut acc = 0.0;
    for (d, m) in pairs {
        acc += m;
        match out.last_mut() {
            Some(last) if last.0 == d => last.1 = acc,
            _ => out.push((d, acc)),
        }
    }
    out
}

/// Summary statistic of a ball-capacity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileStatistic {
    /// Least-squares slope of `log C` against `log r` and the predicted `Q p (s - 1/p')`.
    Slope { fitted: f64, expected: f64, rel_error: f64 },
    /// Extremes of `C log(1/r)` in the critical case `s = 1/p'`.
    LogProduct { min: f64, max: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub level: usize,
    pub radius: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallProfile {
    pub rows: Vec<ProfileRow>,
    pub statistic: Option<ProfileStatistic>,
}

/// Capacities of the open balls `B(x, delta^n)` for `n` in `levels`.
pub fn ball_capacity_profile(engine: &mut CapacityEngine, x: usize, levels: RangeInclusive<usize>, s: f64) -> BallProfile {
    let delta = engine.space().delta();
    let rows: Vec<ProfileRow> = levels
        .map(|n| {
            let radius = num::powi(delta, n as i32);
            ProfileRow { level: n, radius, capacity: engine.ball_capacity(x, radius) }
        })
        .collect();
    let critical = 1.0 / engine.exponent().conjugate();
    let statistic = if rows.len() < 2 {
        None
    } else if (s - critical).abs() < 1e-12 {
        let prods: Vec<f64> = rows.iter().map(|r| r.capacity * num::ln(1.0 / r.radius)).collect();
        let min = prods.iter().copied().fold(f64::INFINITY, f64::min);
        let max = prods.iter().copied().fold(0.0, f64::max);
        Some(ProfileStatistic::LogProduct { min, max, ratio: max / min })
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| num::ln(r.radius)).collect();
        let ys: Vec<f64> = rows.iter().map(|r| num::ln(r.capacity)).collect();
        let fitted = num::ls_slope(&xs, &ys);
        let expected = engine.space().dimension() * engine.exponent().value() * (s - critical);
        Some(ProfileStatistic::Slope { fitted, expected, rel_error: (fitted - expected).abs() / expected.abs() })
    };
    BallProfile { rows, statistic }
}

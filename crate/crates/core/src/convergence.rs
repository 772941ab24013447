//! Approach regions, thin sets and the boundary-convergence experiments.

use alloc::vec::Vec;

use crate::capacity::CapacityEngine;
use crate::error::{Error, Result};
use crate::num;
use crate::poisson::{exceedance_sets, poisson_field, shadow, HeightGrid, UpperHalfField, UpperHalfSet};
use crate::space::{LeafSet, ModelSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionKind {
    /// `d(x, x0) < y`
    NonTangential,
    /// `d(x, x0) < psi * eta*(x0, y)`
    EtaStar { psi: f64 },
    /// `d(x, x0) < c * y^exponent`
    Polynomial { c: f64, exponent: f64 },
    /// `y > exp(-c * d(x, x0)^-exponent)`
    Exponential { c: f64, exponent: f64 },
}

impl RegionKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegionKind::NonTangential => "nontangential",
            RegionKind::EtaStar { .. } => "eta-star",
            RegionKind::Polynomial { .. } => "polynomial",
            RegionKind::Exponential { .. } => "exponential",
        }
    }
}

/// Contact region at `base`, restricted to heights below `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachRegion {
    pub base: usize,
    pub kind: RegionKind,
    pub cutoff: f64,
}

impl ApproachRegion {
    pub fn new(base: usize, kind: RegionKind, cutoff: f64) -> Result<Self> {
        let ok = match kind {
            RegionKind::NonTangential => true,
            RegionKind::EtaStar { psi } => psi >= 1.0,
            RegionKind::Polynomial { c, exponent } | RegionKind::Exponential { c, exponent } => {
                c > 0.0 && exponent > 0.0
            }
        };
        if !ok || !(cutoff > 0.0) {
            return Err(Error::Invalid("region constants must be positive and psi >= 1"));
        }
        Ok(Self { base, kind, cutoff })
    }

    /// Every kind reads `d(x, base) < R(y)`; this returns `R(y)`.
    pub fn radius(&self, engine: &mut CapacityEngine, y: f64) -> f64 {
        region_radius(engine, self.base, self.kind, y)
    }
}

fn region_radius(engine: &mut CapacityEngine, base: usize, kind: RegionKind, y: f64) -> f64 {
    match kind {
        RegionKind::NonTangential => y,
        RegionKind::EtaStar { psi } => psi * engine.eta_x(base, y).eta_star,
        RegionKind::Polynomial { c, exponent } => c * num::pow(y, exponent),
        RegionKind::Exponential { c, exponent } => {
            if y >= 1.0 {
                f64::INFINITY
            } else {
                num::pow(c / num::ln(1.0 / y), 1.0 / exponent)
            }
        }
    }
}

pub fn region_membership(engine: &mut CapacityEngine, region: &ApproachRegion, x: usize, y: f64) -> bool {
    if !(y > 0.0 && y < region.cutoff) {
        return false;
    }
    engine.space().distance(x, region.base) < region.radius(engine, y)
}

/// Capacities of the shadows `E*_t` of `E_t = {(x, y) in E : y < t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSetReport {
    pub t_grid: Vec<f64>,
    pub capacities: Vec<f64>,
    pub thin: bool,
}

/// Heights of the grid except the finest, so that every `t` keeps at least one height below it.
pub fn t_grid(grid: &HeightGrid) -> Vec<f64> {
    grid.heights()[..grid.len().saturating_sub(1)].to_vec()
}

/// Points of `set` strictly below height `t`.
pub fn truncate_below(set: &UpperHalfSet, grid: &HeightGrid, t: f64) -> UpperHalfSet {
    let mut out = UpperHalfSet::empty(set.leaves(), set.levels());
    for (x, m) in set.iter() {
        if grid.height(m) < t {
            out.insert(x, m);
        }
    }
    out
}

pub fn thinness_decay(engine: &CapacityEngine, set: &UpperHalfSet, grid: &HeightGrid, thin_tol: f64) -> ThinSetReport {
    let ts = t_grid(grid);
    let capacities: Vec<f64> = ts
        .iter()
        .map(|&t| engine.capacity(&shadow(engine.space(), &truncate_below(set, grid, t), grid)))
        .collect();
    let thin = capacities.last().is_none_or(|&c| c < thin_tol);
    ThinSetReport { t_grid: ts, capacities, thin }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnlargedSet {
    pub set: LeafSet,
    pub mass: f64,
    pub capacity: f64,
    /// `m(E~) / C(E)`.
    pub ratio: f64,
}

/// `union_{x in E} B(x, c * eta*(x, d(x, X \ E)))`.
pub fn enlarged_set(engine: &mut CapacityEngine, set: &LeafSet, c: f64) -> Result<EnlargedSet> {
    if set.is_empty() {
        return Err(Error::Invalid("enlarged set needs a nonempty set"));
    }
    if !(c >= 1.0) {
        return Err(Error::Invalid("enlargement constant must be at least 1"));
    }
    let n = engine.space().leaf_count();
    let mut out = LeafSet::empty(n);
    for x in set.iter() {
        let dist = engine.space().distance_to_complement(x, set).ok_or(Error::WholeSpace)?;
        let r = c * engine.eta_x(x, dist).eta_star;
        out.insert_span(engine.space().ball(x, r));
    }
    let mass = out.mass(engine.space().weights());
    let capacity = engine.capacity(set);
    Ok(EnlargedSet { set: out, mass, capacity, ratio: mass / capacity })
}

/// Largest `eta*(x1, y) / eta*(x2, y)` over leaves and grid heights.
pub fn comparability_constant(engine: &mut CapacityEngine, grid: &HeightGrid) -> f64 {
    let n = engine.space().leaf_count();
    let mut worst = 1.0f64;
    for &y in grid.heights() {
        let vals: Vec<f64> = (0..n).map(|x| engine.eta_x(x, y).eta_star).collect();
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi / lo);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowCoveringReport {
    pub monotone: bool,
    /// Measured comparability constant of the region function on the grid.
    pub measured_alpha: f64,
    pub comparability: bool,
    /// `None` when a hypothesis fails and the inclusion is not evaluated.
    pub inclusion: Option<bool>,
    pub lhs: LeafSet,
    pub rhs: LeafSet,
}

impl ShadowCoveringReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.monotone && self.comparability
    }
}

/// Checks `{x0 : Omega_{f, x0} meets E} ⊆ union_{x in E*} Omega_{alpha f, x}(d(x, X \ E*))`
/// with the closed regions `Omega_{f, x0} = {(x, y) : d(x, x0) <= f(x0, y)}`.
pub fn shadow_covering_check(
    space: &ModelSpace,
    set: &UpperHalfSet,
    grid: &HeightGrid,
    f: &mut dyn FnMut(usize, f64) -> f64,
    alpha: f64,
) -> ShadowCoveringReport {
    let n = space.leaf_count();
    let table: Vec<Vec<f64>> = (0..n).map(|x| grid.heights().iter().map(|&y| f(x, y)).collect()).collect();
    let monotone = table.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    let mut measured = 1.0f64;
    for m in 0..grid.len() {
        let hi = table.iter().map(|r| r[m]).fold(0.0, f64::max);
        let lo = table.iter().map(|r| r[m]).fold(f64::INFINITY, f64::min);
        measured = measured.max(hi / lo);
    }
    let comparability = alpha >= measured * (1.0 - 1e-12);
    let mut lhs = LeafSet::empty(n);
    let mut rhs = LeafSet::empty(n);
    if !(monotone && comparability) {
        return ShadowCoveringReport { monotone, measured_alpha: measured, comparability, inclusion: None, lhs, rhs };
    }
    for x0 in 0..n {
        if set.iter().any(|(x, m)| space.distance(x, x0) <= table[x0][m]) {
            lhs.insert(x0);
        }
    }
    let star = shadow(space, set, grid);
    for x in star.iter() {
        let depth = space.distance_to_complement(x, &star).unwrap_or(space.diameter());
        let r = alpha * f(x, depth);
        for x1 in 0..n {
            if space.distance(x1, x) <= r {
                rhs.insert(x1);
            }
        }
    }
    let inclusion = Some(lhs.is_subset(&rhs));
    ShadowCoveringReport { monotone, measured_alpha: measured, comparability, inclusion, lhs, rhs }
}

/// Field `PI(K * f)` on the grid.
pub fn potential_field(engine: &CapacityEngine, f: &[f64], grid: &HeightGrid) -> Result<UpperHalfField> {
    let u = engine.potential(f);
    poisson_field(engine.space(), &u, grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceptionalBound {
    /// `C(E*(f, eps))`.
    pub capacity: f64,
    /// `(||f||_p / eps)^p`.
    pub bound: f64,
    pub ratio: f64,
}

pub fn exceptional_capacity_bound(engine: &CapacityEngine, f: &[f64], eps: f64, grid: &HeightGrid) -> Result<ExceptionalBound> {
    if !(eps > 0.0) || f.iter().any(|v| *v < 0.0) {
        return Err(Error::Invalid("needs f >= 0 and eps > 0"));
    }
    let field = potential_field(engine, f, grid)?;
    let ex = exceedance_sets(engine.space(), &field, grid, eps);
    let capacity = engine.capacity(&ex.shadow);
    let p = engine.exponent().value();
    let norm = num::weighted_lp_norm(f, engine.space().weights(), p);
    let bound = num::pow(norm / eps, p);
    let ratio = if bound > 0.0 { capacity / bound } else { 0.0 };
    Ok(ExceptionalBound { capacity, bound, ratio })
}

/// Largest `L`-Lipschitz minorant `min_z (f(z) + L d(x, z))` of `f`.
pub fn lipschitz_minorant(space: &ModelSpace, f: &[f64], lipschitz: f64) -> Vec<f64> {
    let n = space.leaf_count();
    (0..n)
        .map(|x| (0..n).map(|z| f[z] + lipschitz * space.distance(x, z)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Smallest `L` on a doubling ladder with `||f - g_L||_p <= tol`, and `g_L`.
fn lusin_step(space: &ModelSpace, f: &[f64], p: f64, tol: f64) -> (f64, Vec<f64>) {
    let w = space.weights();
    let spread = f.iter().copied().fold(0.0, f64::max);
    let ceiling = 2.0 * spread / space.min_separation();
    let mut lip = (spread / space.diameter()).max(1e-12);
    loop {
        let g = lipschitz_minorant(space, f, lip);
        let diff: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        if num::weighted_lp_norm(&diff, w, p) <= tol || lip >= ceiling {
            return (lip, g);
        }
        lip *= 2.0;
    }
}

/// Settings of the Lusin-type decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub delta_target: f64,
    /// Constant of the exceptional-set bound used to size the approximations.
    pub exceedance_constant: f64,
    /// Levels `j = 1..=max_level`.
    pub max_level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationSplit {
    /// `E`: union of the exceedance sets of `PI(K * (f± - g±_j))` at `2^-j`.
    pub upper: UpperHalfSet,
    pub upper_shadow: LeafSet,
    /// `F`: union of `{K * (f± - g±_j) >= 2^-j}`.
    pub exceptional: LeafSet,
    pub upper_capacity: f64,
    pub exceptional_capacity: f64,
    /// Lipschitz constants chosen for `(g+_j, g-_j)`.
    pub lipschitz: Vec<(f64, f64)>,
    pub delta_target: f64,
}

impl ApproximationSplit {
    pub fn pass(&self) -> bool {
        self.upper_capacity < self.delta_target && self.exceptional_capacity < self.delta_target
    }
}

pub fn approximation_split(
    engine: &CapacityEngine,
    f: &[f64],
    grid: &HeightGrid,
    opts: &SplitOptions,
) -> Result<ApproximationSplit> {
    let space = engine.space();
    let n = space.leaf_count();
    if f.len() != n {
        return Err(Error::Length { expected: n, got: f.len() });
    }
    if !(opts.delta_target > 0.0 && opts.exceedance_constant > 0.0) {
        return Err(Error::Invalid("split needs positive delta and constant"));
    }
    let p = engine.exponent().value();
    let parts = [
        f.iter().map(|v| v.max(0.0)).collect::<Vec<f64>>(),
        f.iter().map(|v| (-v).max(0.0)).collect::<Vec<f64>>(),
    ];
    let mut upper = UpperHalfSet::empty(n, grid.len());
    let mut exceptional = LeafSet::empty(n);
    let mut lipschitz = Vec::with_capacity(opts.max_level);
    for j in 1..=opts.max_level {
        let level = num::powi(0.5, j as i32);
        let tol = level * num::pow(level * opts.delta_target / (2.0 * opts.exceedance_constant), 1.0 / p);
        let mut lips = [0.0; 2];
        for (k, part) in parts.iter().enumerate() {
            let (lip, g) = lusin_step(space, part, p, tol);
            lips[k] = lip;
            let diff: Vec<f64> = part.iter().zip(&g).map(|(a, b)| a - b).collect();
            if diff.iter().all(|&d| d == 0.0) {
                continue;
            }
            let field = potential_field(engine, &diff, grid)?;
            upper.union_with(&exceedance_sets(space, &field, grid, level).upper);
            for (x, u) in engine.potential(&diff).into_iter().enumerate() {
                if u >= level {
                    exceptional.insert(x);
                }
            }
        }
        lipschitz.push((lips[0], lips[1]));
    }
    let upper_shadow = shadow(space, &upper, grid);
    let upper_capacity = engine.capacity(&upper_shadow);
    let exceptional_capacity = engine.capacity(&exceptional);
    Ok(ApproximationSplit {
        upper,
        upper_shadow,
        exceptional,
        upper_capacity,
        exceptional_capacity,
        lipschitz,
        delta_target: opts.delta_target,
    })
}

/// For each `eps`, the largest grid radius `r` with
/// `|PI(K f)(P) - K f(x)| < eps` for `x` outside `F` and `P` in `B_rho((x, 0), r)` outside `E`.
pub fn split_modulus(
    engine: &CapacityEngine,
    f: &[f64],
    grid: &HeightGrid,
    split: &ApproximationSplit,
    eps_grid: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let space = engine.space();
    let u = engine.potential(f);
    let field = poisson_field(space, &u, grid)?;
    let mut errors = Vec::new();
    for j in 0..grid.len().saturating_sub(1) {
        let r = grid.height(j);
        let mut worst = 0.0f64;
        for x in 0..space.leaf_count() {
            if split.exceptional.contains(x) {
                continue;
            }
            let span = space.ball(x, r);
            for m in j + 1..grid.len() {
                for x1 in span.iter() {
                    if !split.upper.contains(x1, m) {
                        worst = worst.max((field.get(x1, m) - u[x]).abs());
                    }
                }
            }
        }
        errors.push((r, worst));
    }
    Ok(eps_grid.iter().map(|&e| (e, errors.iter().find(|&&(_, w)| w < e).map(|&(r, _)| r))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub x0: usize,
    pub t: f64,
    /// Largest `|PI(K f)(P) - K f(x0)|` over region points below `t` outside `E`.
    pub sup_error: f64,
    pub in_region_points: usize,
    /// `x0` lies in the exceptional set `F`.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kind: RegionKind,
    pub rows: Vec<ErrorRow>,
    /// Share of sampled `x0` outside `F` whose error at the finest `t` is below `tol`.
    pub fraction_converged: f64,
    /// `(t, m({x0 : region at x0 meets E_t}))`.
    pub bad_set_mass: Vec<(f64, f64)>,
    /// No sampled region holds a grid point off its own base column.
    pub region_trivial: bool,
    pub tol: f64,
}

impl ConvergenceReport {
    /// Error at the finest `t` for every sampled `x0`.
    pub fn finest_errors(&self) -> Vec<(usize, f64)> {
        let t_min = self.rows.iter().map(|r| r.t).fold(f64::INFINITY, f64::min);
        self.rows.iter().filter(|r| r.t == t_min).map(|r| (r.x0, r.sup_error)).collect()
    }
}

/// Errors of `PI(K * f)` against `K * f(x0)` inside an approach region.
///
/// Points of `excluded_upper` are skipped and `x0` in `excluded_base` count as
/// not converged.
#[allow(clippy::too_many_arguments)]
pub fn region_experiment(
    engine: &mut CapacityEngine,
    f: &[f64],
    x0s: &[usize],
    kind: RegionKind,
    grid: &HeightGrid,
    excluded_upper: Option<&UpperHalfSet>,
    excluded_base: Option<&LeafSet>,
    tol: f64,
) -> Result<ConvergenceReport> {
    let n = engine.space().leaf_count();
    if f.len() != n {
        return Err(Error::Length { expected: n, got: f.len() });
    }
    let u = engine.potential(f);
    let field = poisson_field(engine.space(), &u, grid)?;
    let ts = t_grid(grid);
    let radii_for = |engine: &mut CapacityEngine, x0: usize| -> Vec<f64> {
        grid.heights().iter().map(|&y| region_radius(engine, x0, kind, y)).collect()
    };
    let mut rows = Vec::new();
    let mut region_trivial = true;
    let mut converged = 0usize;
    for &x0 in x0s {
        let radii = radii_for(engine, x0);
        let space = engine.space();
        let excluded = excluded_base.is_some_and(|s| s.contains(x0));
        // Per height: sup error and point count inside the region.
        let per_height: Vec<(f64, usize)> = (0..grid.len())
            .map(|m| {
                let span = space.ball(x0, radii[m]);
                let mut worst = 0.0f64;
                let mut count = 0;
                for x in span.iter() {
                    if excluded_upper.is_some_and(|e| e.contains(x, m)) {
                        continue;
                    }
                    worst = worst.max((field.get(x, m) - u[x0]).abs());
                    count += 1;
                }
                if m > 0 && span.len() > 1 {
                    region_trivial = false;
                }
                (worst, count)
            })
            .collect();
        for (j, &t) in ts.iter().enumerate() {
            let below = &per_height[j + 1..];
            let sup_error = below.iter().map(|v| v.0).fold(0.0, f64::max);
            let in_region_points = below.iter().map(|v| v.1).sum();
            rows.push(ErrorRow { x0, t, sup_error, in_region_points, excluded });
        }
        let finest = per_height.last().map_or(0.0, |v| v.0);
        if !excluded && finest < tol {
            converged += 1;
        }
    }
    let bad_set_mass = match excluded_upper {
        None => ts.iter().map(|&t| (t, 0.0)).collect(),
        Some(e) => {
            let w: Vec<f64> = engine.space().weights().to_vec();
            let mut out = Vec::with_capacity(ts.len());
            let all: Vec<Vec<f64>> = (0..n).map(|x0| radii_for(engine, x0)).collect();
            let space = engine.space();
            for &t in &ts {
                let et = truncate_below(e, grid, t);
                let mass: f64 = (0..n)
                    .filter(|&x0| et.iter().any(|(x, m)| space.distance(x, x0) < all[x0][m]))
                    .map(|x0| w[x0])
                    .sum();
                out.push((t, mass));
            }
            out
        }
    };
    let fraction_converged = if x0s.is_empty() { 0.0 } else { converged as f64 / x0s.len() as f64 };
    Ok(ConvergenceReport { kind, rows, fraction_converged, bad_set_mass, region_trivial, tol })
}

pub fn nontangential_experiment(
    engine: &mut CapacityEngine,
    f: &[f64],
    x0s: &[usize],
    grid: &HeightGrid,
    split: Option<&ApproximationSplit>,
    tol: f64,
) -> Result<ConvergenceReport> {
    region_experiment(
        engine,
        f,
        x0s,
        RegionKind::NonTangential,
        grid,
        split.map(|s| &s.upper),
        split.map(|s| &s.exceptional),
        tol,
    )
}

pub fn tangential_experiment(
    engine: &mut CapacityEngine,
    f: &[f64],
    x0s: &[usize],
    kind: RegionKind,
    grid: &HeightGrid,
    split: Option<&ApproximationSplit>,
    tol: f64,
) -> Result<ConvergenceReport> {
    if kind == RegionKind::NonTangential {
        return Err(Error::Invalid("tangential experiment needs a tangential region kind"));
    }
    region_experiment(engine, f, x0s, kind, grid, split.map(|s| &s.upper), split.map(|s| &s.exceptional), tol)
}

/// `p (s - 1/p')`, the contact exponent of the polynomial region.
pub fn polynomial_exponent(s: f64, p: crate::kernel::Exponent) -> f64 {
    p.value() * (s - 1.0 / p.conjugate())
}

/// `Q (p' - 1)`, the exponent of the exponential region in the critical case.
pub fn exponential_exponent(dimension: f64, p: crate::kernel::Exponent) -> f64 {
    dimension * (p.conjugate() - 1.0)
}

//! Dyadic Poisson integral on `X x (0, diam]` and the estimates built on it.
//!
//! `PI(f)(x, y) = C(x, y) y^-Q sum_k 2^{-(Q+1)k} int_{B(x, 2^k y)} f dm`. The
//! `k`-sum stops once the ball is all of `X`; the rest is a geometric tail.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::KernelOperator;
use crate::num;
use crate::space::{LeafSet, ModelSpace};

/// Heights `diam * 2^-m`, strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    heights: Vec<f64>,
}

impl HeightGrid {
    /// `m = 0..=max_m`.
    pub fn dyadic(space: &ModelSpace, max_m: usize) -> Self {
        let d = space.diameter();
        Self { heights: (0..=max_m).map(|m| d * num::powi(0.5, m as i32)).collect() }
    }

    /// Dyadic heights no smaller than the leaf separation, capped at `max_m`.
    ///
    /// Below the separation every ball is a single atom and the discrete measure
    /// stops resembling the continuum one.
    pub fn resolved(space: &ModelSpace, max_m: usize) -> Self {
        let sep = space.min_separation();
        let mut g = Self::dyadic(space, max_m);
        g.heights.retain(|&h| h >= sep);
        g
    }

    pub fn from_heights(heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() || heights.iter().any(|h| !(*h > 0.0)) || heights.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid("heights must be positive and strictly decreasing"));
        }
        Ok(Self { heights })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn height(&self, m: usize) -> f64 {
        self.heights[m]
    }
}

fn check_height(space: &ModelSpace, y: f64) -> Result<()> {
    if y > 0.0 && y <= space.diameter() {
        Ok(())
    } else {
        Err(Error::Invalid("height must lie in (0, diam]"))
    }
}

fn prefix_of(space: &ModelSpace, f: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(f.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for (a, w) in f.iter().zip(space.weights()) {
        acc += a * w;
        prefix.push(acc);
    }
    prefix
}

/// `sum_k 2^{-(Q+1)k} F(B(x, 2^k y))` with `F` given by prefix sums.
fn dyadic_sum(space: &ModelSpace, prefix: &[f64], x: usize, y: f64) -> f64 {
    let n = space.leaf_count();
    let q1 = space.dimension() + 1.0;
    let ratio = num::pow(2.0, -q1);
    let mut weight = 1.0;
    let mut r = y;
    let mut total = 0.0;
    loop {
        let span = space.ball(x, r);
        let mass = prefix[span.end] - prefix[span.start];
        if span.start == 0 && span.end == n {
            return total + mass * weight / (1.0 - ratio);
        }
        total += mass * weight;
        weight *= ratio;
        r *= 2.0;
    }
}

/// `C(x, y)`, making `PI(1) = 1`.
pub fn normalization_constant(space: &ModelSpace, x: usize, y: f64) -> Result<f64> {
    check_height(space, y)?;
    let ones = alloc::vec![1.0; space.leaf_count()];
    let s = dyadic_sum(space, &prefix_of(space, &ones), x, y);
    Ok(num::pow(y, space.dimension()) / s)
}

/// `P(x, y; z)`, the Poisson kernel against `dm(z)`.
pub fn poisson_kernel(space: &ModelSpace, x: usize, y: f64, z: usize) -> Result<f64> {
    let c = normalization_constant(space, x, y)?;
    let q1 = space.dimension() + 1.0;
    let d = space.distance(x, z);
    let mut k = 0;
    let mut r = y;
    while d >= r {
        r *= 2.0;
        k += 1;
    }
    let ratio = num::pow(2.0, -q1);
    Ok(c / num::pow(y, space.dimension()) * num::powi(ratio, k) / (1.0 - ratio))
}

/// Evaluates `PI(f)` at arbitrary points of `X x (0, diam]`.
#[derive(Debug, Clone)]
pub struct PoissonIntegrator<'a> {
    space: &'a ModelSpace,
    prefix: Vec<f64>,
    ones: Vec<f64>,
}

impl<'a> PoissonIntegrator<'a> {
    pub fn new(space: &'a ModelSpace, f: &[f64]) -> Result<Self> {
        if f.len() != space.leaf_count() {
            return Err(Error::Length { expected: space.leaf_count(), got: f.len() });
        }
        let ones = alloc::vec![1.0; f.len()];
        Ok(Self { space, prefix: prefix_of(space, f), ones: prefix_of(space, &ones) })
    }

    pub fn value(&self, x: usize, y: f64) -> f64 {
        dyadic_sum(self.space, &self.prefix, x, y) / dyadic_sum(self.space, &self.ones, x, y)
    }
}

pub fn poisson_integral(space: &ModelSpace, f: &[f64], x: usize, y: f64) -> Result<f64> {
    check_height(space, y)?;
    Ok(PoissonIntegrator::new(space, f)?.value(x, y))
}

/// Double-loop `sum_z P(x, y; z) f(z) w(z)`.
pub fn poisson_integral_naive(space: &ModelSpace, f: &[f64], x: usize, y: f64) -> Result<f64> {
    let w = space.weights();
    let mut total = 0.0;
    for z in 0..space.leaf_count() {
        total += poisson_kernel(space, x, y, z)? * f[z] * w[z];
    }
    Ok(total)
}

/// Values on `leaves x heights`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperHalfField {
    heights: Vec<f64>,
    leaves: usize,
    values: Vec<f64>,
}

impl UpperHalfField {
    pub fn from_fn(grid: &HeightGrid, leaves: usize, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len() * leaves);
        for &y in grid.heights() {
            for x in 0..leaves {
                values.push(f(x, y));
            }
        }
        Self { heights: grid.heights().to_vec(), leaves, values }
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn get(&self, x: usize, m: usize) -> f64 {
        self.values[m * self.leaves + x]
    }

    /// All leaves at height index `m`.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.leaves..(m + 1) * self.leaves]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn poisson_field(space: &ModelSpace, f: &[f64], grid: &HeightGrid) -> Result<UpperHalfField> {
    let pi = PoissonIntegrator::new(space, f)?;
    Ok(UpperHalfField::from_fn(grid, space.leaf_count(), |x, y| pi.value(x, y)))
}

/// `sup_y PI(f)(x, y)` over the grid.
pub fn maximal_function(space: &ModelSpace, f: &[f64], grid: &HeightGrid) -> Result<Vec<f64>> {
    let field = poisson_field(space, f, grid)?;
    Ok((0..space.leaf_count())
        .map(|x| (0..grid.len()).map(|m| field.get(x, m)).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// A set of grid points `(leaf, height index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpperHalfSet {
    leaves: usize,
    levels: usize,
    mask: Vec<bool>,
}

impl UpperHalfSet {
    pub fn empty(leaves: usize, levels: usize) -> Self {
        Self { leaves, levels, mask: alloc::vec![false; leaves * levels] }
    }

    pub fn insert(&mut self, x: usize, m: usize) {
        self.mask[m * self.leaves + x] = true;
    }

    pub fn contains(&self, x: usize, m: usize) -> bool {
        self.mask[m * self.leaves + x]
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Points as `(leaf, height index)`, ordered by height index then leaf.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.leaves;
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % n, i / n))
    }

    pub fn union_with(&mut self, other: &UpperHalfSet) {
        for (a, b) in self.mask.iter_mut().zip(&other.mask) {
            *a |= *b;
        }
    }
}

/// Shadow `union B(x, y)` of an upper-half set on a height grid.
pub fn shadow(space: &ModelSpace, set: &UpperHalfSet, grid: &HeightGrid) -> LeafSet {
    let mut out = LeafSet::empty(space.leaf_count());
    for (x, m) in set.iter() {
        out.insert_span(space.ball(x, grid.height(m)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exceedance {
    /// `E`: grid points where the field exceeds `eps`.
    pub upper: UpperHalfSet,
    /// `E*`: union of the balls `B(x, y)` over `E`.
    pub shadow: LeafSet,
    /// `E'`: the slabs `B(x, y) x {y}` over `E`.
    pub slabs: UpperHalfSet,
}

/// Exceedance sets of a field, typically `PI(K * f)`.
pub fn exceedance_sets(space: &ModelSpace, field: &UpperHalfField, grid: &HeightGrid, eps: f64) -> Exceedance {
    let n = space.leaf_count();
    let mut upper = UpperHalfSet::empty(n, grid.len());
    let mut slabs = UpperHalfSet::empty(n, grid.len());
    for m in 0..grid.len() {
        for x in 0..n {
            if field.get(x, m) > eps {
                upper.insert(x, m);
                for z in space.ball(x, grid.height(m)).iter() {
                    slabs.insert(z, m);
                }
            }
        }
    }
    let shadow = shadow(space, &upper, grid);
    Exceedance { upper, shadow, slabs }
}

/// Smallest kernel ratio `P(x, y; z) / P(x~, y; z)` over `x in B(x~, y)`, all `z` and grid `y`.
///
/// Any `g >= 0` then satisfies `PI(g)(x, y) >= c_H PI(g)(x~, y)`.
pub fn harnack_constant(space: &ModelSpace, grid: &HeightGrid) -> Result<f64> {
    let n = space.leaf_count();
    let mut worst = f64::INFINITY;
    for &y in grid.heights() {
        let kern: Vec<Vec<f64>> = (0..n)
            .map(|x| (0..n).map(|z| poisson_kernel(space, x, y, z)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        for xt in 0..n {
            for x in space.ball(xt, y).iter() {
                for z in 0..n {
                    worst = worst.min(kern[x][z] / kern[xt][z]);
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackReport {
    /// Smallest field value over `E'`, `None` when `E'` is empty.
    pub min_on_slabs: Option<f64>,
    pub c_h: f64,
    pub eps: f64,
    pub pass: bool,
}

pub fn harnack_check(field: &UpperHalfField, slabs: &UpperHalfSet, eps: f64, c_h: f64) -> HarnackReport {
    let min = slabs.iter().map(|(x, m)| field.get(x, m)).fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.min(v)))
    });
    let pass = min.is_none_or(|v| v >= c_h * eps);
    HarnackReport { min_on_slabs: min, c_h, eps, pass }
}

/// Extremes over the grid of `K * (PI f(., y))(x) / PI(K * f)(x, y)`.
pub fn exchange_ratio<K: KernelOperator + ?Sized>(
    space: &ModelSpace,
    op: &K,
    f: &[f64],
    grid: &HeightGrid,
) -> Result<(f64, f64)> {
    let w = space.weights();
    let kf = op.convolve(f, w);
    let outer = PoissonIntegrator::new(space, &kf)?;
    let inner = PoissonIntegrator::new(space, f)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &y in grid.heights() {
        let slice: Vec<f64> = (0..space.leaf_count()).map(|x| inner.value(x, y)).collect();
        let num = op.convolve(&slice, w);
        for (x, a) in num.iter().enumerate() {
            let r = a / outer.value(x, y);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok((lo, hi))
}

/// Named Lipschitz profiles on `[0, 1]` for continuous test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `t`
    Coordinate,
    /// `1 - |2t - 1|`
    Hat,
    /// `16 t^2 (1 - t)^2`, a smooth bump.
    Cosine,
}

impl Profile {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Profile::Coordinate => t,
            Profile::Hat => 1.0 - (2.0 * t - 1.0).abs(),
            Profile::Cosine => 16.0 * t * t * (1.0 - t) * (1.0 - t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Coordinate => "coordinate",
            Profile::Hat => "hat",
            Profile::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coordinate" => Some(Profile::Coordinate),
            "hat" => Some(Profile::Hat),
            "cosine" => Some(Profile::Cosine),
            _ => None,
        }
    }
}

/// `scale * profile(coordinate(x))` at every leaf.
pub fn continuous_profile(space: &ModelSpace, profile: Profile, scale: f64) -> Vec<f64> {
    (0..space.leaf_count()).map(|x| scale * profile.eval(space.coordinate(x))).collect()
}

/// For each `eps`, the largest grid radius `delta` with
/// `|PI(g)(x, y) - g(x0)| <= eps` whenever `d(x, x0) < delta` and `y < delta`.
pub fn uniform_continuity_probe(
    space: &ModelSpace,
    g: &[f64],
    eps_grid: &[f64],
    grid: &HeightGrid,
) -> Result<Vec<(f64, Option<f64>)>> {
    let field = poisson_field(space, g, grid)?;
    let n = space.leaf_count();
    // sup error for the radius grid.height(j), using the heights below it.
    let mut errors = Vec::with_capacity(grid.len().saturating_sub(1));
    for j in 0..grid.len().saturating_sub(1) {
        let delta = grid.height(j);
        let mut worst = 0.0f64;
        for x0 in 0..n {
            let span = space.ball(x0, delta);
            for m in j + 1..grid.len() {
                let row = field.row(m);
                for x in span.iter() {
                    worst = worst.max((row[x] - g[x0]).abs());
                }
            }
        }
        errors.push((delta, worst));
    }
    Ok(eps_grid
        .iter()
        .map(|&eps| (eps, errors.iter().find(|&&(_, e)| e <= eps).map(|&(d, _)| d)))
        .collect())
}

/// Extends values on the `b^k` cylinders of depth `k` to a leaf function.
pub fn refine_cylinders(space: &ModelSpace, coarse: &[f64]) -> Result<Vec<f64>> {
    let n = space.leaf_count();
    if coarse.is_empty() || !n.is_multiple_of(coarse.len()) {
        return Err(Error::Length { expected: n, got: coarse.len() });
    }
    let block = n / coarse.len();
    Ok((0..n).map(|x| coarse[x / block]).collect())
}

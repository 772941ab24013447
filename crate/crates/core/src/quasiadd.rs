//! Separated ball families and the two quasi-additivity experiments.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity::CapacityEngine;
use crate::error::{Error, Result};
use crate::kernel::{Exponent, KernelNorm};
use crate::num;
use crate::space::{LeafSet, LeafSpan, ModelSpace};

/// `[(2^{p'-1} + 1) ||K||_1^{p'} + 2^{p'-1}]^{1/(p'-1)}`.
pub fn theoretical_constant_a(norm: KernelNorm, p: Exponent) -> f64 {
    let pp = p.conjugate();
    let two = num::pow(2.0, pp - 1.0);
    num::pow((two + 1.0) * num::pow(norm.value(), pp) + two, 1.0 / (pp - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparationMode {
    /// Enlarged balls `B_rho(x, eta*(x, r))`.
    Tree,
    /// Enlarged balls `B_d(x, psi * eta*_X(x, m r))`.
    Ahlfors { m: f64, psi: f64 },
}

impl SeparationMode {
    pub fn name(&self) -> &'static str {
        match self {
            SeparationMode::Tree => "tree",
            SeparationMode::Ahlfors { .. } => "ahlfors",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMember {
    pub center: usize,
    pub radius: f64,
    pub enlarged_radius: f64,
    pub ball: LeafSpan,
    pub enlarged: LeafSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyWarning {
    /// The sampler ran out of attempts before reaching the requested size.
    Exhausted { requested: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedFamily {
    pub members: Vec<FamilyMember>,
    pub mode: SeparationMode,
    /// Candidates dropped because their radius `eta` does not exist.
    pub skipped_without_eta: usize,
    pub warning: Option<FamilyWarning>,
}

impl SeparatedFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sampler settings for [`generate_separated_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub count: usize,
    pub seed: u64,
    pub mode: SeparationMode,
    /// Radii are drawn as `delta^n` with `n` uniform in this range.
    pub levels: RangeInclusive<usize>,
    pub max_attempts: usize,
}

impl FamilySpec {
    pub fn new(count: usize, seed: u64, mode: SeparationMode, levels: RangeInclusive<usize>) -> Self {
        Self { count, seed, mode, levels, max_attempts: 40 * count + 200 }
    }
}

/// Greedy random family whose enlarged balls are pairwise disjoint.
pub fn generate_separated_family(engine: &mut CapacityEngine, spec: &FamilySpec) -> Result<SeparatedFamily> {
    if spec.count == 0 {
        return Err(Error::Invalid("family size must be at least 1"));
    }
    if let SeparationMode::Ahlfors { m, psi } = spec.mode {
        if !(m >= 1.0 && psi >= 1.0) {
            return Err(Error::Invalid("separation constants must satisfy M >= 1 and psi >= 1"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = engine.space().leaf_count();
    let delta = engine.space().delta();
    let mut members: Vec<FamilyMember> = Vec::new();
    let mut skipped = 0;
    for _ in 0..spec.max_attempts {
        if members.len() == spec.count {
            break;
        }
        let center = rng.gen_range(0..n);
        let level = rng.gen_range(spec.levels.clone());
        let radius = num::powi(delta, level as i32);
        let enlarged_radius = match spec.mode {
            SeparationMode::Tree => {
                let eta = engine.eta_tree(center, radius);
                if eta.eta.is_none() {
                    skipped += 1;
                    continue;
                }
                eta.eta_star
            }
            SeparationMode::Ahlfors { m, psi } => {
                let eta = engine.eta_x(center, m * radius);
                if eta.eta.is_none() {
                    skipped += 1;
                    continue;
                }
                psi * eta.eta_star
            }
        };
        let space = engine.space();
        let enlarged = space.ball(center, enlarged_radius);
        if members.iter().all(|m| !m.enlarged.intersects(&enlarged)) {
            members.push(FamilyMember { center, radius, enlarged_radius, ball: space.ball(center, radius), enlarged });
        }
    }
    let warning = (members.len() < spec.count)
        .then_some(FamilyWarning::Exhausted { requested: spec.count, found: members.len() });
    Ok(SeparatedFamily { members, mode: spec.mode, skipped_without_eta: skipped, warning })
}

/// Pairs of members whose enlarged balls share a leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationCertificate {
    pub violations: Vec<(usize, usize)>,
}

impl SeparationCertificate {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_separation(space: &ModelSpace, family: &SeparatedFamily) -> SeparationCertificate {
    let n = space.leaf_count();
    let sets: Vec<LeafSet> = family.members.iter().map(|m| LeafSet::from_span(n, m.enlarged)).collect();
    let mut violations = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !sets[i].is_disjoint(&sets[j]) {
                violations.push((i, j));
            }
        }
    }
    SeparationCertificate { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetShape {
    FullBall,
    Singleton,
    /// Each leaf of the ball with probability 1/2; the center is always kept.
    HalfDensity,
}

impl SetShape {
    pub const ALL: [SetShape; 3] = [SetShape::FullBall, SetShape::Singleton, SetShape::HalfDensity];

    pub fn name(self) -> &'static str {
        match self {
            SetShape::FullBall => "full-ball",
            SetShape::Singleton => "singleton",
            SetShape::HalfDensity => "half-density",
        }
    }
}

/// Subsets `E_j` of the members' balls `B(x_j, r_j)`.
pub fn family_sets(space: &ModelSpace, family: &SeparatedFamily, shape: SetShape, seed: u64) -> Vec<LeafSet> {
    let n = space.leaf_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    family
        .members
        .iter()
        .map(|m| match shape {
            SetShape::FullBall => LeafSet::from_span(n, m.ball),
            SetShape::Singleton => LeafSet::from_leaves(n, [m.center]),
            SetShape::HalfDensity => {
                let mut s = LeafSet::from_leaves(n, [m.center]);
                for l in m.ball.iter() {
                    if rng.gen_bool(0.5) {
                        s.insert(l);
                    }
                }
                s
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentReport {
    pub mode: SeparationMode,
    pub members: usize,
    pub sum_capacity: f64,
    pub union_capacity: f64,
    pub ratio: f64,
    /// `A` in tree mode; `None` in Ahlfors mode.
    pub bound: Option<f64>,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl ExperimentReport {
    pub fn pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

fn set_capacity(engine: &CapacityEngine, set: &LeafSet) -> f64 {
    if set.count() == 1 {
        engine.singleton(set.iter().next().unwrap())
    } else {
        engine.capacity(set)
    }
}

fn measure_ratio(engine: &CapacityEngine, family: &SeparatedFamily, sets: &[LeafSet]) -> Result<(f64, f64)> {
    if sets.len() != family.len() || family.is_empty() {
        return Err(Error::Invalid("need one nonempty set per family member"));
    }
    if !verify_separation(engine.space(), family).pass() {
        return Err(Error::Invalid("family is not separated"));
    }
    let n = engine.space().leaf_count();
    for (m, e) in family.members.iter().zip(sets) {
        if e.is_empty() || !e.is_subset(&LeafSet::from_span(n, m.ball)) {
            return Err(Error::Invalid("each set must be a nonempty subset of its ball"));
        }
    }
    let sum: f64 = sets.iter().map(|e| set_capacity(engine, e)).sum();
    let mut union = LeafSet::empty(n);
    for e in sets {
        union.union_with(e);
    }
    Ok((sum, set_capacity(engine, &union)))
}

/// Checks `sum_j C(E_j) <= A C(union E_j)` and subadditivity for a separated family.
pub fn quasi_additivity_tree(engine: &CapacityEngine, family: &SeparatedFamily, sets: &[LeafSet]) -> Result<ExperimentReport> {
    let (sum, union) = measure_ratio(engine, family, sets)?;
    let a = theoretical_constant_a(engine.kernel_norm(), engine.exponent());
    let ratio = sum / union;
    Ok(ExperimentReport {
        mode: family.mode,
        members: family.len(),
        sum_capacity: sum,
        union_capacity: union,
        ratio,
        bound: Some(a),
        lower_ok: ratio >= 1.0 - 1e-9,
        upper_ok: ratio <= a * (1.0 + 1e-6),
    })
}

/// Same measurement in the Ahlfors setting, where only subadditivity has a known bound.
pub fn quasi_additivity_ahlfors(engine: &CapacityEngine, family: &SeparatedFamily, sets: &[LeafSet]) -> Result<ExperimentReport> {
    let (sum, union) = measure_ratio(engine, family, sets)?;
    let ratio = sum / union;
    Ok(ExperimentReport {
        mode: family.mode,
        members: family.len(),
        sum_capacity: sum,
        union_capacity: union,
        ratio,
        bound: None,
        lower_ok: ratio >= 1.0 - 1e-9,
        upper_ok: ratio.is_finite(),
    })
}

pub const PSI_GRID: [f64; 7] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];

#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate {
    pub psi: f64,
    /// `(psi, max ratio over the batch)` for every grid value.
    pub max_ratios: Vec<(f64, f64)>,
    pub stabilized: bool,
}

/// Largest ratio over a seeded batch of Ahlfors-mode families.
pub fn batch_max_ratio(
    engine: &mut CapacityEngine,
    m: f64,
    psi: f64,
    count: usize,
    levels: RangeInclusive<usize>,
    shape: SetShape,
    seeds: &[u64],
) -> Result<f64> {
    let mut worst = 1.0f64;
    for &seed in seeds {
        let spec = FamilySpec::new(count, seed, SeparationMode::Ahlfors { m, psi }, levels.clone());
        let fam = generate_separated_family(engine, &spec)?;
        if fam.len() < 2 {
            continue;
        }
        let sets = family_sets(engine.space(), &fam, shape, seed);
        worst = worst.max(quasi_additivity_ahlfors(engine, &fam, &sets)?.ratio);
    }
    Ok(worst)
}

/// Smallest grid value of `psi` after which the batch maximum changes by less than 5%.
pub fn estimate_psi(
    engine: &mut CapacityEngine,
    m: f64,
    count: usize,
    levels: RangeInclusive<usize>,
    shape: SetShape,
    seeds: &[u64],
) -> Result<PsiEstimate> {
    if seeds.len() < 10 {
        return Err(Error::Invalid("psi estimation needs at least 10 seeds"));
    }
    let mut max_ratios = Vec::with_capacity(PSI_GRID.len());
    for &psi in &PSI_GRID {
        max_ratios.push((psi, batch_max_ratio(engine, m, psi, count, levels.clone(), shape, seeds)?));
    }
    for w in max_ratios.windows(2) {
        if (w[1].1 - w[0].1).abs() < 0.05 * w[0].1 {
            return Ok(PsiEstimate { psi: w[0].0, max_ratios, stabilized: true });
        }
    }
    Ok(PsiEstimate { psi: PSI_GRID[PSI_GRID.len() - 1], max_ratios, stabilized: false })
}

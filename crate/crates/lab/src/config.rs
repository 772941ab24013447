//! Experiment configuration.
//!
//! The file is TOML with one level of sections; every key has a default, so
//! an empty file is a valid configuration. See `docs/config.md` for the
//! grammar.

use std::path::Path;

use potlab_core::capacity::SolverOptions;
use potlab_core::kernel::{Exponent, RadialKernel};
use potlab_core::poisson::{HeightGrid, Profile};
use potlab_core::quasiadd::{SeparationMode, SetShape};
use potlab_core::space::{MassProfile, ModelSpace, SpaceKind, TreeSpace};
use serde::Deserialize;

use crate::error::{LabError, LabResult};
use crate::spaceio;

fn d_seed() -> u64 {
    7
}
fn d_kind() -> String {
    "tree".into()
}
fn d_b() -> usize {
    2
}
fn d_depth() -> usize {
    10
}
fn d_delta() -> f64 {
    0.5
}
fn d_uniform() -> String {
    "uniform".into()
}
fn d_riesz() -> String {
    "riesz".into()
}
fn d_p() -> f64 {
    2.0
}
fn d_s() -> f64 {
    0.75
}
fn d_one() -> f64 {
    1.0
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub ball_profile: BallProfileSection,
    #[serde(default)]
    pub quasiadd: QuasiaddSection,
    #[serde(default)]
    pub poisson: PoissonSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(default = "d_kind")]
    pub kind: String,
    #[serde(default = "d_b")]
    pub b: usize,
    #[serde(default = "d_depth", rename = "N", alias = "depth")]
    pub depth: usize,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default, rename = "Q", alias = "dimension")]
    pub dimension: Option<f64>,
    #[serde(default = "d_uniform")]
    pub mass_profile: String,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Flat-text space file; replaces every other key of the section.
    #[serde(default)]
    pub file: Option<String>,
}

impl Default for SpaceSection {
    fn default() -> Self {
        Self {
            kind: d_kind(),
            b: d_b(),
            depth: d_depth(),
            delta: d_delta(),
            dimension: None,
            mass_profile: d_uniform(),
            weights: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "d_riesz")]
    pub kind: String,
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_s")]
    pub s: f64,
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default = "d_one")]
    pub scale: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { kind: d_riesz(), p: d_p(), s: d_s(), levels: None, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver_tol: f64,
    pub max_iters: usize,
    pub feasibility_slack: f64,
    pub gap_accept: f64,
    pub thin_tol: f64,
    pub singleton_rel: f64,
    pub slope_rel: f64,
    pub log_product_ratio: f64,
    pub normalization: f64,
    pub stability: f64,
    pub nontangential_error: f64,
    pub tangential_error: f64,
    pub nontangential_fraction: f64,
    pub tangential_fraction: f64,
    pub excluded_capacity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_tol: 1e-8,
            max_iters: 10_000,
            feasibility_slack: 1e-9,
            gap_accept: 1e-3,
            thin_tol: 1e-3,
            singleton_rel: 1e-6,
            slope_rel: 0.1,
            log_product_ratio: 2.0,
            normalization: 1e-12,
            stability: 0.1,
            nontangential_error: 0.02,
            tangential_error: 0.05,
            nontangential_fraction: 0.95,
            tangential_fraction: 0.90,
            excluded_capacity: 0.05,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    pub balls: Vec<BallSpec>,
    pub leaf_sets: Vec<Vec<usize>>,
    pub singletons: Vec<usize>,
    /// Extra random target sets drawn from the run seed.
    pub random_sets: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallProfileSection {
    pub center: usize,
    pub levels: [usize; 2],
}

impl Default for BallProfileSection {
    fn default() -> Self {
        Self { center: 0, levels: [2, 8] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiaddSection {
    pub mode: String,
    pub seeds: usize,
    pub count: usize,
    pub levels: [usize; 2],
    pub shapes: Vec<String>,
    #[serde(rename = "M")]
    pub m: f64,
    /// Fixed separation constant; estimated from the batch when absent.
    pub psi: Option<f64>,
}

impl Default for QuasiaddSection {
    fn default() -> Self {
        Self {
            mode: "tree".into(),
            seeds: 20,
            count: 6,
            levels: [2, 6],
            shapes: SetShape::ALL.iter().map(|s| s.name().to_string()).collect(),
            m: 1.0,
            psi: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonSection {
    /// Heights `diam 2^-m` for `m = 0..=M`.
    #[serde(rename = "M")]
    pub max_m: usize,
    /// Drop heights below the leaf separation.
    pub resolved: bool,
    /// Random nonnegative functions per batch.
    pub functions: usize,
    /// Depth of the cylinders on which random functions are constant.
    pub coarse_depth: usize,
    /// Depth where constants are calibrated; defaults to the space depth.
    pub calibration_depth: Option<usize>,
    /// Depth where calibrated constants are checked; defaults to two levels finer.
    pub check_depth: Option<usize>,
    pub harnack_quantile: f64,
    pub eps_fractions: Vec<f64>,
}

impl Default for PoissonSection {
    fn default() -> Self {
        Self {
            max_m: 20,
            resolved: true,
            functions: 20,
            coarse_depth: 4,
            calibration_depth: None,
            check_depth: None,
            harnack_quantile: 0.7,
            eps_fractions: vec![0.3, 0.6, 0.9],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub samples: usize,
    pub profile: String,
    pub region: String,
    pub c: f64,
    pub psi: f64,
    pub delta_target: f64,
    pub max_level: usize,
    pub split_constant: f64,
    pub split: bool,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            samples: 64,
            profile: "hat".into(),
            region: "polynomial".into(),
            c: 1.0,
            psi: 1.5,
            delta_target: 0.05,
            max_level: 5,
            split_constant: 1.0,
            split: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub charts: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { charts: d_true() }
    }
}

/// Parsed configuration plus the canonical text it was built from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub canonical: String,
}

/// Applies `KEY=VAL`; a bare key addresses the `tolerances` section.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> LabResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| LabError::config("tol-override", format!("expected KEY=VAL, got {spec:?}")))?;
    let key = key.trim();
    let path: Vec<&str> = if key.contains('.') { key.split('.').collect() } else { vec!["tolerances", key] };
    if path.len() != 2 || path.iter().any(|p| p.is_empty()) {
        return Err(LabError::config(key, "override keys have the form section.key"));
    }
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let section = table
        .entry(path[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section {
        toml::Value::Table(t) => {
            t.insert(path[1].to_string(), value);
            Ok(())
        }
        _ => Err(LabError::config(path[0], "not a section")),
    }
}

pub fn parse(text: &str, overrides: &[String], seed: Option<u64>) -> LabResult<LoadedConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| LabError::config("syntax", one_line(&e.to_string())))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed).map_err(|_| LabError::config("seed", "seed must fit in a signed 64-bit integer"))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    let canonical = toml::to_string(&table).map_err(|e| LabError::config("syntax", one_line(&e.to_string())))?;
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| LabError::config("schema", one_line(&e.to_string())))?;
    config.validate()?;
    Ok(LoadedConfig { config, canonical })
}

pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> LabResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let mut loaded = parse(&text, overrides, seed)?;
    if let Some(file) = &loaded.config.space.file {
        let resolved = path.parent().map(|d| d.join(file)).unwrap_or_else(|| file.into());
        loaded.config.space.file = Some(resolved.to_string_lossy().into_owned());
    }
    Ok(loaded)
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn check(ok: bool, key: &str, msg: &str) -> LabResult<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::config(key, msg))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> LabResult<()> {
        let sp = &self.space;
        if sp.file.is_none() {
            let kind = SpaceKind::parse(&sp.kind);
            check(kind.is_some(), "space.kind", "expected tree, interval or cantor")?;
            check(sp.b >= 2, "space.b", "branching must be at least 2")?;
            check(sp.depth >= 1, "space.N", "depth must be at least 1")?;
            check(sp.delta > 0.0 && sp.delta < 1.0, "space.delta", "delta must lie in (0, 1)")?;
            check(
                (sp.b as f64).powi(sp.depth as i32) <= potlab_core::space::MAX_LEAVES as f64,
                "space.N",
                "too many leaves",
            )?;
            match sp.mass_profile.as_str() {
                "uniform" => {}
                "custom" => check(sp.weights.is_some(), "space.weights", "custom mass profile needs weights")?,
                _ => return Err(LabError::config("space.mass_profile", "expected uniform or custom")),
            }
        }
        if let Some(q) = sp.dimension {
            check(q.is_finite() && q > 0.0, "space.Q", "dimension must be positive")?;
        }
        let k = &self.kernel;
        check(k.p.is_finite() && k.p > 1.0, "kernel.p", "p must satisfy 1 < p < inf")?;
        let pp = k.p / (k.p - 1.0);
        match k.kind.as_str() {
            "riesz" => check(
                k.s >= 1.0 / pp - 1e-12 && k.s < 1.0,
                "kernel.s",
                "s must satisfy 1/p' <= s < 1",
            )?,
            "levels" => check(k.levels.is_some(), "kernel.levels", "levels kernel needs a value list")?,
            _ => return Err(LabError::config("kernel.kind", "expected riesz or levels")),
        }
        check(k.scale.is_finite() && k.scale > 0.0, "kernel.scale", "scale must be positive")?;
        let t = &self.tolerances;
        for (name, v) in [
            ("solver_tol", t.solver_tol),
            ("feasibility_slack", t.feasibility_slack),
            ("gap_accept", t.gap_accept),
            ("thin_tol", t.thin_tol),
            ("singleton_rel", t.singleton_rel),
            ("slope_rel", t.slope_rel),
            ("log_product_ratio", t.log_product_ratio),
            ("normalization", t.normalization),
            ("stability", t.stability),
            ("nontangential_error", t.nontangential_error),
            ("tangential_error", t.tangential_error),
            ("excluded_capacity", t.excluded_capacity),
        ] {
            check(v.is_finite() && v > 0.0, &format!("tolerances.{name}"), "must be positive")?;
        }
        for (name, v) in [("nontangential_fraction", t.nontangential_fraction), ("tangential_fraction", t.tangential_fraction)] {
            check((0.0..=1.0).contains(&v), &format!("tolerances.{name}"), "must lie in [0, 1]")?;
        }
        check(t.max_iters >= 1, "tolerances.max_iters", "must be at least 1")?;
        for b in &self.capacity.balls {
            check(b.radius >= 0.0, "capacity.balls", "radius must be nonnegative")?;
        }
        let bp = &self.ball_profile;
        check(bp.levels[0] <= bp.levels[1], "ball_profile.levels", "levels must be increasing")?;
        let q = &self.quasiadd;
        check(matches!(q.mode.as_str(), "tree" | "ahlfors"), "quasiadd.mode", "expected tree or ahlfors")?;
        check(q.count >= 1, "quasiadd.count", "must be at least 1")?;
        check(q.seeds >= 1, "quasiadd.seeds", "must be at least 1")?;
        check(q.levels[0] <= q.levels[1], "quasiadd.levels", "levels must be increasing")?;
        check(q.m >= 1.0, "quasiadd.M", "M must be at least 1")?;
        if let Some(psi) = q.psi {
            check(psi >= 1.0, "quasiadd.psi", "psi must be at least 1")?;
        }
        for s in &q.shapes {
            check(parse_shape(s).is_some(), "quasiadd.shapes", "expected full-ball, singleton or half-density")?;
        }
        let p = &self.poisson;
        check(p.max_m >= 1, "poisson.M", "M must be at least 1")?;
        check(p.functions >= 1, "poisson.functions", "must be at least 1")?;
        check((0.0..1.0).contains(&p.harnack_quantile), "poisson.harnack_quantile", "must lie in [0, 1)")?;
        check(p.eps_fractions.iter().all(|&e| e > 0.0), "poisson.eps_fractions", "must be positive")?;
        let c = &self.convergence;
        check(c.samples >= 1, "convergence.samples", "must be at least 1")?;
        check(Profile::parse(&c.profile).is_some(), "convergence.profile", "expected coordinate, hat or cosine")?;
        check(
            matches!(c.region.as_str(), "eta-star" | "polynomial" | "exponential"),
            "convergence.region",
            "expected eta-star, polynomial or exponential",
        )?;
        check(c.c > 0.0, "convergence.c", "must be positive")?;
        check(c.psi >= 1.0, "convergence.psi", "psi must be at least 1")?;
        check(c.delta_target > 0.0, "convergence.delta_target", "must be positive")?;
        check(c.split_constant > 0.0, "convergence.split_constant", "must be positive")?;
        Ok(())
    }

    pub fn exponent(&self) -> Exponent {
        Exponent::new(self.kernel.p).expect("validated")
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tolerances.solver_tol,
            max_iters: self.tolerances.max_iters,
            feasibility_slack: self.tolerances.feasibility_slack,
        }
    }

    /// The configured space at its own depth.
    pub fn build_space(&self) -> LabResult<ModelSpace> {
        self.build_space_at(None)
    }

    /// The configured space at another depth; custom weights only fit their own depth.
    pub fn build_space_at(&self, depth: Option<usize>) -> LabResult<ModelSpace> {
        let sp = &self.space;
        if let Some(file) = &sp.file {
            let space = spaceio::read(Path::new(file))?;
            if depth.is_some_and(|d| d != space.depth()) {
                return Err(LabError::config("space.file", "a space file fixes its depth"));
            }
            return Ok(space);
        }
        let kind = SpaceKind::parse(&sp.kind).expect("validated");
        let n = depth.unwrap_or(sp.depth);
        let profile = match (&sp.weights, depth) {
            (Some(w), None) if sp.mass_profile == "custom" => MassProfile::Custom(w.clone()),
            (Some(_), Some(_)) if sp.mass_profile == "custom" => {
                return Err(LabError::config("space.weights", "custom weights cannot be rebuilt at another depth"))
            }
            _ => MassProfile::Uniform,
        };
        let mut space = match kind {
            SpaceKind::TreeBoundary => ModelSpace::tree_boundary(TreeSpace::new(sp.b, n, sp.delta, profile)?),
            _ => ModelSpace::build(kind, sp.b, n, sp.delta, profile)?,
        };
        if let Some(q) = sp.dimension {
            space = space.with_dimension(q)?;
        }
        Ok(space)
    }

    pub fn radial_kernel(&self, space: &ModelSpace) -> LabResult<RadialKernel> {
        let k = &self.kernel;
        Ok(match k.kind.as_str() {
            "levels" => RadialKernel::levels(k.levels.clone().unwrap_or_default())?.scaled(k.scale),
            _ => RadialKernel::riesz(space.dimension(), k.s, self.exponent())?.scaled(k.scale),
        })
    }

    pub fn height_grid(&self, space: &ModelSpace) -> HeightGrid {
        if self.poisson.resolved {
            HeightGrid::resolved(space, self.poisson.max_m)
        } else {
            HeightGrid::dyadic(space, self.poisson.max_m)
        }
    }

    pub fn separation_mode(&self, psi: f64) -> SeparationMode {
        match self.quasiadd.mode.as_str() {
            "ahlfors" => SeparationMode::Ahlfors { m: self.quasiadd.m, psi },
            _ => SeparationMode::Tree,
        }
    }

    pub fn shapes(&self) -> Vec<SetShape> {
        self.quasiadd.shapes.iter().filter_map(|s| parse_shape(s)).collect()
    }
}

pub fn parse_shape(s: &str) -> Option<SetShape> {
    SetShape::ALL.into_iter().find(|x| x.name() == s)
}

//! The experiments behind each subcommand.
//!
//! Every function is pure apart from the rayon pool it may use: it returns an
//! [`Outcome`] and the runner decides what reaches the disk.

use potlab_core::capacity::{ball_capacity_profile, CapacityEngine, ProfileStatistic};
use potlab_core::convergence::{
    approximation_split, exceptional_capacity_bound, exponential_exponent, nontangential_experiment,
    polynomial_exponent, potential_field, tangential_experiment, thinness_decay, ConvergenceReport, RegionKind,
    SplitOptions,
};
use potlab_core::kernel::{check_riesz_range, Operator};
use potlab_core::poisson::{
    continuous_profile, exceedance_sets, exchange_ratio, harnack_check, harnack_constant, normalization_constant,
    refine_cylinders, HeightGrid, PoissonIntegrator, Profile,
};
use potlab_core::quasiadd::{
    estimate_psi, family_sets, generate_separated_family, quasi_additivity_ahlfors, quasi_additivity_tree,
    FamilySpec, SeparationMode,
};
use potlab_core::space::{ahlfors_constants, LeafSet, ModelSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{line_chart, Scale, Series};
use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{num, Check, Outcome, Table};
use crate::spaceio;

/// Independent stream for item `i` of experiment `tag`.
pub fn derive_seed(base: u64, tag: u64, i: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.set_word_pos(u128::from(i) * 16);
    rng.gen()
}

const TAG_CAPACITY: u64 = 1;
const TAG_QUASIADD: u64 = 2;
const TAG_DENSITY: u64 = 3;

pub fn build_engine(cfg: &ExperimentConfig, space: ModelSpace) -> LabResult<CapacityEngine> {
    let k = &cfg.kernel;
    let p = cfg.exponent();
    let engine = match k.kind.as_str() {
        "levels" => {
            let kernel = cfg.radial_kernel(&space)?;
            CapacityEngine::radial(space, &kernel, p, cfg.solver_options())?
        }
        _ => {
            check_riesz_range(k.s, p)?;
            let op = Operator::riesz(&space, k.s, k.scale)?;
            CapacityEngine::new(space, op, p, cfg.solver_options())?
        }
    };
    Ok(engine)
}

/// Nonnegative density constant on the cylinders of depth `min(coarse_depth, N)`.
///
/// The coarse values depend only on `seed`, so the same seed gives the same
/// continuum function at every depth.
pub fn random_density(space: &ModelSpace, coarse_depth: usize, seed: u64) -> LabResult<Vec<f64>> {
    let b = space.tree().branching();
    let k = coarse_depth.min(space.depth());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse: Vec<f64> = (0..b.pow(k as u32)).map(|_| rng.gen::<f64>()).collect();
    Ok(refine_cylinders(space, &coarse)?)
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).floor() as usize]
}

fn minmax(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn leaf(space: &ModelSpace, x: usize, key: &str) -> LabResult<usize> {
    if x < space.leaf_count() {
        Ok(x)
    } else {
        Err(LabError::config(key, format!("leaf {x} out of range 0..{}", space.leaf_count())))
    }
}

pub fn space_info(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let space = cfg.build_space()?;
    let (k1, k2) = ahlfors_constants(&space);
    let mut t = Table::new("space", &["quantity", "value"]);
    let rows = [
        ("leaves", space.leaf_count() as f64),
        ("branching", space.tree().branching() as f64),
        ("depth", space.depth() as f64),
        ("delta", space.delta()),
        ("Q", space.dimension()),
        ("diameter", space.diameter()),
        ("total_mass", space.total_mass()),
        ("K1", k1),
        ("K2", k2),
    ];
    let mut out = Outcome::default();
    out.lines.push(format!("kind={}", space.kind().name()));
    for (q, v) in rows {
        t.push(vec![q.into(), num(v)]);
        out.lines.push(format!("{q}={v}"));
    }
    out.tables.push(t);
    out.files.push(("space.txt".into(), spaceio::to_text(&space)));
    out.checks.push(Check::new("space.ahlfors_positive", k1, k2, k1 > 0.0 && k2.is_finite() && k1 <= k2));
    Ok(out)
}

struct Target {
    id: String,
    set: LeafSet,
    singleton: Option<usize>,
}

fn capacity_targets(cfg: &ExperimentConfig, space: &ModelSpace) -> LabResult<Vec<Target>> {
    let n = space.leaf_count();
    let c = &cfg.capacity;
    let mut out = Vec::new();
    for (i, b) in c.balls.iter().enumerate() {
        let x = leaf(space, b.center, "capacity.balls")?;
        out.push(Target { id: format!("ball-{i}"), set: LeafSet::from_span(n, space.ball(x, b.radius)), singleton: None });
    }
    for (i, s) in c.leaf_sets.iter().enumerate() {
        for &x in s {
            leaf(space, x, "capacity.leaf_sets")?;
        }
        if s.is_empty() {
            return Err(LabError::config("capacity.leaf_sets", "leaf sets must be nonempty"));
        }
        out.push(Target { id: format!("set-{i}"), set: LeafSet::from_leaves(n, s.iter().copied()), singleton: None });
    }
    for &x in &c.singletons {
        leaf(space, x, "capacity.singletons")?;
        out.push(Target { id: format!("singleton-{x}"), set: LeafSet::from_leaves(n, [x]), singleton: Some(x) });
    }
    for i in 0..c.random_sets {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_CAPACITY, i as u64));
        let density = rng.gen_range(0.05..0.5);
        let mut set = LeafSet::from_leaves(n, [rng.gen_range(0..n)]);
        for x in 0..n {
            if rng.gen_bool(density) {
                set.insert(x);
            }
        }
        out.push(Target { id: format!("random-{i}"), set, singleton: None });
    }
    if out.is_empty() {
        out.push(Target { id: "singleton-0".into(), set: LeafSet::from_leaves(n, [0]), singleton: Some(0) });
        out.push(Target {
            id: "ball-0".into(),
            set: LeafSet::from_span(n, space.ball(0, space.delta())),
            singleton: None,
        });
    }
    Ok(out)
}

pub fn capacity(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let space = cfg.build_space()?;
    let engine = build_engine(cfg, space.clone())?;
    let targets = capacity_targets(cfg, &space)?;
    let sols: Vec<_> = targets.par_iter().map(|t| engine.solve(&t.set)).collect();
    let (p, s) = (cfg.kernel.p, cfg.kernel.s);
    let mut table = Table::new("capacity", &["set_id", "p", "s", "value", "gap", "iterations", "converged"]);
    let mut worst_gap = 0.0f64;
    let mut unconverged = 0usize;
    let mut singleton_err: Option<f64> = None;
    for (t, sol) in targets.iter().zip(&sols) {
        table.push(vec![
            t.id.clone(),
            num(p),
            num(s),
            num(sol.value),
            num(sol.relative_gap),
            sol.iterations.to_string(),
            sol.converged.to_string(),
        ]);
        worst_gap = worst_gap.max(sol.relative_gap);
        unconverged += usize::from(!sol.converged);
        if let Some(x) = t.singleton {
            let exact = engine.singleton(x);
            let e = (sol.value - exact).abs() / exact;
            singleton_err = Some(singleton_err.map_or(e, |m: f64| m.max(e)));
        }
    }
    let mut potential = Table::new("potential", &["leaf_index", "value"]);
    for (x, v) in engine.potential(&sols[0].density).iter().enumerate() {
        potential.push(vec![x.to_string(), num(*v)]);
    }
    let tol = &cfg.tolerances;
    let mut out = Outcome::default();
    out.lines.push(format!("capacity targets={} worst_gap={worst_gap:e} below_tol_by_iteration_cap={unconverged}", targets.len()));
    out.tables.push(table);
    out.tables.push(potential);
    out.checks.push(Check::new("capacity.certified", worst_gap, tol.gap_accept, worst_gap <= tol.gap_accept));
    if let Some(e) = singleton_err {
        out.checks.push(Check::at_most("capacity.singleton_closed_form", e, tol.singleton_rel));
    }
    Ok(out)
}

pub fn ball_profile(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let space = cfg.build_space()?;
    let x = leaf(&space, cfg.ball_profile.center, "ball_profile.center")?;
    let [lo, hi] = cfg.ball_profile.levels;
    let hi = hi.min(space.depth() - 1);
    if lo > hi {
        return Err(LabError::config("ball_profile.levels", "no level below the space depth"));
    }
    let mut engine = build_engine(cfg, space)?;
    let profile = ball_capacity_profile(&mut engine, x, lo..=hi, cfg.kernel.s);
    let mut rows = Table::new("ball_profile", &["level", "radius", "capacity"]);
    for r in &profile.rows {
        rows.push(vec![r.level.to_string(), num(r.radius), num(r.capacity)]);
    }
    let tol = &cfg.tolerances;
    let mut summary = Table::new("ball_profile_summary", &["statistic", "value", "reference", "pass"]);
    let mut out = Outcome::default();
    match profile.statistic {
        Some(ProfileStatistic::Slope { fitted, expected, rel_error }) => {
            let c = Check::at_most("ball_profile.slope", rel_error, tol.slope_rel);
            summary.push(vec!["slope".into(), num(fitted), num(expected), c.pass.to_string()]);
            out.lines.push(format!("slope fitted={fitted} expected={expected}"));
            out.checks.push(c);
        }
        Some(ProfileStatistic::LogProduct { min, max, ratio }) => {
            let c = Check::at_most("ball_profile.log_product", ratio, tol.log_product_ratio);
            summary.push(vec!["log_product_ratio".into(), num(ratio), num(tol.log_product_ratio), c.pass.to_string()]);
            out.lines.push(format!("log product min={min} max={max} ratio={ratio}"));
            out.checks.push(c);
        }
        None => out.lines.push("profile has a single level".into()),
    }
    if cfg.output.charts {
        let pts: Vec<(f64, f64)> = profile.rows.iter().map(|r| (r.radius, r.capacity)).collect();
        let svg = line_chart(
            "Ball capacity profile",
            "radius",
            "capacity",
            Scale::Log,
            Scale::Log,
            &[Series { name: "C(B(x, r))".into(), points: pts }],
        );
        out.files.push(("ball_profile.svg".into(), svg));
    }
    out.tables.push(rows);
    out.tables.push(summary);
    Ok(out)
}

pub fn quasiadd(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let q = &cfg.quasiadd;
    let space = cfg.build_space()?;
    let mut engine = build_engine(cfg, space)?;
    let seeds: Vec<u64> = (0..q.seeds as u64).map(|i| derive_seed(cfg.seed, TAG_QUASIADD, i)).collect();
    let levels = q.levels[0]..=q.levels[1];
    let shapes = cfg.shapes();
    let mut out = Outcome::default();
    let psi = if q.mode == "ahlfors" {
        match q.psi {
            Some(psi) => psi,
            None => {
                let est = estimate_psi(&mut engine, q.m, q.count, levels.clone(), shapes[0], &seeds)?;
                let mut t = Table::new("psi_estimate", &["psi", "max_ratio"]);
                for (psi, r) in &est.max_ratios {
                    t.push(vec![num(*psi), num(*r)]);
                }
                out.tables.push(t);
                out.lines.push(format!("psi={} stabilized={}", est.psi, est.stabilized));
                est.psi
            }
        }
    } else {
        1.0
    };
    let mode = cfg.separation_mode(psi);
    let items: Vec<(usize, u64, usize)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| (0..shapes.len()).map(move |k| (i, s, k)))
        .collect();
    let reports: Vec<LabResult<Option<_>>> = items
        .par_iter()
        .map(|&(_, seed, k)| {
            let mut eng = engine.clone();
            let fam = generate_separated_family(&mut eng, &FamilySpec::new(q.count, seed, mode, levels.clone()))?;
            if fam.is_empty() {
                return Ok(None);
            }
            let sets = family_sets(eng.space(), &fam, shapes[k], seed);
            let rep = match mode {
                SeparationMode::Tree => quasi_additivity_tree(&eng, &fam, &sets)?,
                SeparationMode::Ahlfors { .. } => quasi_additivity_ahlfors(&eng, &fam, &sets)?,
            };
            Ok(Some(rep))
        })
        .collect();
    let mut table = Table::new(
        "quasiadd",
        &["experiment_id", "mode", "J", "p", "s", "sum_cap", "union_cap", "ratio", "bound_A_or_psi", "pass"],
    );
    let mut all = true;
    let mut worst = 1.0f64;
    let mut bound = psi;
    for (&(i, _, k), rep) in items.iter().zip(reports) {
        let Some(rep) = rep? else { continue };
        if let Some(a) = rep.bound {
            bound = a;
        }
        all &= rep.pass();
        worst = worst.max(rep.ratio);
        table.push(vec![
            format!("seed{i}-{}", shapes[k].name()),
            mode.name().into(),
            rep.members.to_string(),
            num(cfg.kernel.p),
            num(cfg.kernel.s),
            num(rep.sum_capacity),
            num(rep.union_capacity),
            num(rep.ratio),
            num(rep.bound.unwrap_or(psi)),
            rep.pass().to_string(),
        ]);
    }
    out.lines.push(format!("quasiadd families={} worst_ratio={worst}", table.rows.len()));
    out.checks.push(Check::new("quasiadd.bounds", worst, bound, all && !table.rows.is_empty()));
    out.tables.push(table);
    Ok(out)
}

/// Space, grid and engine at one depth.
pub struct Level {
    pub depth: usize,
    pub space: ModelSpace,
    pub grid: HeightGrid,
    pub engine: CapacityEngine,
}

fn level(cfg: &ExperimentConfig, depth: usize) -> LabResult<Level> {
    let space = if depth == cfg.build_space()?.depth() { cfg.build_space()? } else { cfg.build_space_at(Some(depth))? };
    let grid = cfg.height_grid(&space);
    let engine = build_engine(cfg, space.clone())?;
    Ok(Level { depth, space, grid, engine })
}

fn depths(cfg: &ExperimentConfig) -> LabResult<(usize, usize)> {
    let base = cfg.build_space()?.depth();
    let cal = cfg.poisson.calibration_depth.unwrap_or(base);
    let check = cfg.poisson.check_depth.unwrap_or(cal + 2);
    Ok((cal, check))
}

fn densities(cfg: &ExperimentConfig, space: &ModelSpace, count: usize) -> LabResult<Vec<Vec<f64>>> {
    (0..count as u64)
        .map(|i| random_density(space, cfg.poisson.coarse_depth, derive_seed(cfg.seed, TAG_DENSITY, i)))
        .collect()
}

/// `(max |PI(1) - 1|, min C, max C)` over the grid.
pub fn normalization_stats(l: &Level) -> LabResult<(f64, f64, f64)> {
    let n = l.space.leaf_count();
    let ones = vec![1.0; n];
    let pi = PoissonIntegrator::new(&l.space, &ones)?;
    let mut err = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &y in l.grid.heights() {
        for x in 0..n {
            err = err.max((pi.value(x, y) - 1.0).abs());
            let c = normalization_constant(&l.space, x, y)?;
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    Ok((err, lo, hi))
}

/// Batch maximum of `C(E*(f, eps)) (eps / ||f||_p)^p` with `eps` a fraction of the field maximum.
pub fn exceptional_batch(l: &Level, fs: &[Vec<f64>], fractions: &[f64]) -> LabResult<(f64, f64)> {
    let ratios: Vec<LabResult<Vec<f64>>> = fs
        .par_iter()
        .map(|f| {
            let top = potential_field(&l.engine, f, &l.grid)?.max();
            fractions
                .iter()
                .map(|&fr| Ok(exceptional_capacity_bound(&l.engine, f, fr * top, &l.grid)?.ratio))
                .collect()
        })
        .collect();
    let mut all = Vec::new();
    for r in ratios {
        all.extend(r?);
    }
    Ok(minmax(all))
}

/// `min over E' of PI(K f) / eps` for each `f`, with `eps` at the configured quantile of the field.
pub fn harnack_margins(l: &Level, fs: &[Vec<f64>], quantile_q: f64, c_h: f64) -> LabResult<Vec<(f64, bool)>> {
    fs.par_iter()
        .map(|f| {
            let field = potential_field(&l.engine, f, &l.grid)?;
            let eps = quantile(field.values(), quantile_q);
            let ex = exceedance_sets(&l.space, &field, &l.grid, eps);
            let rep = harnack_check(&field, &ex.slabs, eps, c_h);
            Ok((rep.min_on_slabs.map_or(f64::INFINITY, |m| m / eps), rep.pass))
        })
        .collect()
}

pub fn poisson(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let (cal_d, check_d) = depths(cfg)?;
    let tol = &cfg.tolerances;
    let pc = &cfg.poisson;
    let cal = level(cfg, cal_d)?;
    let chk = level(cfg, check_d)?;
    let mut ratios = Table::new("ratios", &["quantity", "min", "max", "depth"]);
    let mut out = Outcome::default();

    let mut norm = Vec::new();
    for l in [&cal, &chk] {
        let (err, lo, hi) = normalization_stats(l)?;
        ratios.push(vec!["pi_one_error".into(), num(0.0), num(err), l.depth.to_string()]);
        ratios.push(vec!["normalization_constant".into(), num(lo), num(hi), l.depth.to_string()]);
        norm.push((err, hi / lo));
    }
    let pi_err = norm[0].0.max(norm[1].0);
    out.checks.push(Check::at_most("poisson.pi_one", pi_err, tol.normalization));
    let (r_cal, r_chk) = (norm[0].1, norm[1].1);
    out.checks.push(Check::at_most("poisson.normalization_ratio", r_chk, r_cal * (1.0 + tol.stability)));
    out.checks.push(Check::at_most("poisson.normalization_stability", (r_chk / r_cal - 1.0).abs(), tol.stability));
    out.lines.push(format!("R*: depth {cal_d} {r_cal}, depth {check_d} {r_chk}"));

    let c_h = harnack_constant(&cal.space, &cal.grid)?;
    ratios.push(vec!["harnack_constant".into(), num(c_h), num(c_h), cal_d.to_string()]);
    let fs_chk = densities(cfg, &chk.space, pc.functions)?;
    let margins = harnack_margins(&chk, &fs_chk, pc.harnack_quantile, c_h)?;
    let (mlo, mhi) = minmax(margins.iter().map(|m| m.0));
    ratios.push(vec!["harnack_min_over_eps".into(), num(mlo), num(mhi), check_d.to_string()]);
    out.checks.push(Check::new("poisson.harnack", mlo, c_h, margins.iter().all(|m| m.1)));
    out.lines.push(format!("c_H={c_h} min/eps={mlo}"));

    let fs_cal = densities(cfg, &cal.space, pc.functions)?;
    let (elo_c, ehi_c) = exceptional_batch(&cal, &fs_cal, &pc.eps_fractions)?;
    let (elo_k, ehi_k) = exceptional_batch(&chk, &fs_chk, &pc.eps_fractions)?;
    ratios.push(vec!["exceptional_ratio".into(), num(elo_c), num(ehi_c), cal_d.to_string()]);
    ratios.push(vec!["exceptional_ratio".into(), num(elo_k), num(ehi_k), check_d.to_string()]);
    let drift = (ehi_k / ehi_c - 1.0).abs();
    out.checks.push(Check::new("poisson.exceptional_stability", drift, tol.stability, ehi_c.is_finite() && ehi_k.is_finite() && drift <= tol.stability));
    out.lines.push(format!("exceptional ratio max: depth {cal_d} {ehi_c}, depth {check_d} {ehi_k}"));

    let mut field = Table::new("field", &["leaf_index", "y", "value"]);
    let f0 = potential_field(&cal.engine, &fs_cal[0], &cal.grid)?;
    for (m, &y) in cal.grid.heights().iter().enumerate() {
        for (x, v) in f0.row(m).iter().enumerate() {
            field.push(vec![x.to_string(), num(y), num(*v)]);
        }
    }
    out.tables.push(field);
    out.tables.push(ratios);
    Ok(out)
}

pub fn exchange_band(l: &Level, fs: &[Vec<f64>]) -> LabResult<(f64, f64)> {
    let bands: Vec<LabResult<(f64, f64)>> =
        fs.par_iter().map(|f| Ok(exchange_ratio(&l.space, l.engine.operator(), f, &l.grid)?)).collect();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for b in bands {
        let (a, c) = b?;
        lo = lo.min(a);
        hi = hi.max(c);
    }
    Ok((lo, hi))
}

pub fn exchange(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let (cal_d, check_d) = depths(cfg)?;
    let stab = cfg.tolerances.stability;
    let mut ratios = Table::new("ratios", &["quantity", "min", "max", "depth"]);
    let mut bands = Vec::new();
    for d in [cal_d, check_d] {
        let l = level(cfg, d)?;
        let fs = densities(cfg, &l.space, cfg.poisson.functions)?;
        let (lo, hi) = exchange_band(&l, &fs)?;
        ratios.push(vec!["exchange_ratio".into(), num(lo), num(hi), d.to_string()]);
        bands.push((lo, hi));
    }
    let (cl, ch) = bands[0];
    let (kl, kh) = bands[1];
    let mut out = Outcome::default();
    out.lines.push(format!("exchange band: depth {cal_d} [{cl}, {ch}], depth {check_d} [{kl}, {kh}]"));
    out.checks.push(Check::at_least("exchange.band_lower", kl, cl * (1.0 - stab)));
    out.checks.push(Check::at_most("exchange.band_upper", kh, ch * (1.0 + stab)));
    out.tables.push(ratios);
    Ok(out)
}

/// Sampled base points, evenly spread over the leaves.
pub fn sample_points(n: usize, samples: usize) -> Vec<usize> {
    let k = samples.min(n);
    let stride = n / k;
    (0..k).map(|i| i * stride + stride / 3).collect()
}

pub fn region_kind(cfg: &ExperimentConfig, space: &ModelSpace) -> RegionKind {
    let c = &cfg.convergence;
    let p = cfg.exponent();
    match c.region.as_str() {
        "eta-star" => RegionKind::EtaStar { psi: c.psi },
        "exponential" => RegionKind::Exponential { c: c.c, exponent: exponential_exponent(space.dimension(), p) },
        _ => RegionKind::Polynomial { c: c.c, exponent: polynomial_exponent(cfg.kernel.s, p) },
    }
}

fn summary_row(t: &mut Table, id: &str, rep: &ConvergenceReport, verdict: &str) {
    let bad = rep.bad_set_mass.last().map_or(0.0, |v| v.1);
    t.push(vec![id.into(), num(rep.fraction_converged), num(bad), verdict.into()]);
}

pub fn converge(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let cc = &cfg.convergence;
    let tol = &cfg.tolerances;
    let space = cfg.build_space()?;
    let grid = cfg.height_grid(&space);
    if grid.len() < 2 {
        return Err(LabError::config("poisson.M", "convergence needs at least two heights"));
    }
    let mut engine = build_engine(cfg, space.clone())?;
    let profile = Profile::parse(&cc.profile).expect("validated");
    let raw = continuous_profile(&space, profile, 1.0);
    let top = engine.potential(&raw).into_iter().fold(0.0, f64::max);
    let f: Vec<f64> = raw.iter().map(|v| v / top).collect();
    let x0s = sample_points(space.leaf_count(), cc.samples);
    let split = if cc.split {
        let opts = SplitOptions { delta_target: cc.delta_target, exceedance_constant: cc.split_constant, max_level: cc.max_level };
        Some(approximation_split(&engine, &f, &grid, &opts)?)
    } else {
        None
    };
    let kind = region_kind(cfg, &space);
    let nt = nontangential_experiment(&mut engine, &f, &x0s, &grid, split.as_ref(), tol.nontangential_error)?;
    let tg = tangential_experiment(&mut engine, &f, &x0s, kind, &grid, split.as_ref(), tol.tangential_error)?;

    let mut rows = Table::new("convergence", &["x0_leaf", "region_kind", "t", "sup_error", "in_region_points", "excluded"]);
    for rep in [&nt, &tg] {
        for r in &rep.rows {
            rows.push(vec![
                r.x0.to_string(),
                rep.kind.name().into(),
                num(r.t),
                num(r.sup_error),
                r.in_region_points.to_string(),
                r.excluded.to_string(),
            ]);
        }
    }
    let verdict = match &split {
        None => "not-computed".to_string(),
        Some(s) if s.upper.is_empty() => "empty".to_string(),
        Some(s) => {
            let thin = thinness_decay(&engine, &s.upper, &grid, tol.thin_tol);
            if thin.thin { "thin" } else { "not-thin" }.to_string()
        }
    };
    let mut summary = Table::new("summary", &["experiment_id", "fraction_converged", "bad_set_mass", "thin_verdict"]);
    summary_row(&mut summary, "nontangential", &nt, &verdict);
    summary_row(&mut summary, &format!("tangential-{}", kind.name()), &tg, &verdict);

    let mut out = Outcome::default();
    out.checks.push(Check::at_least("converge.nontangential_fraction", nt.fraction_converged, tol.nontangential_fraction));
    out.checks.push(Check::at_least("converge.tangential_fraction", tg.fraction_converged, tol.tangential_fraction));
    if let Some(s) = &split {
        out.checks.push(Check::new(
            "converge.split_capacity",
            s.upper_capacity.max(s.exceptional_capacity),
            tol.excluded_capacity,
            s.upper_capacity < tol.excluded_capacity && s.exceptional_capacity < tol.excluded_capacity,
        ));
        let mut st = Table::new("split", &["quantity", "value"]);
        st.push(vec!["upper_points".into(), s.upper.count().to_string()]);
        st.push(vec!["exceptional_leaves".into(), s.exceptional.count().to_string()]);
        st.push(vec!["upper_capacity".into(), num(s.upper_capacity)]);
        st.push(vec!["exceptional_capacity".into(), num(s.exceptional_capacity)]);
        out.tables.push(st);
    }
    let finest = |r: &ConvergenceReport| r.finest_errors().into_iter().map(|e| e.1).fold(0.0, f64::max);
    out.lines.push(format!(
        "nontangential fraction={} max_error={} | {} fraction={} max_error={} trivial={}",
        nt.fraction_converged,
        finest(&nt),
        kind.name(),
        tg.fraction_converged,
        finest(&tg),
        tg.region_trivial
    ));
    if cfg.output.charts {
        let curve = |r: &ConvergenceReport| -> Vec<(f64, f64)> {
            let mut ts: Vec<f64> = r.rows.iter().map(|x| x.t).collect();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            ts.iter()
                .map(|&t| (t, r.rows.iter().filter(|x| x.t == t).map(|x| x.sup_error).fold(0.0, f64::max)))
                .collect()
        };
        let svg = line_chart(
            "Worst sup error below height t",
            "t",
            "sup error",
            Scale::Log,
            Scale::Log,
            &[
                Series { name: "nontangential".into(), points: curve(&nt) },
                Series { name: kind.name().into(), points: curve(&tg) },
            ],
        );
        out.files.push(("convergence.svg".into(), svg));
    }
    out.tables.push(rows);
    out.tables.push(summary);
    Ok(out)
}

pub fn full_suite(cfg: &ExperimentConfig) -> LabResult<Outcome> {
    let mut out = space_info(cfg)?;
    out.merge(capacity(cfg)?);
    out.merge(ball_profile(cfg)?);
    out.merge(quasiadd(cfg)?);
    out.merge(poisson(cfg)?);
    out.merge(exchange(cfg)?);
    out.merge(converge(cfg)?);
    Ok(out)
}

use potlab_core::capacity::*;
use potlab_core::convergence::*;
use potlab_core::kernel::*;
use potlab_core::poisson::*;
use potlab_core::rel_diff;
use potlab_core::space::*;
use potlab_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p2() -> Exponent {
    Exponent::new(2.0).unwrap()
}

fn engine(space: ModelSpace, s: f64) -> CapacityEngine {
    CapacityEngine::riesz(space, s, p2(), SolverOptions::default()).unwrap()
}

fn binary(depth: usize) -> ModelSpace {
    ModelSpace::tree_boundary(TreeSpace::uniform(2, depth, 0.5).unwrap())
}

fn cantor(depth: usize) -> ModelSpace {
    ModelSpace::cantor(depth, MassProfile::Uniform).unwrap()
}

fn coarse_random(space: &ModelSpace, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
    refine_cylinders(space, &coarse).unwrap()
}

fn all_kinds(space: &ModelSpace) -> Vec<RegionKind> {
    let e = polynomial_exponent(0.8, p2());
    vec![
        RegionKind::NonTangential,
        RegionKind::EtaStar { psi: 1.0 },
        RegionKind::EtaStar { psi: 2.5 },
        RegionKind::Polynomial { c: 1.0, exponent: e },
        RegionKind::Exponential { c: 0.5, exponent: exponential_exponent(space.dimension(), p2()) },
    ]
}

#[test]
fn region_constructor_validates() {
    assert!(ApproachRegion::new(0, RegionKind::EtaStar { psi: 0.9 }, 1.0).is_err());
    assert!(ApproachRegion::new(0, RegionKind::Polynomial { c: 0.0, exponent: 1.0 }, 1.0).is_err());
    assert!(ApproachRegion::new(0, RegionKind::Exponential { c: 1.0, exponent: -1.0 }, 1.0).is_err());
    assert!(ApproachRegion::new(0, RegionKind::NonTangential, 0.0).is_err());
}

#[test]
fn base_point_is_always_inside() {
    let space = binary(6);
    let mut eng = engine(space.clone(), 0.8);
    for kind in all_kinds(&space) {
        let region = ApproachRegion::new(9, kind, 1.0).unwrap();
        for y in [0.9, 0.3, 1e-2, 1e-5] {
            assert!(region_membership(&mut eng, &region, 9, y), "{kind:?} {y}");
        }
        assert!(!region_membership(&mut eng, &region, 9, 1.0));
    }
}

#[test]
fn nontangential_is_the_ball_of_radius_y() {
    let space = cantor(6);
    let mut eng = engine(space.clone(), 0.8);
    let region = ApproachRegion::new(20, RegionKind::NonTangential, 1.0).unwrap();
    for x in 0..64 {
        for y in [0.5, 0.1, 0.02] {
            assert_eq!(region_membership(&mut eng, &region, x, y), space.distance(x, 20) < y);
        }
    }
}

#[test]
fn polynomial_threshold() {
    let space = binary(6);
    let mut eng = engine(space.clone(), 0.8);
    let (c, e) = (0.7, 0.6);
    let region = ApproachRegion::new(0, RegionKind::Polynomial { c, exponent: e }, 1.0).unwrap();
    let x = 8;
    let d = space.distance(0, x);
    // d < c y^e exactly when y > (d / c)^(1/e).
    let y_star = (d / c).powf(1.0 / e);
    assert!(region_membership(&mut eng, &region, x, y_star * 1.001));
    assert!(!region_membership(&mut eng, &region, x, y_star * 0.999));
}

#[test]
fn exponential_threshold() {
    let space = binary(8);
    let mut eng = engine(space.clone(), 0.5);
    let (c, a) = (0.5, exponential_exponent(1.0, p2()));
    assert_eq!(a, 1.0);
    let region = ApproachRegion::new(0, RegionKind::Exponential { c, exponent: a }, 1.0).unwrap();
    let x = 16;
    let d = space.distance(0, x);
    let y_star = (-c * d.powf(-a)).exp();
    assert!(region_membership(&mut eng, &region, x, y_star * 1.001));
    assert!(!region_membership(&mut eng, &region, x, y_star * 0.999));
}

#[test]
fn eta_star_and_polynomial_regions_agree_up_to_band() {
    let space = binary(8);
    let mut eng = engine(space.clone(), 0.8);
    let e = polynomial_exponent(0.8, p2());
    let grid = HeightGrid::dyadic(&space, 7);
    let x0 = 77;
    // Band of eta*(x0, y) / y^e over the grid, as in a ball-capacity profile.
    let ratios: Vec<f64> = grid.heights().iter().map(|&y| eng.eta_x(x0, y).eta_star / y.powf(e)).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0f64, f64::max);
    let eta = ApproachRegion::new(x0, RegionKind::EtaStar { psi: 1.0 }, 2.0).unwrap();
    let inner = ApproachRegion::new(x0, RegionKind::Polynomial { c: lo, exponent: e }, 2.0).unwrap();
    let outer = ApproachRegion::new(x0, RegionKind::Polynomial { c: hi, exponent: e }, 2.0).unwrap();
    for &y in grid.heights() {
        for x in 0..256 {
            let in_eta = region_membership(&mut eng, &eta, x, y);
            if region_membership(&mut eng, &inner, x, y) {
                assert!(in_eta);
            }
            if in_eta {
                assert!(region_membership(&mut eng, &outer, x, y));
            }
        }
    }
}

#[test]
fn nontangential_sits_inside_eta_star_region() {
    let space = cantor(6);
    let mut eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    for x0 in [0, 31, 50] {
        let nt = ApproachRegion::new(x0, RegionKind::NonTangential, 2.0).unwrap();
        let es = ApproachRegion::new(x0, RegionKind::EtaStar { psi: 1.0 }, 2.0).unwrap();
        for &y in grid.heights() {
            for x in 0..64 {
                if region_membership(&mut eng, &nt, x, y) {
                    assert!(region_membership(&mut eng, &es, x, y));
                }
            }
        }
    }
}

#[test]
fn polynomial_region_is_wider_than_the_cone() {
    let space = binary(10);
    let mut eng = engine(space.clone(), 0.8);
    let region = ApproachRegion::new(100, RegionKind::Polynomial { c: 1.0, exponent: polynomial_exponent(0.8, p2()) }, 1.0).unwrap();
    let y = space.tree().delta_pow(8);
    let wider = (0..1024).any(|x| space.distance(x, 100) > y && region_membership(&mut eng, &region, x, y));
    assert!(wider);
}

#[test]
fn thinness_of_trivial_sets() {
    let space = cantor(6);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let empty = UpperHalfSet::empty(64, grid.len());
    let rep = thinness_decay(&eng, &empty, &grid, 1e-3);
    assert!(rep.capacities.iter().all(|&c| c == 0.0) && rep.thin);
    assert_eq!(rep.t_grid.len(), grid.len() - 1);

    let mut point = UpperHalfSet::empty(64, grid.len());
    let m_bar = 3;
    point.insert(12, m_bar);
    let rep = thinness_decay(&eng, &point, &grid, 1e-3);
    for (t, c) in rep.t_grid.iter().zip(&rep.capacities) {
        if *t <= grid.height(m_bar) {
            assert_eq!(*c, 0.0);
        } else {
            assert!(*c > 0.0);
        }
    }
    assert!(rep.thin);
}

#[test]
fn thinness_of_split_exceptional_set() {
    let space = cantor(7);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let f = coarse_random(&space, 6);
    let opts = SplitOptions { delta_target: 0.05, exceedance_constant: 1.0, max_level: 5 };
    let split = approximation_split(&eng, &f, &grid, &opts).unwrap();
    let rep = thinness_decay(&eng, &split.upper, &grid, 1e-3);
    assert!(rep.capacities.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert!(rep.thin, "{:?}", rep.capacities);
}

#[test]
fn enlarged_single_leaf() {
    let space = binary(6);
    let mut eng = engine(space.clone(), 0.8);
    let set = LeafSet::from_leaves(64, [10]);
    let en = enlarged_set(&mut eng, &set, 1.0).unwrap();
    let delta_e = space.distance_to_complement(10, &set).unwrap();
    assert_eq!(delta_e, space.tree().delta_pow(5));
    let r = eng.eta_x(10, delta_e).eta_star;
    assert_eq!(en.set, LeafSet::from_span(64, space.ball(10, r)));
    assert!(set.is_subset(&en.set));
    assert!(matches!(enlarged_set(&mut eng, &LeafSet::full(64), 2.0), Err(Error::WholeSpace)));
    assert!(enlarged_set(&mut eng, &LeafSet::empty(64), 2.0).is_err());
    assert!(enlarged_set(&mut eng, &set, 0.5).is_err());
}

fn enlarged_batch_max(depth: usize) -> f64 {
    let space = cantor(depth);
    let n = space.leaf_count();
    let mut eng = engine(space, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..12 {
        // A random union of balls at scales resolved at both depths.
        let mut set = LeafSet::empty(n);
        for _ in 0..rng.gen_range(1..4) {
            let x = rng.gen_range(0..n);
            let r = 3f64.powi(-rng.gen_range(2..5));
            set.insert_span(eng.space().ball(x, r));
        }
        let en = enlarged_set(&mut eng, &set, 2.0).unwrap();
        assert!(set.is_subset(&en.set));
        worst = worst.max(en.ratio);
    }
    worst
}

#[test]
fn enlarged_mass_is_controlled_by_capacity() {
    let (a, b) = (enlarged_batch_max(6), enlarged_batch_max(8));
    assert!(a.is_finite() && b.is_finite());
    assert!(rel_diff(a, b) < 0.25, "{a} {b}");
}

#[test]
fn shadow_covering_empty_set() {
    let space = cantor(5);
    let grid = HeightGrid::resolved(&space, 20);
    let mut f = |_: usize, y: f64| y;
    let rep = shadow_covering_check(&space, &UpperHalfSet::empty(32, grid.len()), &grid, &mut f, 1.0);
    assert_eq!(rep.inclusion, Some(true));
    assert!(rep.lhs.is_empty() && rep.rhs.is_empty());
}

#[test]
fn shadow_covering_for_eta_star_regions() {
    for (space, s) in [(binary(6), 0.8), (cantor(6), 0.8), (cantor(6), 0.55), (binary(6), 0.55)] {
        let grid = HeightGrid::resolved(&space, 20);
        let mut eng = engine(space.clone(), s);
        let psi = 2.0;
        let alpha = comparability_constant(&mut eng, &grid);
        assert!(alpha >= 1.0);
        for (x, m) in [(5usize, 2usize), (40, 4), (63, grid.len() - 1)] {
            // One slab B(x, y) x {y}.
            let mut set = UpperHalfSet::empty(64, grid.len());
            for z in space.ball(x, grid.height(m)).iter() {
                set.insert(z, m);
            }
            let mut f = |x: usize, y: f64| psi * eng.eta_x(x, y).eta_star;
            let rep = shadow_covering_check(&space, &set, &grid, &mut f, alpha);
            assert!(rep.hypotheses_hold());
            assert_eq!(rep.inclusion, Some(true));
            assert!(!rep.lhs.is_empty());
        }
    }
}

#[test]
fn shadow_covering_rejects_small_alpha() {
    let space = cantor(6);
    let grid = HeightGrid::resolved(&space, 20);
    let mut eng = engine(space.clone(), 0.55);
    let alpha = comparability_constant(&mut eng, &grid);
    assert!(alpha > 1.0);
    let mut set = UpperHalfSet::empty(64, grid.len());
    set.insert(3, 2);
    let mut f = |x: usize, y: f64| eng.eta_x(x, y).eta_star;
    let rep = shadow_covering_check(&space, &set, &grid, &mut f, alpha * 0.5);
    assert!(!rep.comparability && rep.inclusion.is_none());
    assert!((rep.measured_alpha - alpha).abs() <= 1e-12 * alpha);
}

#[test]
fn exceptional_bound_edge_cases() {
    let space = cantor(6);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let f = coarse_random(&space, 8);
    let max = potential_field(&eng, &f, &grid).unwrap().max();
    let rep = exceptional_capacity_bound(&eng, &f, max * 1.01, &grid).unwrap();
    assert_eq!(rep.capacity, 0.0);
    assert_eq!(rep.ratio, 0.0);

    let eps = 0.6 * max;
    let a = exceptional_capacity_bound(&eng, &f, eps, &grid).unwrap();
    let f2: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
    let b = exceptional_capacity_bound(&eng, &f2, 2.0 * eps, &grid).unwrap();
    assert!(rel_diff(a.ratio, b.ratio) < 1e-6);
    assert!(exceptional_capacity_bound(&eng, &f, 0.0, &grid).is_err());
}

fn exceptional_batch_max(depth: usize) -> f64 {
    let space = cantor(depth);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let mut worst = 0.0f64;
    for seed in 0..8 {
        let f = coarse_random(&space, seed);
        let max = potential_field(&eng, &f, &grid).unwrap().max();
        for frac in [0.3, 0.6, 0.9] {
            worst = worst.max(exceptional_capacity_bound(&eng, &f, frac * max, &grid).unwrap().ratio);
        }
    }
    worst
}

#[test]
fn exceptional_ratio_is_stable_in_depth() {
    let (a, b) = (exceptional_batch_max(6), exceptional_batch_max(8));
    assert!(a > 0.0 && rel_diff(a, b) < 0.1, "{a} {b}");
}

#[test]
fn split_of_continuous_profile_is_empty() {
    let space = binary(7);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let g = continuous_profile(&space, Profile::Hat, 1.0);
    let opts = SplitOptions { delta_target: 0.05, exceedance_constant: 1.0, max_level: 4 };
    let split = approximation_split(&eng, &g, &grid, &opts).unwrap();
    assert!(split.upper.is_empty() && split.exceptional.is_empty() && split.pass());

    let eps = [0.02, 0.05, 0.1];
    let modulus = split_modulus(&eng, &g, &grid, &split, &eps).unwrap();
    let u = eng.potential(&g);
    let probe = uniform_continuity_probe(&space, &u, &eps, &grid).unwrap();
    for (a, b) in modulus.iter().zip(&probe) {
        // Strict and non-strict thresholds can differ only on exact ties.
        assert!(a.1 <= b.1);
    }
}

#[test]
fn split_of_random_density() {
    let space = cantor(8);
    let eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f: Vec<f64> = (0..256).map(|_| rng.gen::<f64>()).collect();
    let opts = SplitOptions { delta_target: 0.05, exceedance_constant: 1.0, max_level: 5 };
    let split = approximation_split(&eng, &f, &grid, &opts).unwrap();
    assert!(split.upper_capacity < 0.05 && split.exceptional_capacity < 0.05, "{} {}", split.upper_capacity, split.exceptional_capacity);
    assert!(split.pass());
    assert_eq!(split.lipschitz.len(), 5);
    assert!(split.lipschitz.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    let mut mc = potlab_core::convergence::lipschitz_minorant(&space, &f, 3.0);
    assert!(mc.iter().zip(&f).all(|(g, v)| g <= v));
    mc.clear();
    assert!(approximation_split(&eng, &f[..10], &grid, &opts).is_err());
}

#[test]
fn constant_density_converges_exactly() {
    let space = ModelSpace::tree_boundary(TreeSpace::uniform(2, 7, 0.5).unwrap());
    let mut eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let f = vec![0.4; 128];
    let x0s: Vec<usize> = (0..128).step_by(9).collect();
    let nt = nontangential_experiment(&mut eng, &f, &x0s, &grid, None, 1e-12).unwrap();
    assert!(nt.rows.iter().all(|r| r.sup_error < 1e-12));
    assert_eq!(nt.fraction_converged, 1.0);
    let kind = RegionKind::Polynomial { c: 1.0, exponent: polynomial_exponent(0.8, p2()) };
    let tg = tangential_experiment(&mut eng, &f, &x0s, kind, &grid, None, 1e-12).unwrap();
    assert!(tg.rows.iter().all(|r| r.sup_error < 1e-12));
    assert!(tangential_experiment(&mut eng, &f, &x0s, RegionKind::NonTangential, &grid, None, 0.1).is_err());
}

#[test]
fn continuous_profile_errors_shrink_with_t() {
    let space = binary(9);
    let mut eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let f = continuous_profile(&space, Profile::Cosine, 1.0);
    let x0s: Vec<usize> = (0..512).step_by(16).map(|x| x + 3).collect();
    let rep = nontangential_experiment(&mut eng, &f, &x0s, &grid, None, 0.02).unwrap();
    let monotone = x0s
        .iter()
        .filter(|&&x0| {
            let errs: Vec<f64> = rep.rows.iter().filter(|r| r.x0 == x0).map(|r| r.sup_error).collect();
            errs.windows(2).all(|w| w[1] <= w[0])
        })
        .count();
    assert!(monotone as f64 >= 0.95 * x0s.len() as f64);
    assert!(rep.fraction_converged >= 0.95);
    assert!(rep.rows.iter().all(|r| !r.excluded && r.in_region_points > 0));
}

#[test]
fn bad_set_mass_shrinks_as_t_refines() {
    let space = cantor(7);
    let mut eng = engine(space.clone(), 0.8);
    let grid = HeightGrid::resolved(&space, 20);
    let f = coarse_random(&space, 2);
    let opts = SplitOptions { delta_target: 0.2, exceedance_constant: 1.0, max_level: 4 };
    let split = approximation_split(&eng, &f, &grid, &opts).unwrap();
    let kind = RegionKind::EtaStar { psi: 1.5 };
    let x0s: Vec<usize> = (0..128).step_by(8).collect();
    let rep = tangential_experiment(&mut eng, &f, &x0s, kind, &grid, Some(&split), 0.05).unwrap();
    let masses: Vec<f64> = rep.bad_set_mass.iter().map(|v| v.1).collect();
    assert!(masses.windows(2).all(|w| w[1] <= w[0]));
    for row in &rep.rows {
        assert_eq!(row.excluded, split.exceptional.contains(row.x0));
    }
}

#[test]
fn exponential_region_reports_trivial_resolution() {
    let space = binary(6);
    let mut eng = engine(space.clone(), 0.5);
    let grid = HeightGrid::resolved(&space, 20);
    let f = continuous_profile(&space, Profile::Hat, 1.0);
    // With a tiny c the region exp(-c d^-a) < y is empty off the base column.
    let kind = RegionKind::Exponential { c: 1e-3, exponent: 1.0 };
    let rep = tangential_experiment(&mut eng, &f, &[0, 20, 40], kind, &grid, None, 0.05).unwrap();
    assert!(rep.region_trivial);
    let kind = RegionKind::Exponential { c: 2.0, exponent: 1.0 };
    let rep = tangential_experiment(&mut eng, &f, &[0, 20, 40], kind, &grid, None, 0.05).unwrap();
    assert!(!rep.region_trivial);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn membership_is_monotone_in_height(kind in 0usize..5, x in 0usize..64, y in 1e-4f64..0.9, bump in 1.0f64..5.0) {
        let space = cantor(6);
        let mut eng = engine(space.clone(), 0.8);
        let kind = all_kinds(&space)[kind];
        let region = ApproachRegion::new(17, kind, 1.0).unwrap();
        let y2 = (y * bump).min(0.999);
        if region_membership(&mut eng, &region, x, y) {
            prop_assert!(region_membership(&mut eng, &region, x, y2));
        }
    }

    #[test]
    fn shadows_of_truncations_are_nested(seed in any::<u64>()) {
        let space = cantor(5);
        let grid = HeightGrid::resolved(&space, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = UpperHalfSet::empty(32, grid.len());
        for _ in 0..6 {
            set.insert(rng.gen_range(0..32), rng.gen_range(0..grid.len()));
        }
        let ts = t_grid(&grid);
        for w in ts.windows(2) {
            let big = shadow(&space, &truncate_below(&set, &grid, w[0]), &grid);
            let small = shadow(&space, &truncate_below(&set, &grid, w[1]), &grid);
            prop_assert!(small.is_subset(&big));
        }
        let eng = engine(space, 0.8);
        let rep = thinness_decay(&eng, &set, &grid, 1e-3);
        prop_assert!(rep.capacities.iter().all(|&c| c >= 0.0));
        prop_assert!(rep.capacities.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }
}

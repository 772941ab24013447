use potlab_core::capacity::*;
use potlab_core::kernel::*;
use potlab_core::space::*;
use potlab_core::{rel_diff, weighted_lp_norm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ex(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

fn binary(n: usize) -> ModelSpace {
    ModelSpace::tree_boundary(TreeSpace::uniform(2, n, 0.5).unwrap())
}

fn riesz_engine(space: ModelSpace, s: f64, p: f64) -> CapacityEngine {
    CapacityEngine::riesz(space, s, ex(p), SolverOptions::default()).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> LeafSet {
    let density = rng.gen_range(0.05..0.6);
    let mut set = LeafSet::from_leaves(n, (0..n).filter(|_| rng.gen::<f64>() < density));
    if set.is_empty() {
        set.insert(rng.gen_range(0..n));
    }
    set
}

#[test]
fn empty_target_has_zero_capacity() {
    let eng = riesz_engine(binary(4), 0.75, 2.0);
    let sol = eng.solve(&LeafSet::empty(16));
    assert_eq!(sol.value, 0.0);
    assert!(sol.density.iter().all(|&v| v == 0.0));
    assert_eq!(eng.solve_dual(&LeafSet::empty(16)).value, 0.0);
}

#[test]
fn constant_kernel_on_everything() {
    let space = binary(4);
    let k = RadialKernel::constant(4, 1.0).unwrap();
    let eng = CapacityEngine::radial(space, &k, ex(2.0), SolverOptions::default()).unwrap();
    let sol = eng.solve(&LeafSet::full(16));
    assert!(rel_diff(sol.value, 1.0) < 1e-8);
    assert!(sol.density.iter().all(|v| (v - 1.0).abs() < 1e-6));
    assert!(rel_diff(eng.solve_exact(&LeafSet::full(16)).unwrap().value, 1.0) < 1e-12);
}

/// Minimizes `sum w f^p` over densities that depend only on the level shared
/// with `x0` on a 4-leaf binary tree, by brute-force search on a ratio grid.
fn grid_search_singleton(eng: &CapacityEngine, p: f64) -> f64 {
    let space = eng.space();
    let x0 = 0;
    let classes = [vec![0usize], vec![1], vec![2, 3]];
    let steps = 400;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let shape = [1.0, a, b];
            let mut f = vec![0.0; 4];
            for (c, leaves) in classes.iter().enumerate() {
                for &l in leaves {
                    f[l] = shape[c];
                }
            }
            let u = eng.potential(&f)[x0];
            let cost: f64 = f.iter().zip(space.weights()).map(|(v, w)| w * (v / u).powf(p)).sum();
            best = best.min(cost);
        }
    }
    best
}

#[test]
fn singleton_closed_form_matches_grid_search() {
    for p in [1.5, 2.0, 3.0] {
        let eng = riesz_engine(binary(2), 0.8, p);
        let closed = eng.singleton(0);
        let searched = grid_search_singleton(&eng, p);
        assert!(searched >= closed * (1.0 - 1e-12));
        assert!(rel_diff(searched, closed) < 2e-3, "p={p} {searched} {closed}");
        let sol = eng.solve(&LeafSet::from_leaves(4, [0]));
        assert!(rel_diff(sol.value, closed) < 1e-6);
    }
}

#[test]
fn singleton_closed_form_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let b = rng.gen_range(2..4);
        let n = rng.gen_range(2..6);
        let delta = rng.gen_range(0.3..0.7);
        let p = rng.gen_range(1.3..3.5);
        let tree = TreeSpace::uniform(b, n, delta).unwrap();
        let levels: Vec<f64> = {
            let mut acc = 1.0;
            (0..=n).map(|_| { acc *= rng.gen_range(1.0..2.0); acc }).collect()
        };
        let k = RadialKernel::levels(levels).unwrap();
        let eng = CapacityEngine::radial(ModelSpace::tree_boundary(tree.clone()), &k, ex(p), SolverOptions::default()).unwrap();
        let x = rng.gen_range(0..tree.leaf_count());
        // Independent evaluation from kernel values.
        let pp = p / (p - 1.0);
        let s: f64 = (0..tree.leaf_count())
            .map(|y| tree.weight(y) * kernel_value(&k, &tree, BoundaryPoint(x), BoundaryPoint(y)).unwrap().powf(pp))
            .sum();
        let closed = s.powf(1.0 - p);
        assert!(rel_diff(eng.singleton(x), closed) < 1e-12);
        let sol = eng.solve(&LeafSet::from_leaves(tree.leaf_count(), [x]));
        assert!(rel_diff(sol.value, closed) < 1e-6);
        let dual = eng.solve_dual(&LeafSet::from_leaves(tree.leaf_count(), [x]));
        assert!(rel_diff(dual.value, closed) < 1e-6 && dual.relative_gap <= 1e-6);
    }
}

#[test]
fn strong_duality_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [1.5, 2.0, 3.0] {
        let s = 0.5 * (1.0 / ex(p).conjugate() + 1.0);
        let eng = riesz_engine(binary(6), s, p);
        for _ in 0..50 {
            let set = random_set(&mut rng, 64);
            let primal = eng.solve(&set);
            let dual = eng.solve_dual(&set);
            assert!(primal.relative_gap <= 1e-3);
            assert!(rel_diff(primal.value, dual.value) <= 1e-3);
            assert!(dual.value <= primal.value * (1.0 + 1e-12));
        }
    }
}

#[test]
fn certificates_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let space = ModelSpace::cantor(6, MassProfile::Uniform).unwrap();
    for p in [1.5, 2.0, 3.0] {
        let s = 0.5 * (1.0 / ex(p).conjugate() + 1.0);
        let eng = riesz_engine(space.clone(), s, p);
        let pp = ex(p).conjugate();
        for _ in 0..10 {
            let set = random_set(&mut rng, 64);
            let sol = eng.solve(&set);
            let tol = eng.options().tol;
            let u = eng.potential(&sol.density);
            for x in set.iter() {
                assert!(u[x] >= 1.0 - 1e-9);
            }
            assert!(sol.measure.iter().enumerate().all(|(x, &m)| m >= 0.0 && (set.contains(x) || m == 0.0)));
            let mut km = vec![0.0; 64];
            eng.operator().apply(&sol.measure, &mut km);
            let norm = weighted_lp_norm(&km, space.weights(), pp);
            assert!(norm <= 1.0 + 1e-9 && norm >= 1.0 - tol);
            let mass: f64 = sol.measure.iter().sum();
            let mp = mass.powf(p);
            assert!(mp <= sol.value * (1.0 + 1e-12) && mp >= (1.0 - tol) * sol.value);
            assert!(rel_diff(weighted_lp_norm(&sol.density, space.weights(), p).powf(p), sol.primal_value) < 1e-9);
            assert!(sol.dual_value <= sol.primal_value * (1.0 + sol.relative_gap) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn active_set_solver_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for space in [binary(7), ModelSpace::unit_interval(2, 6, MassProfile::Uniform).unwrap()] {
        let eng = riesz_engine(space, 0.8, 2.0);
        let n = eng.space().leaf_count();
        for _ in 0..10 {
            let set = random_set(&mut rng, n);
            let a = eng.solve_exact(&set).unwrap().value;
            assert!(rel_diff(eng.capacity(&set), a) < 1e-7);
        }
    }
    let eng = riesz_engine(binary(4), 0.8, 3.0);
    assert!(eng.solve_exact(&LeafSet::full(16)).is_err());
}

#[test]
fn kernel_scaling_law() {
    let space = binary(6);
    let base = RadialKernel::riesz(1.0, 0.75, ex(2.5)).unwrap();
    let c = 3.7;
    // The default tolerance certifies 1e-8; the law is checked one digit beyond that.
    let opts = SolverOptions { tol: 1e-11, ..SolverOptions::default() };
    let e1 = CapacityEngine::radial(space.clone(), &base, ex(2.5), opts).unwrap();
    let e2 = CapacityEngine::radial(space, &base.scaled(c), ex(2.5), opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let set = random_set(&mut rng, 64);
        let (a, b) = (e2.solve(&set), e1.solve(&set));
        assert!(rel_diff(a.value, c.powf(-2.5) * b.value) < 1e-9, "{} {} {} {}", a.value, c.powf(-2.5) * b.value, a.relative_gap, b.relative_gap);
    }
}

#[test]
fn tree_eta_matches_table_scan() {
    let mut eng = riesz_engine(binary(6), 0.75, 2.0);
    let tree = eng.space().tree().clone();
    let r = tree.delta_pow(3);
    for x in 0..64 {
        let eta = eng.eta_tree(x, r);
        // Table of subtree masses and the ball capacity, scanned from fine to coarse.
        let cap = eng.capacity(&LeafSet::from_span(64, tree.ball(BoundaryPoint(x), r)));
        let mut want = None;
        for n in (0..=6).rev() {
            if tree.mass(tree.subtree(BoundaryPoint(x), n)) >= cap {
                want = Some(0.5f64.powf(n as f64 - 0.5));
                break;
            }
        }
        let want = want.unwrap();
        assert!(rel_diff(eta.eta.unwrap(), want) < 1e-12);
        assert!(eta.eta_star >= r && eta.eta_star >= want);
    }
}

#[test]
fn tree_eta_floor_and_sentinel() {
    // A single leaf has capacity below its own mass here, so eta is the finest half-step.
    let space = binary(6);
    let k = RadialKernel::riesz(1.0, 0.75, ex(2.0)).unwrap().scaled(1e3);
    let mut eng = CapacityEngine::radial(space.clone(), &k, ex(2.0), SolverOptions::default()).unwrap();
    let e = eng.eta_tree(0, 1e-9);
    assert!(rel_diff(e.eta.unwrap(), 0.5f64.powf(5.5)) < 1e-12);

    // A tiny kernel makes every capacity exceed the total mass.
    let k = RadialKernel::riesz(1.0, 0.75, ex(2.0)).unwrap().scaled(1e-3);
    let mut eng = CapacityEngine::radial(space, &k, ex(2.0), SolverOptions::default()).unwrap();
    let e = eng.eta_tree(0, 0.25);
    assert!(e.eta.is_none());
    assert_eq!(e.eta_star, 1.0);
}

#[test]
fn ahlfors_eta_matches_exhaustive_scan() {
    for space in [binary(6), ModelSpace::cantor(6, MassProfile::Uniform).unwrap()] {
        let mut eng = riesz_engine(space.clone(), 0.8, 2.0);
        for x in [0, 17, 40, 63] {
            for r in [0.01, 0.05, 0.2, 0.5] {
                let e = eng.eta_x(x, r);
                let cap = eng.ball_capacity(x, r);
                // Infimum over R of m(B(x, R)) >= cap: scan every realized distance.
                let mut ds: Vec<f64> = (0..64).map(|y| space.distance(x, y)).collect();
                ds.sort_by(f64::total_cmp);
                let want = ds.iter().copied().find(|&d| {
                    let closed: f64 = (0..64).filter(|&y| space.distance(x, y) <= d).map(|y| space.weights()[y]).sum();
                    closed >= cap
                });
                assert_eq!(e.eta, want);
                assert!(e.eta_star >= r);
                if space.mass(space.ball(x, r)) >= cap {
                    assert_eq!(e.eta_star, r);
                }
            }
        }
    }
}

#[test]
fn heavier_measure_weakly_decreases_eta() {
    let space = ModelSpace::cantor(6, MassProfile::Uniform).unwrap();
    let heavy = space.with_weights(space.weights().iter().map(|w| 2.0 * w).collect()).unwrap();
    let mut light = riesz_engine(space, 0.8, 2.0);
    let mut heavy = riesz_engine(heavy, 0.8, 2.0);
    for x in [0, 9, 33, 62] {
        for r in [0.02, 0.1, 0.4] {
            let a = light.eta_x(x, r).eta.unwrap_or(f64::INFINITY);
            let b = heavy.eta_x(x, r).eta.unwrap_or(f64::INFINITY);
            assert!(b <= a);
        }
    }
}

#[test]
fn ball_profile_slope() {
    let mut eng = riesz_engine(binary(10), 0.75, 2.0);
    let prof = ball_capacity_profile(&mut eng, 0, 2..=8, 0.75);
    assert_eq!(prof.rows.len(), 7);
    match prof.statistic {
        Some(ProfileStatistic::Slope { fitted, expected, rel_error }) => {
            assert!((expected - 0.5).abs() < 1e-12);
            assert!(rel_error <= 0.1, "slope {fitted}");
        }
        other => panic!("unexpected statistic {other:?}"),
    }
    let single = ball_capacity_profile(&mut eng, 3, 4..=4, 0.75);
    assert_eq!(single.rows.len(), 1);
    assert!(single.rows[0].capacity > 0.0 && single.statistic.is_none());
}

#[test]
fn critical_ball_capacity_is_affine_in_depth() {
    // At s = 1/p' on a uniform tree with p = 2, 1/C(B(x, delta^n)) grows by a
    // constant step per level.
    for b in [2usize, 3] {
        let tree = TreeSpace::uniform(b, 9, 0.5).unwrap();
        let mut eng = riesz_engine(ModelSpace::tree_boundary(tree.clone()), 0.5, 2.0);
        let inv: Vec<f64> = (1..=8).map(|n| 1.0 / eng.ball_capacity(0, tree.delta_pow(n))).collect();
        let step = inv[1] - inv[0];
        assert!(step > 0.0);
        for w in inv.windows(2) {
            assert!(rel_diff(w[1] - w[0], step) < 1e-6);
        }
        let prof = ball_capacity_profile(&mut eng, 0, 2..=8, 0.5);
        assert!(matches!(prof.statistic, Some(ProfileStatistic::LogProduct { ratio, .. }) if ratio > 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn capacity_is_monotone(seed in any::<u64>(), p in 1.5f64..3.0) {
        let eng = riesz_engine(binary(5), 0.5 * (1.0 / ex(p).conjugate() + 1.0), p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = random_set(&mut rng, 32);
        let mut big = small.clone();
        big.union_with(&random_set(&mut rng, 32));
        prop_assert!(eng.capacity(&small) <= eng.capacity(&big) * (1.0 + 1e-9));
    }

    #[test]
    fn capacity_is_subadditive(seed in any::<u64>(), parts in 2usize..5) {
        let eng = riesz_engine(ModelSpace::cantor(5, MassProfile::Uniform).unwrap(), 0.8, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets: Vec<LeafSet> = (0..parts).map(|_| random_set(&mut rng, 32)).collect();
        let mut union = LeafSet::empty(32);
        for s in &sets {
            union.union_with(s);
        }
        let sum: f64 = sets.iter().map(|s| eng.capacity(s)).sum();
        prop_assert!(eng.capacity(&union) <= sum * (1.0 + 1e-9));
    }

    #[test]
    fn primal_density_is_feasible(seed in any::<u64>(), p in 1.3f64..4.0) {
        let eng = riesz_engine(binary(5), 0.5 * (1.0 / ex(p).conjugate() + 1.0), p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_set(&mut rng, 32);
        let sol = eng.solve(&set);
        let u = eng.potential(&sol.density);
        prop_assert!(set.iter().all(|x| u[x] >= 1.0 - 1e-9));
        prop_assert!(sol.density.iter().all(|&v| v >= 0.0));
        prop_assert!(sol.relative_gap <= 1e-3);
    }
}

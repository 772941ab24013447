use alloc::vec::Vec;

use super::solver::{CapacitySolution, Dual};
use crate::kernel::{Exponent, KernelOperator};
use crate::linalg::cholesky_solve;
use crate::space::LeafSet;

/// Active-set solution of the `p = 2` dual `min mu^T M mu / 2 - sum mu`, `mu >= 0`,
/// with `M = K^T W K` restricted to the target.
pub(crate) fn solve_quadratic<K: KernelOperator + ?Sized>(
    op: &K,
    weights: &[f64],
    target: &LeafSet,
) -> CapacitySolution {
    let n = op.len();
    let two = Exponent::new(2.0).expect("2 is a valid exponent");
    let dual = Dual::new(op, weights, target, two);
    let e = &dual.support;
    let m = e.len();
    if m == 0 {
        return CapacitySolution::empty(n);
    }
    // Columns of K restricted to the support, then the Gram matrix under W.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut unit = alloc::vec![0.0; n];
    for &j in e {
        unit[j] = 1.0;
        let mut out = alloc::vec![0.0; n];
        op.apply(&unit, &mut out);
        for o in &mut out {
            *o *= dual.inv_kappa;
        }
        unit[j] = 0.0;
        cols.push(out);
    }
    let mut gram = alloc::vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let v: f64 = (0..n).map(|x| weights[x] * cols[a][x] * cols[b][x]).sum();
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    let grad = |x: &[f64], i: usize| 1.0 - (0..m).map(|j| gram[i * m + j] * x[j]).sum::<f64>();
    let mut x = alloc::vec![0.0; m];
    let mut passive = alloc::vec![false; m];
    let mut iterations = 0;
    let eps = 1e-13;
    loop {
        let cand = (0..m)
            .filter(|&i| !passive[i])
            .map(|i| (i, grad(&x, i)))
            .filter(|&(_, g)| g > eps)
            .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((i, g)),
            });
        let Some((j, _)) = cand else { break };
        if iterations > 10 * m + 100 {
            break;
        }
        passive[j] = true;
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let k = idx.len();
            let mut sub = alloc::vec![0.0; k * k];
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    sub[a * k + b] = gram[ia * m + ib];
                }
            }
            let z = cholesky_solve(&sub, k, &alloc::vec![1.0; k]).unwrap_or_else(|| alloc::vec![0.0; k]);
            if z.iter().all(|&v| v > eps) {
                for (a, &ia) in idx.iter().enumerate() {
                    x[ia] = z[a];
                }
                break;
            }
            let mut step = 1.0f64;
            for (a, &ia) in idx.iter().enumerate() {
                if z[a] <= eps {
                    let denom = x[ia] - z[a];
                    if denom > 0.0 {
                        step = step.min(x[ia] / denom);
                    }
                }
            }
            for (a, &ia) in idx.iter().enumerate() {
                x[ia] += step * (z[a] - x[ia]);
                if x[ia] <= eps {
                    x[ia] = 0.0;
                    passive[ia] = false;
                }
            }
            if iterations > 10 * m + 100 {
                break;
            }
        }
    }
    let mut mu = alloc::vec![0.0; n];
    for (a, &i) in e.iter().enumerate() {
        mu[i] = x[a];
    }
    let st = dual.state(mu);
    let mut sol = dual.finish(&st, &st, iterations, f64::INFINITY, true);
    sol.converged = true;
    sol
}

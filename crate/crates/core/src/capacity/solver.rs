use alloc::vec::Vec;

use crate::kernel::{Exponent, KernelOperator};
use crate::num;
use crate::space::LeafSet;

/// Stopping rules shared by the capacity solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target relative duality gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Allowed shortfall of `K * f` below 1 on the target set.
    pub feasibility_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 10_000, feasibility_slack: 1e-9 }
    }
}

/// Capacity value with a primal density, an equilibrium measure and the gap between them.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySolution {
    pub value: f64,
    /// Primal density `f >= 0` with `K * f >= 1` on the target.
    pub density: Vec<f64>,
    /// Measure on the target normalized by `||K * mu||_{p'} = 1`.
    pub measure: Vec<f64>,
    /// `||f||_p^p`, an upper bound for the capacity.
    pub primal_value: f64,
    /// `(sum mu)^p`, a lower bound for the capacity.
    pub dual_value: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CapacitySolution {
    pub(crate) fn empty(n: usize) -> Self {
        Self {
            value: 0.0,
            density: alloc::vec![0.0; n],
            measure: alloc::vec![0.0; n],
            primal_value: 0.0,
            dual_value: 0.0,
            relative_gap: 0.0,
            iterations: 0,
            converged: true,
        }
    }
}

/// Dual iterate with everything needed for the objective, gradient and bounds.
///
/// Works with the rescaled kernel `K / kappa` so that the iteration does not
/// depend on the overall size of the kernel.
pub(crate) struct DualState {
    pub mu: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub energy: f64,
    pub mass: f64,
}

pub(crate) struct Dual<'a, K: KernelOperator + ?Sized> {
    pub op: &'a K,
    pub weights: &'a [f64],
    pub support: Vec<usize>,
    pub pp: f64,
    pub p: f64,
    pub inv_kappa: f64,
}

impl<'a, K: KernelOperator + ?Sized> Dual<'a, K> {
    pub fn new(op: &'a K, weights: &'a [f64], target: &LeafSet, p: Exponent) -> Self {
        let kappa = op.norm_1(weights);
        Self {
            op,
            weights,
            support: target.iter().collect(),
            pp: p.conjugate(),
            p: p.value(),
            inv_kappa: 1.0 / kappa,
        }
    }

    fn apply(&self, masses: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; masses.len()];
        self.op.apply(masses, &mut out);
        for o in &mut out {
            *o *= self.inv_kappa;
        }
        out
    }

    pub fn state(&self, mu: Vec<f64>) -> DualState {
        let u = self.apply(&mu);
        let mut energy = 0.0;
        let f: Vec<f64> = u
            .iter()
            .zip(self.weights)
            .map(|(&ui, &w)| {
                let t = num::pow(ui.max(0.0), self.pp - 1.0);
                energy += w * t * ui;
                w * t
            })
            .collect();
        let v = self.apply(&f);
        let mass = self.support.iter().map(|&i| mu[i]).sum();
        DualState { mu, u, v, energy, mass }
    }

    pub fn objective(&self, st: &DualState) -> f64 {
        st.energy / self.pp - st.mass
    }

    /// Multiplies the iterate by the optimal factor along its ray.
    pub fn rescale(&self, st: &mut DualState) {
        if st.energy <= 0.0 || st.mass <= 0.0 {
            return;
        }
        let t = num::pow(st.mass / st.energy, 1.0 / (self.pp - 1.0));
        let tv = num::pow(t, self.pp - 1.0);
        for i in &self.support {
            st.mu[*i] *= t;
        }
        for x in &mut st.u {
            *x *= t;
        }
        for x in &mut st.v {
            *x *= tv;
        }
        st.energy *= num::pow(t, self.pp);
        st.mass *= t;
    }

    /// `(primal, dual)` bounds for the rescaled kernel.
    pub fn bounds(&self, st: &DualState) -> (f64, f64) {
        let min_v = self.support.iter().map(|&i| st.v[i]).fold(f64::INFINITY, f64::min);
        let primal = st.energy / num::pow(min_v, self.p);
        let dual = num::pow(st.mass, self.p) / num::pow(st.energy, self.p / self.pp);
        (primal, dual)
    }

    /// Converts a state into outputs for the original kernel.
    pub fn finish(
        &self,
        best_primal: &DualState,
        best_dual: &DualState,
        iterations: usize,
        tol: f64,
        prefer_primal: bool,
    ) -> CapacitySolution {
        let (primal, _) = self.bounds(best_primal);
        let (_, dual) = self.bounds(best_dual);
        let kp = num::pow(self.inv_kappa, self.p);
        let min_v = self.support.iter().map(|&i| best_primal.v[i]).fold(f64::INFINITY, f64::min);
        // K f = (K / kappa)(f kappa); the rescaled problem used density u^{p'-1} / min v.
        let density = best_primal
            .u
            .iter()
            .map(|&x| num::pow(x.max(0.0), self.pp - 1.0) / min_v * self.inv_kappa)
            .collect();
        let norm = num::pow(best_dual.energy, 1.0 / self.pp);
        let measure = best_dual.mu.iter().map(|&m| m / norm * self.inv_kappa).collect();
        let gap = if primal > 0.0 { (1.0 - dual / primal).max(0.0) } else { 0.0 };
        let primal_value = primal * kp;
        let dual_value = dual * kp;
        CapacitySolution {
            value: if prefer_primal { primal_value } else { dual_value },
            density,
            measure,
            primal_value,
            dual_value,
            relative_gap: gap,
            iterations,
            converged: gap <= tol,
        }
    }
}

fn clone_state(st: &DualState) -> DualState {
    DualState { mu: st.mu.clone(), u: st.u.clone(), v: st.v.clone(), energy: st.energy, mass: st.mass }
}

/// Spectral projected gradient on the dual with a nonmonotone line search.
pub(crate) fn solve_spg<K: KernelOperator + ?Sized>(
    dual: &Dual<'_, K>,
    n: usize,
    opts: &SolverOptions,
    prefer_primal: bool,
) -> CapacitySolution {
    const MEMORY: usize = 10;
    const RESCALE_EVERY: usize = 10;
    let mut mu = alloc::vec![0.0; n];
    for &i in &dual.support {
        mu[i] = 1.0;
    }
    let mut st = dual.state(mu);
    dual.rescale(&mut st);
    let mut best_p = clone_state(&st);
    let mut best_d = clone_state(&st);
    let (mut bp, mut bd) = dual.bounds(&st);
    let grad = |s: &DualState, i: usize| s.v[i] - 1.0;
    let mut alpha = {
        let gmax = dual.support.iter().map(|&i| grad(&st, i).abs()).fold(0.0, f64::max);
        if gmax > 0.0 { 1.0 / gmax } else { 1.0 }
    };
    let mut history: Vec<f64> = alloc::vec![dual.objective(&st)];
    let mut iters = 0;
    while iters < opts.max_iters {
        if 1.0 - bd / bp <= opts.tol {
            break;
        }
        iters += 1;
        let d: Vec<(usize, f64)> = dual
            .support
            .iter()
            .map(|&i| (i, (st.mu[i] - alpha * grad(&st, i)).max(0.0) - st.mu[i]))
            .collect();
        let slope: f64 = d.iter().map(|&(i, di)| grad(&st, i) * di).sum();
        if !(slope < 0.0) {
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let mut mu = st.mu.clone();
            for &(i, di) in &d {
                mu[i] = (mu[i] + lambda * di).max(0.0);
            }
            let cand = dual.state(mu);
            if dual.objective(&cand) <= reference + 1e-4 * lambda * slope {
                next = Some(cand);
                break;
            }
            lambda *= 0.5;
        }
        let Some(mut cand) = next else { break };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for &i in &dual.support {
            let s = cand.mu[i] - st.mu[i];
            ss += s * s;
            sy += s * (grad(&cand, i) - grad(&st, i));
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-30, 1e30) } else { 1e30f64.min(alpha * 10.0) };
        let rescaled = iters % RESCALE_EVERY == 0;
        if rescaled {
            dual.rescale(&mut cand);
        }
        st = cand;
        let (pv, dv) = dual.bounds(&st);
        if pv < bp {
            bp = pv;
            best_p = clone_state(&st);
        }
        if dv > bd {
            bd = dv;
            best_d = clone_state(&st);
        }
        if rescaled {
            history.clear();
        }
        history.push(dual.objective(&st));
        if history.len() > MEMORY {
            history.remove(0);
        }
    }
    dual.finish(&best_p, &best_d, iters, opts.tol, prefer_primal)
}

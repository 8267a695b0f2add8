//! Adaptive regularized Newton-CG for a known Hölder exponent `ν`.
//!
//! Each iteration solves `(∇²f(x) + 2ε I) d = -∇f(x)` once with capped CG,
//! where `ε = (γ ‖g‖^ν)^{1/(1+ν)}`. The modulus estimate `γ` only grows, and
//! only from Taylor residuals along the step just taken, so no system is
//! ever re-solved.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::capped_cg::{capped_cg, CgConfig, DirectionType};
use crate::error::{Error, Result};
use crate::estimators::{holder_estimate_h0, holder_estimate_h1, StepCache};
use crate::oracle::{Oracle, Problem};
use crate::solve::{
    backtrack_nc, backtrack_sol, check_common, check_unit_open, check_x0, drive, nc_transform, trial_point,
    IterationRecord, OuterStep, SolveResult, SolverState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncgConfig {
    pub gamma0: f64,
    pub eta: f64,
    pub theta: f64,
    /// Hölder exponent; falls back to the problem's `nu_hint` when `None`.
    pub nu: Option<f64>,
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub cg: CgConfig,
}

impl Default for AncgConfig {
    fn default() -> Self {
        Self {
            gamma0: 10.0,
            eta: 0.01,
            theta: 0.5,
            nu: None,
            grad_tol: 1e-4,
            max_outer: 10_000,
            max_backtracks: 60,
            cg: CgConfig::default(),
        }
    }
}

impl AncgConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma0, self.theta, self.grad_tol, self.max_outer, self.max_backtracks)?;
        check_unit_open("eta", self.eta)?;
        if let Some(nu) = self.nu {
            check_nu(nu)?;
        }
        self.cg.validate()
    }

    /// The exponent this run will use.
    pub fn resolve_nu(&self, problem: &dyn Problem) -> Result<f64> {
        let nu = self
            .nu
            .or_else(|| problem.nu_hint())
            .ok_or_else(|| Error::Config(format!("no Hölder exponent given for {}", problem.name())))?;
        check_nu(nu)?;
        Ok(nu)
    }
}

pub(crate) fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Config(format!("nu must lie in (0,1], got {nu}")));
    }
    Ok(())
}

/// `(ε_k, ζ_k)` for gradient norm `g_norm`.
pub fn damping(gamma: f64, g_norm: f64, nu: f64) -> (f64, f64) {
    let eps = (gamma * g_norm.powf(nu)).powf(1.0 / (1.0 + nu));
    let zeta = g_norm.powf(nu / (1.0 + nu)).min(0.5);
    (eps, zeta)
}

pub fn ancg_solve(problem: &dyn Problem, x0: &DVector<f64>, cfg: &AncgConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_x0(problem, x0)?;
    let nu = cfg.resolve_nu(problem)?;
    let mut stepper = AncgStepper { cfg: *cfg, nu };
    drive(problem, x0, cfg.gamma0, cfg.grad_tol, cfg.max_outer, &mut stepper)
}

/// One iteration from `state`; `state` is advanced in place.
pub fn ancg_step(state: &mut SolverState, oracle: &Oracle<'_>, cfg: &AncgConfig, nu: f64) -> Result<IterationRecord> {
    AncgStepper { cfg: *cfg, nu }.step(state, oracle)
}

struct AncgStepper {
    cfg: AncgConfig,
    nu: f64,
}

/// `H0` along `t·d`, or `None` when the cached value cannot support it.
fn h0_along(
    d: &DVector<f64>,
    t: f64,
    f_x: f64,
    f_y: f64,
    g_x: &DVector<f64>,
    quad_form_d: f64,
    nu: f64,
) -> Option<f64> {
    if !f_y.is_finite() {
        return None;
    }
    let cache = StepCache {
        step: d * t,
        f_x,
        f_y,
        g_x,
        quad_form: t * t * quad_form_d,
        g_y: None,
        h_step: None,
    };
    holder_estimate_h0(&cache, nu).ok()
}

impl OuterStep for AncgStepper {
    fn step(&mut self, state: &mut SolverState, oracle: &Oracle<'_>) -> Result<IterationRecord> {
        let cfg = &self.cfg;
        let nu = self.nu;
        let (eps, zeta) = damping(state.gamma, state.g_norm, nu);
        let x = &state.x;
        let g = &state.g_x;
        let cg = capped_cg(|v| oracle.eval_hvp(x, v), g, eps, zeta, &cfg.cg)?;
        let raw_curvature = cg.curvature(eps);

        let (d, quad_form, ls) = match cg.d_type {
            DirectionType::Nc => {
                let d = nc_transform(&cg.d, raw_curvature, g)?;
                let scale = d.norm() / cg.d.norm();
                let ls = backtrack_nc(oracle, x, state.f_x, &d, cfg.eta, cfg.theta, cfg.max_backtracks)?;
                (d, raw_curvature * scale * scale, ls)
            }
            DirectionType::Sol => {
                let ls = backtrack_sol(oracle, x, state.f_x, &cg.d, eps, cfg.eta, cfg.theta, cfg.max_backtracks)?;
                (cg.d.clone(), raw_curvature, ls)
            }
        };

        let x_next = trial_point(x, &d, ls.alpha);
        let f_next = ls.accepted_value();
        let g_next = oracle.eval_grad(&x_next)?;

        let prev = |i: usize| cfg.theta.powi(i as i32);
        let sigma = match (cg.d_type, ls.j) {
            (DirectionType::Nc, 0) => None,
            (DirectionType::Nc, j) => h0_along(&d, prev(j - 1), state.f_x, ls.trial_values[j - 1], g, quad_form, nu),
            (DirectionType::Sol, 0) => {
                let h_step = &cg.hbar_d - &d * (2.0 * eps);
                let cache = StepCache {
                    step: d.clone(),
                    f_x: state.f_x,
                    f_y: f_next,
                    g_x: g,
                    quad_form,
                    g_y: Some(&g_next),
                    h_step: Some(h_step),
                };
                holder_estimate_h1(&cache, nu).ok()
            }
            (DirectionType::Sol, j) => {
                let full = h0_along(&d, 1.0, state.f_x, ls.trial_values[0], g, quad_form, nu);
                let last = h0_along(&d, prev(j - 1), state.f_x, ls.trial_values[j - 1], g, quad_form, nu);
                match (full, last) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                }
            }
        };
        let sigma = sigma.filter(|s| s.is_finite());
        let gamma_after = match sigma {
            Some(s) => state.gamma.max(s),
            None => state.gamma,
        };

        let record = IterationRecord {
            k: state.k,
            f: state.f_x,
            grad_norm: state.g_norm,
            d_type: cg.d_type,
            epsilon: eps,
            zeta,
            alpha: ls.alpha,
            j: ls.j,
            sigma,
            gamma_after,
            cg_iters: cg.iters,
            hv_products: cg.hv_products,
            wall_ns: 0,
        };
        state.gamma = gamma_after;
        state.advance(x_next, f_next, g_next);
        Ok(record)
    }
}

//! Universal adaptive regularized Newton-CG: no Hölder exponent needed.
//!
//! The damping is `ε = (γ‖g‖)^{1/2}` for every problem. Instead of residual
//! estimates, `γ` doubles whenever a step neither halves the gradient nor
//! buys enough descent.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::capped_cg::{capped_cg, CgConfig, DirectionType};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, Problem};
use crate::solve::{
    backtrack, backtrack_nc, check_common, check_x0, drive, eval_f_or_inf, nc_transform, trial_point, Decrease,
    IterationRecord, OuterStep, SolveResult, SolverState,
};

/// Which sufficient-decrease scale the SOL backtracking uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsVariant {
    /// `η ε θʲ ‖d‖²`, the form the descent analysis relies on.
    #[default]
    Proof,
    /// `η ε^{1/2} θʲ ‖d‖²`.
    Displayed,
}

impl std::str::FromStr for LsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proof" => Ok(LsVariant::Proof),
            "displayed" => Ok(LsVariant::Displayed),
            other => Err(Error::Config(format!("unknown line-search variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UancgConfig {
    pub gamma0: f64,
    pub eta: f64,
    pub theta: f64,
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub cg: CgConfig,
    pub ls_variant: LsVariant,
}

impl Default for UancgConfig {
    fn default() -> Self {
        Self {
            gamma0: 10.0,
            eta: 0.01,
            theta: 0.5,
            grad_tol: 1e-4,
            max_outer: 10_000,
            max_backtracks: 60,
            cg: CgConfig::default(),
            ls_variant: LsVariant::Proof,
        }
    }
}

impl UancgConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma0, self.theta, self.grad_tol, self.max_outer, self.max_backtracks)?;
        if !(self.eta > 0.0 && self.eta <= 0.5) {
            return Err(Error::Config(format!("eta must lie in (0,1/2], got {}", self.eta)));
        }
        self.cg.validate()
    }

    /// `η(1-η)θ/400`.
    pub fn c_sol(&self) -> f64 {
        self.eta * (1.0 - self.eta) * self.theta / 400.0
    }
}

/// `(ε_k, ζ_k)` for gradient norm `g_norm`.
pub fn damping(gamma: f64, g_norm: f64) -> (f64, f64) {
    ((gamma * g_norm).sqrt(), g_norm.sqrt().min(0.5))
}

/// Whether a SOL step forces `γ` to double.
pub fn sol_doubles_gamma(c_sol: f64, gamma: f64, g_norm: f64, g_next_norm: f64, descent: f64) -> bool {
    g_next_norm > 0.5 * g_norm && descent < c_sol * gamma.powf(-0.5) * g_norm.powf(1.5)
}

/// Whether an NC step forces `γ` to double.
pub fn nc_doubles_gamma(theta: f64, gamma: f64, alpha: f64, g_norm: f64, g_next_norm: f64) -> bool {
    g_next_norm > 0.5 * g_norm && alpha < theta / gamma
}

pub fn uancg_solve(problem: &dyn Problem, x0: &DVector<f64>, cfg: &UancgConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_x0(problem, x0)?;
    let mut stepper = UancgStepper { cfg: *cfg };
    drive(problem, x0, cfg.gamma0, cfg.grad_tol, cfg.max_outer, &mut stepper)
}

pub fn uancg_step(state: &mut SolverState, oracle: &Oracle<'_>, cfg: &UancgConfig) -> Result<IterationRecord> {
    UancgStepper { cfg: *cfg }.step(state, oracle)
}

struct UancgStepper {
    cfg: UancgConfig,
}

impl OuterStep for UancgStepper {
    fn step(&mut self, state: &mut SolverState, oracle: &Oracle<'_>) -> Result<IterationRecord> {
        let cfg = &self.cfg;
        let gamma = state.gamma;
        let g_norm = state.g_norm;
        let (eps, zeta) = damping(gamma, g_norm);
        let x = &state.x;
        let g = &state.g_x;
        let cg = capped_cg(|v| oracle.eval_hvp(x, v), g, eps, zeta, &cfg.cg)?;

        let (alpha, j, x_next, f_next, g_next, doubles) = match cg.d_type {
            DirectionType::Nc => {
                let d = nc_transform(&cg.d, cg.curvature(eps), g)?;
                let ls = backtrack_nc(oracle, x, state.f_x, &d, cfg.eta, cfg.theta, cfg.max_backtracks)?;
                let x_next = trial_point(x, &d, ls.alpha);
                let g_next = oracle.eval_grad(&x_next)?;
                let doubles = nc_doubles_gamma(cfg.theta, gamma, ls.alpha, g_norm, g_next.norm());
                (ls.alpha, ls.j, x_next, ls.accepted_value(), g_next, doubles)
            }
            DirectionType::Sol => {
                let d = &cg.d;
                let x_full = trial_point(x, d, 1.0);
                let f_full = eval_f_or_inf(oracle, &x_full)?;
                let g_full = if f_full <= state.f_x {
                    Some(oracle.eval_grad(&x_full)?)
                } else {
                    None
                };
                let full_accept = g_full.as_ref().is_some_and(|gf| gf.norm() <= 0.5 * g_norm);
                let (alpha, j, x_next, f_next, g_next) = if full_accept {
                    (1.0, 0, x_full, f_full, g_full.unwrap())
                } else {
                    let scale = match cfg.ls_variant {
                        LsVariant::Proof => eps,
                        LsVariant::Displayed => eps.sqrt(),
                    };
                    let ls = backtrack(
                        oracle,
                        x,
                        state.f_x,
                        d,
                        Decrease::Newton { scale },
                        cfg.eta,
                        cfg.theta,
                        cfg.max_backtracks,
                        Some(f_full),
                    )?;
                    let (x_next, g_next) = match (ls.j, g_full) {
                        (0, Some(gf)) => (x_full, gf),
                        _ => {
                            let xn = trial_point(x, d, ls.alpha);
                            let gn = oracle.eval_grad(&xn)?;
                            (xn, gn)
                        }
                    };
                    (ls.alpha, ls.j, x_next, ls.accepted_value(), g_next)
                };
                let doubles = sol_doubles_gamma(cfg.c_sol(), gamma, g_norm, g_next.norm(), state.f_x - f_next);
                (alpha, j, x_next, f_next, g_next, doubles)
            }
        };

        let gamma_after = if doubles { 2.0 * gamma } else { gamma };
        let record = IterationRecord {
            k: state.k,
            f: state.f_x,
            grad_norm: g_norm,
            d_type: cg.d_type,
            epsilon: eps,
            zeta,
            alpha,
            j,
            sigma: None,
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

//! Fixed-damping Newton-CG baseline: `ε ≡ ε_target^{ν/(1+ν)}` for the whole
//! run, with the same capped-CG subproblem and line searches as the adaptive
//! method.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ancg::check_nu;
use crate::capped_cg::{capped_cg, CgConfig, DirectionType};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, Problem};
use crate::solve::{
    backtrack_nc, backtrack_sol, check_common, check_unit_open, check_x0, drive, nc_transform, trial_point,
    IterationRecord, OuterStep, SolveResult, SolverState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedConfig {
    pub eps_target: f64,
    /// Falls back to the problem's `nu_hint` when `None`.
    pub nu: Option<f64>,
    pub eta: f64,
    pub theta: f64,
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub cg: CgConfig,
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            eps_target: 1e-4,
            nu: None,
            eta: 0.01,
            theta: 0.5,
            grad_tol: 1e-4,
            max_outer: 10_000,
            max_backtracks: 60,
            cg: CgConfig::default(),
        }
    }
}

impl FixedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_target > 0.0) || !self.eps_target.is_finite() {
            return Err(Error::Config(format!("eps_target must be > 0, got {}", self.eps_target)));
        }
        check_common(1.0, self.theta, self.grad_tol, self.max_outer, self.max_backtracks)?;
        check_unit_open("eta", self.eta)?;
        if let Some(nu) = self.nu {
            check_nu(nu)?;
        }
        self.cg.validate()
    }

    /// `ε_target^{ν/(1+ν)}`.
    pub fn damping(&self, nu: f64) -> f64 {
        self.eps_target.powf(nu / (1.0 + nu))
    }
}

pub fn fixed_solve(problem: &dyn Problem, x0: &DVector<f64>, cfg: &FixedConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_x0(problem, x0)?;
    let nu = cfg
        .nu
        .or_else(|| problem.nu_hint())
        .ok_or_else(|| Error::Config(format!("no Hölder exponent given for {}", problem.name())))?;
    check_nu(nu)?;
    let sigma = cfg.damping(nu);
    let mut stepper = FixedStepper {
        cfg: *cfg,
        sigma,
        zeta: sigma.min(0.5),
    };
    // γ plays no role here; records carry 0.
    drive(problem, x0, 0.0, cfg.grad_tol, cfg.max_outer, &mut stepper)
}

struct FixedStepper {
    cfg: FixedConfig,
    sigma: f64,
    zeta: f64,
}

impl OuterStep for FixedStepper {
    fn step(&mut self, state: &mut SolverState, oracle: &Oracle<'_>) -> Result<IterationRecord> {
        let cfg = &self.cfg;
        let (sigma, zeta) = (self.sigma, self.zeta);
        let x = &state.x;
        let g = &state.g_x;
        let cg = capped_cg(|v| oracle.eval_hvp(x, v), g, sigma, zeta, &cfg.cg)?;
        let (d, ls) = match cg.d_type {
            DirectionType::Nc => {
                let d = nc_transform(&cg.d, cg.curvature(sigma), g)?;
                let ls = backtrack_nc(oracle, x, state.f_x, &d, cfg.eta, cfg.theta, cfg.max_backtracks)?;
                (d, ls)
            }
            DirectionType::Sol => {
                let ls = backtrack_sol(oracle, x, state.f_x, &cg.d, sigma, cfg.eta, cfg.theta, cfg.max_backtracks)?;
                (cg.d.clone(), ls)
            }
        };
        let x_next = trial_point(x, &d, ls.alpha);
        let g_next = oracle.eval_grad(&x_next)?;
        let record = IterationRecord {
            k: state.k,
            f: state.f_x,
            grad_norm: state.g_norm,
            d_type: cg.d_type,
            epsilon: sigma,
            zeta,
            alpha: ls.alpha,
            j: ls.j,
            sigma: None,
            gamma_after: 0.0,
            cg_iters: cg.iters,
            hv_products: cg.hv_products,
            wall_ns: 0,
        };
        state.advance(x_next, ls.accepted_value(), g_next);
        Ok(record)
    }
}

//! Outer-loop plumbing shared by the Newton-CG variants: iteration records,
//! results, the driver loop and the two backtracking rules.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::capped_cg::DirectionType;
use crate::error::{Error, Result};
use crate::oracle::{EvalCounters, Oracle, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxOuterReached,
    LineSearchFailed,
    CgStalled,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Converged => "Converged",
            Status::MaxOuterReached => "MaxOuterReached",
            Status::LineSearchFailed => "LineSearchFailed",
            Status::CgStalled => "CgStalled",
        };
        f.write_str(s)
    }
}

/// Diagnostics for one outer iteration. `f` and `grad_norm` refer to the
/// iterate the step started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub d_type: DirectionType,
    /// Damping `ε_k`; the system solved is `(H + 2ε_k I) d = -g`.
    pub epsilon: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub j: usize,
    /// Local modulus estimate, when the step produced one.
    pub sigma: Option<f64>,
    pub gamma_after: f64,
    pub cg_iters: usize,
    pub hv_products: usize,
    pub wall_ns: u64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: DVector<f64>,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
    pub totals: EvalCounters,
}

impl SolveResult {
    /// Number of damped systems solved (one capped-CG call per record).
    pub fn subproblems(&self) -> usize {
        self.trace.len()
    }

    pub fn cg_iterations(&self) -> usize {
        self.trace.iter().map(|r| r.cg_iters).sum()
    }
}

/// Iterate state carried between outer steps.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub f_x: f64,
    pub g_x: DVector<f64>,
    pub g_norm: f64,
    pub gamma: f64,
    pub k: usize,
}

impl SolverState {
    pub fn at(oracle: &Oracle<'_>, x: DVector<f64>, gamma: f64) -> Result<Self> {
        let f_x = oracle.eval_f(&x)?;
        let g_x = oracle.eval_grad(&x)?;
        let g_norm = g_x.norm();
        Ok(Self {
            x,
            f_x,
            g_x,
            g_norm,
            gamma,
            k: 0,
        })
    }

    pub(crate) fn advance(&mut self, x: DVector<f64>, f_x: f64, g_x: DVector<f64>) {
        self.g_norm = g_x.norm();
        self.x = x;
        self.f_x = f_x;
        self.g_x = g_x;
        self.k += 1;
    }
}

/// One outer iteration of a Newton-CG variant. Implementations update
/// `state` in place and return the record (without `wall_ns`).
pub(crate) trait OuterStep {
    fn step(&mut self, state: &mut SolverState, oracle: &Oracle<'_>) -> Result<IterationRecord>;
}

pub(crate) fn drive(
    problem: &dyn Problem,
    x0: &DVector<f64>,
    gamma0: f64,
    grad_tol: f64,
    max_outer: usize,
    stepper: &mut dyn OuterStep,
) -> Result<SolveResult> {
    let oracle = Oracle::new(problem);
    let mut state = SolverState::at(&oracle, x0.clone(), gamma0)?;
    let mut trace = Vec::new();
    let status = loop {
        if state.g_norm <= grad_tol {
            break Status::Converged;
        }
        if state.k >= max_outer {
            break Status::MaxOuterReached;
        }
        let start = Instant::now();
        match stepper.step(&mut state, &oracle) {
            Ok(mut rec) => {
                rec.wall_ns = start.elapsed().as_nanos() as u64;
                trace.push(rec);
            }
            Err(Error::LineSearchFailed(_)) => break Status::LineSearchFailed,
            Err(Error::CgStalled(_)) => break Status::CgStalled,
            Err(e) => return Err(e),
        }
    };
    Ok(SolveResult {
        x_final: state.x,
        f_final: state.f_x,
        grad_norm_final: state.g_norm,
        status,
        trace,
        totals: oracle.counters(),
    })
}

pub(crate) fn check_x0(problem: &dyn Problem, x0: &DVector<f64>) -> Result<()> {
    if problem.dim() == 0 {
        return Err(Error::Config("problem dimension must be >= 1".into()));
    }
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Config(format!("{name} must lie in (0,1), got {v}")));
    }
    Ok(())
}

pub(crate) fn check_common(gamma0: f64, theta: f64, grad_tol: f64, max_outer: usize, max_backtracks: usize) -> Result<()> {
    if !(gamma0 >= 1.0) || !gamma0.is_finite() {
        return Err(Error::Config(format!("gamma0 must be >= 1, got {gamma0}")));
    }
    check_unit_open("theta", theta)?;
    if !(grad_tol > 0.0) {
        return Err(Error::Config(format!("grad_tol must be > 0, got {grad_tol}")));
    }
    if max_outer == 0 || max_backtracks == 0 {
        return Err(Error::Config("iteration caps must be >= 1".into()));
    }
    Ok(())
}

/// `x + α d`; every trial point and accepted iterate goes through here so
/// the cached function values match the iterate exactly.
pub fn trial_point(x: &DVector<f64>, d: &DVector<f64>, alpha: f64) -> DVector<f64> {
    x + d * alpha
}

/// `f(y)`, mapping a non-finite objective to `+∞` so that line searches can
/// reject it.
pub(crate) fn eval_f_or_inf(oracle: &Oracle<'_>, y: &DVector<f64>) -> Result<f64> {
    match oracle.eval_f(y) {
        Ok(v) => Ok(v),
        Err(Error::NonFinite { what: "objective", .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    /// `θ^j`.
    pub alpha: f64,
    pub j: usize,
    /// `f(x + θ^i d)` for `i = 0..=j`.
    pub trial_values: Vec<f64>,
}

impl LineSearchOutcome {
    pub fn accepted_value(&self) -> f64 {
        self.trial_values[self.j]
    }
}

/// Sufficient-decrease rules for the backtracking searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decrease {
    /// `f(x + θʲd) < f(x) - (η/2) θ^{2j} ‖d‖³`.
    Curvature,
    /// `f(x + θʲd) < f(x) - η·scale·θʲ ‖d‖²`.
    Newton { scale: f64 },
}

/// Smallest `j ∈ [0, max_backtracks]` meeting `rule`. `full_step` supplies an
/// already evaluated `f(x + d)`.
pub fn backtrack(
    oracle: &Oracle<'_>,
    x: &DVector<f64>,
    f_x: f64,
    d: &DVector<f64>,
    rule: Decrease,
    eta: f64,
    theta: f64,
    max_backtracks: usize,
    full_step: Option<f64>,
) -> Result<LineSearchOutcome> {
    let dn = d.norm();
    if dn == 0.0 {
        return Err(Error::Precondition("line search needs d != 0".into()));
    }
    let mut trial_values = Vec::new();
    for j in 0..=max_backtracks {
        let alpha = theta.powi(j as i32);
        let value = match (j, full_step) {
            (0, Some(v)) => v,
            _ => eval_f_or_inf(oracle, &trial_point(x, d, alpha))?,
        };
        trial_values.push(value);
        let required = match rule {
            Decrease::Curvature => 0.5 * eta * alpha * alpha * dn.powi(3),
            Decrease::Newton { scale } => eta * scale * alpha * dn * dn,
        };
        if value < f_x - required {
            return Ok(LineSearchOutcome { alpha, j, trial_values });
        }
    }
    Err(Error::LineSearchFailed(max_backtracks))
}

/// Backtracking along a negative-curvature direction.
pub fn backtrack_nc(
    oracle: &Oracle<'_>,
    x: &DVector<f64>,
    f_x: f64,
    d: &DVector<f64>,
    eta: f64,
    theta: f64,
    max_backtracks: usize,
) -> Result<LineSearchOutcome> {
    backtrack(oracle, x, f_x, d, Decrease::Curvature, eta, theta, max_backtracks, None)
}

/// Backtracking along a damped Newton direction with damping `epsilon`.
pub fn backtrack_sol(
    oracle: &Oracle<'_>,
    x: &DVector<f64>,
    f_x: f64,
    d: &DVector<f64>,
    epsilon: f64,
    eta: f64,
    theta: f64,
    max_backtracks: usize,
) -> Result<LineSearchOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be > 0, got {epsilon}")));
    }
    backtrack(oracle, x, f_x, d, Decrease::Newton { scale: epsilon }, eta, theta, max_backtracks, None)
}

/// `sgn` with `sgn(0) = 1`.
pub fn sign(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Rescales a raw negative-curvature direction so that it points downhill
/// and its Rayleigh quotient equals minus its length:
/// `d = -sgn(d_rawᵀg) · |q| / ‖d_raw‖³ · d_raw` with `q = d_rawᵀ H d_raw`.
pub fn nc_transform(d_raw: &DVector<f64>, quad_form: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
    let dn = d_raw.norm();
    if dn == 0.0 {
        return Err(Error::Precondition("nc_transform needs d != 0".into()));
    }
    if !(quad_form < 0.0) {
        return Err(Error::Precondition(format!(
            "nc_transform needs negative curvature, got dᵀHd = {quad_form}"
        )));
    }
    let scale = -sign(d_raw.dot(g)) * quad_form.abs() / dn.powi(3);
    Ok(d_raw * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn nc_transform_hand_example() {
        // H = diag(1,-2), d_raw = (0,2): q = -8.
        let d = nc_transform(&v(&[0.0, 2.0]), -8.0, &v(&[0.0, 1.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.0, -2.0]);
        let q = -2.0 * d[1] * d[1];
        assert_eq!(q / d.norm_squared(), -d.norm());
    }

    #[test]
    fn nc_transform_zero_inner_product_uses_plus_sign() {
        let d_raw = v(&[1.0, 0.0]);
        let d = nc_transform(&d_raw, -3.0, &v(&[0.0, 1.0])).unwrap();
        assert_eq!(d.as_slice(), &[-3.0, 0.0]);
    }

    #[test]
    fn nc_transform_rejects_nonnegative_curvature() {
        assert!(nc_transform(&v(&[1.0]), 0.0, &v(&[1.0])).is_err());
        assert!(nc_transform(&v(&[0.0]), -1.0, &v(&[1.0])).is_err());
    }

    #[test]
    fn backtracking_arithmetic() {
        let p = make_quadratic(vec![1.0]).unwrap();
        let o = Oracle::new(&p);
        let x = v(&[1.0]);
        // f(0.5) = 0.125 < 0.5 - 0.005 * 0.125
        let ls = backtrack_nc(&o, &x, 0.5, &v(&[-0.5]), 0.01, 0.5, 60).unwrap();
        assert_eq!((ls.j, ls.alpha), (0, 1.0));
        assert_eq!(ls.trial_values, vec![0.125]);
        // f(0) = 0 < 0.5 - 0.001
        let ls = backtrack_sol(&o, &x, 0.5, &v(&[-1.0]), 0.1, 0.01, 0.5, 60).unwrap();
        assert_eq!((ls.j, ls.alpha), (0, 1.0));
    }

    #[test]
    fn ascent_direction_never_accepted() {
        let p = make_quadratic(vec![1.0, 2.0]).unwrap();
        let o = Oracle::new(&p);
        let x = v(&[1.0, 1.0]);
        let g = o.eval_grad(&x).unwrap();
        let f = o.eval_f(&x).unwrap();
        let err = backtrack_sol(&o, &x, f, &g, 0.1, 0.01, 0.5, 30).unwrap_err();
        assert!(matches!(err, Error::LineSearchFailed(30)));
        assert!(matches!(
            backtrack_nc(&o, &x, f, &(&g * 1e-9), 0.01, 0.5, 10),
            Err(Error::LineSearchFailed(10))
        ));
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
        assert_eq!(sign(-1e-300), -1.0);
    }
}

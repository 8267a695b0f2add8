//! Matrix-free problem interface.
//!
//! Solvers see an objective only through [`Oracle`], which checks dimensions,
//! rejects non-finite results and counts every call. Concrete problems
//! implement [`Problem`]; the counting wrapper is per-run state.

use std::cell::Cell;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::rng::InstanceRng;

/// A twice-differentiable objective with Hessian-vector products.
///
/// Implementations must be deterministic and must return a linear, symmetric
/// map from `hvp(x, ·)`.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `∇²f(x) v`.
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// Hölder exponent of the Hessian, when known analytically.
    fn nu_hint(&self) -> Option<f64> {
        None
    }

    /// Hölder modulus of the Hessian on the region the problem documents.
    fn hf_hint(&self) -> Option<f64> {
        None
    }
}

impl<P: Problem + ?Sized> Problem for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).hvp(x, v)
    }
    fn nu_hint(&self) -> Option<f64> {
        (**self).nu_hint()
    }
    fn hf_hint(&self) -> Option<f64> {
        (**self).hf_hint()
    }
}

impl<P: Problem + ?Sized> Problem for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).hvp(x, v)
    }
    fn nu_hint(&self) -> Option<f64> {
        (**self).nu_hint()
    }
    fn hf_hint(&self) -> Option<f64> {
        (**self).hf_hint()
    }
}

/// Number of oracle calls made during one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvalCounters {
    pub n_f: u64,
    pub n_grad: u64,
    pub n_hvp: u64,
}

/// Checked, counting access to a [`Problem`].
pub struct Oracle<'p> {
    problem: &'p dyn Problem,
    counters: Cell<EvalCounters>,
}

impl<'p> Oracle<'p> {
    pub fn new(problem: &'p dyn Problem) -> Self {
        Self {
            problem,
            counters: Cell::new(EvalCounters::default()),
        }
    }

    pub fn problem(&self) -> &'p dyn Problem {
        self.problem
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters.get()
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        let expected = self.problem.dim();
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "input",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(())
    }

    fn bump(&self, f: impl FnOnce(&mut EvalCounters)) {
        let mut c = self.counters.get();
        f(&mut c);
        self.counters.set(c);
    }

    pub fn eval_f(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_input(x)?;
        self.bump(|c| c.n_f += 1);
        let value = self.problem.value(x);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(value)
    }

    pub fn eval_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        self.bump(|c| c.n_grad += 1);
        let g = self.problem.gradient(x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(g)
    }

    pub fn eval_hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        self.check_dim(v)?;
        self.bump(|c| c.n_hvp += 1);
        let hv = self.problem.hvp(x, v);
        if hv.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Hessian-vector product",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(hv)
    }
}

/// Finite-difference step for gradient checks.
pub const FD_STEP_GRAD: f64 = 1e-6;
/// Finite-difference step for Hessian-vector product checks.
pub const FD_STEP_HVP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_grad_err: f64,
    pub max_hvp_err: f64,
}

/// Error of `approx` against `exact`, relative to `max(|exact|, 1)`.
fn scaled_err(diff: f64, exact_norm: f64) -> f64 {
    diff / exact_norm.max(1.0)
}

/// Central-difference directional derivative of `f` along `u` at `x`.
pub fn fd_directional(oracle: &Oracle<'_>, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> Result<f64> {
    let fp = oracle.eval_f(&(x + u * h))?;
    let fm = oracle.eval_f(&(x - u * h))?;
    Ok((fp - fm) / (2.0 * h))
}

/// Central difference of the gradient along `v`, approximating `∇²f(x) v`.
pub fn fd_hvp(oracle: &Oracle<'_>, x: &DVector<f64>, v: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let gp = oracle.eval_grad(&(x + v * h))?;
    let gm = oracle.eval_grad(&(x - v * h))?;
    Ok((gp - gm) / (2.0 * h))
}

/// Checks `∇f` against `f` and `∇²f·v` against `∇f` by central differences
/// along `trials` random unit directions drawn from `seed`.
///
/// Errors are measured relative to `max(|exact|, 1)`.
pub fn fd_check(oracle: &Oracle<'_>, x: &DVector<f64>, trials: usize, seed: u64) -> Result<FdReport> {
    if trials == 0 {
        return Err(Error::Config("fd_check needs at least one trial".into()));
    }
    let n = oracle.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut rng = InstanceRng::new(seed);
    let g = oracle.eval_grad(x)?;
    let mut report = FdReport {
        max_grad_err: 0.0,
        max_hvp_err: 0.0,
    };
    for _ in 0..trials {
        let mut u = rng.normal_vector(n);
        let norm = u.norm();
        if norm == 0.0 {
            continue;
        }
        u /= norm;

        let exact = g.dot(&u);
        let approx = fd_directional(oracle, x, &u, FD_STEP_GRAD)?;
        let grad_err = scaled_err((approx - exact).abs(), exact.abs());

        let hv = oracle.eval_hvp(x, &u)?;
        let hv_fd = fd_hvp(oracle, x, &u, FD_STEP_HVP)?;
        let hvp_err = scaled_err((&hv_fd - &hv).norm(), hv.norm());

        if !grad_err.is_finite() || !hvp_err.is_finite() {
            return Err(Error::NonFinite {
                what: "finite-difference check",
                x: x.as_slice().to_vec(),
            });
        }
        report.max_grad_err = report.max_grad_err.max(grad_err);
        report.max_hvp_err = report.max_hvp_err.max(hvp_err);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;

    fn quad() -> crate::problems::Quadratic {
        make_quadratic(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn quadratic_values() {
        let p = quad();
        let o = Oracle::new(&p);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(o.eval_f(&x).unwrap(), 1.5);
        assert_eq!(o.eval_grad(&x).unwrap().as_slice(), &[1.0, 2.0]);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(o.eval_hvp(&x, &e1).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(o.eval_hvp(&x, &DVector::zeros(2)).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(
            o.counters(),
            EvalCounters {
                n_f: 1,
                n_grad: 1,
                n_hvp: 2
            }
        );
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let p = quad();
        let o = Oracle::new(&p);
        let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let err = o.eval_f(&x).unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(o.eval_grad(&x).unwrap_err().is_config());
        assert!(fd_check(&o, &x, 3, 0).unwrap_err().is_config());
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = quad();
        let o = Oracle::new(&p);
        let x = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(matches!(o.eval_f(&x), Err(Error::NonFinite { .. })));
    }

    struct Blowup;
    impl Problem for Blowup {
        fn name(&self) -> &str {
            "blowup"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            1.0 / x[0]
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, -1.0 / (x[0] * x[0]))
        }
        fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
            v * (2.0 / x[0].powi(3))
        }
    }

    #[test]
    fn non_finite_output_carries_point() {
        let o = Oracle::new(&Blowup);
        match o.eval_f(&DVector::zeros(1)) {
            Err(Error::NonFinite { what, x }) => {
                assert_eq!(what, "objective");
                assert_eq!(x, vec![0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(o.counters().n_f, 1);
    }

    #[test]
    fn fd_check_exact_on_quadratic() {
        let p = quad();
        let o = Oracle::new(&p);
        let x = DVector::from_vec(vec![0.3, -1.7]);
        let r = fd_check(&o, &x, 10, 11).unwrap();
        assert!(r.max_grad_err <= 1e-9, "{r:?}");
        assert!(r.max_hvp_err <= 1e-9, "{r:?}");
    }

    #[test]
    fn fd_check_needs_trials() {
        let p = quad();
        let o = Oracle::new(&p);
        assert!(fd_check(&o, &DVector::zeros(2), 0, 0).unwrap_err().is_config());
    }
}

//! Taylor-residual lower estimates of the Hessian's Hölder modulus.
//!
//! For a step `s = y - x`,
//!
//! ```text
//! R0 = |f(y) - f(x) - ∇f(x)ᵀs - ½ sᵀ∇²f(x)s|      H0 = 2·R0 / ‖s‖^{2+ν}
//! R1 = ‖∇f(y) - ∇f(x) - ∇²f(x)s‖                   H1 = R1 / ‖s‖^{1+ν}
//! ```
//!
//! Both underestimate the modulus on any region where the Hessian is
//! `(H_f, ν)`-Hölder. The solvers fill a [`StepCache`] only from values they
//! already computed.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Steps shorter than this are rejected as degenerate.
pub const MIN_STEP_NORM: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct StepCache<'a> {
    /// `y - x`.
    pub step: DVector<f64>,
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: &'a DVector<f64>,
    /// `(y - x)ᵀ ∇²f(x) (y - x)`.
    pub quad_form: f64,
    pub g_y: Option<&'a DVector<f64>>,
    /// `∇²f(x) (y - x)`.
    pub h_step: Option<DVector<f64>>,
}

fn step_norm(c: &StepCache<'_>) -> Result<f64> {
    let n = c.step.norm();
    if !(n >= MIN_STEP_NORM) {
        return Err(Error::DegenerateStep(n));
    }
    Ok(n)
}

/// `R0(y, x)`.
pub fn taylor_residual_0(c: &StepCache<'_>) -> f64 {
    (c.f_y - c.f_x - c.g_x.dot(&c.step) - 0.5 * c.quad_form).abs()
}

/// `R1(y, x)`; needs `g_y` and `h_step`.
pub fn taylor_residual_1(c: &StepCache<'_>) -> Result<f64> {
    let (Some(g_y), Some(h_step)) = (c.g_y, c.h_step.as_ref()) else {
        return Err(Error::Precondition("H1 needs g_y and h_step".into()));
    };
    Ok((g_y - c.g_x - h_step).norm())
}

pub fn holder_estimate_h0(c: &StepCache<'_>, nu: f64) -> Result<f64> {
    let s = step_norm(c)?;
    Ok(2.0 * taylor_residual_0(c) / s.powf(2.0 + nu))
}

pub fn holder_estimate_h1(c: &StepCache<'_>, nu: f64) -> Result<f64> {
    let s = step_norm(c)?;
    Ok(taylor_residual_1(c)? / s.powf(1.0 + nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    // f(t) = t^4/12: f' = t^3/3, f'' = t^2.
    fn quartic_cache<'a>(x: f64, y: f64, gx: &'a DVector<f64>, gy: &'a DVector<f64>) -> StepCache<'a> {
        let s = y - x;
        StepCache {
            step: scalar(s),
            f_x: x.powi(4) / 12.0,
            f_y: y.powi(4) / 12.0,
            g_x: gx,
            quad_form: x * x * s * s,
            g_y: Some(gy),
            h_step: Some(scalar(x * x * s)),
        }
    }

    #[test]
    fn quartic_closed_forms() {
        let gx = scalar(0.0);
        let gy = scalar(1.0 / 3.0);
        let c = quartic_cache(0.0, 1.0, &gx, &gy);
        assert!((holder_estimate_h0(&c, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((holder_estimate_h1(&c, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((holder_estimate_h1(&c, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let gy2 = scalar(8.0 / 3.0);
        let c = quartic_cache(0.0, 2.0, &gx, &gy2);
        assert!((holder_estimate_h0(&c, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_residuals_vanish() {
        // f(x) = ½ xᵀ diag(1,3) x
        let a = [1.0, 3.0];
        let x = [0.4, -1.0];
        let y = [-2.0, 0.7];
        let f = |p: &[f64]| 0.5 * (a[0] * p[0] * p[0] + a[1] * p[1] * p[1]);
        let gx = DVector::from_vec(vec![a[0] * x[0], a[1] * x[1]]);
        for t in [1.0, 0.5, 0.125] {
            let s = DVector::from_vec(vec![t * (y[0] - x[0]), t * (y[1] - x[1])]);
            let yt = [x[0] + s[0], x[1] + s[1]];
            let gyt = DVector::from_vec(vec![a[0] * yt[0], a[1] * yt[1]]);
            let hs = DVector::from_vec(vec![a[0] * s[0], a[1] * s[1]]);
            let c = StepCache {
                quad_form: s.dot(&hs),
                step: s,
                f_x: f(&x),
                f_y: f(&yt),
                g_x: &gx,
                g_y: Some(&gyt),
                h_step: Some(hs),
            };
            assert!(holder_estimate_h0(&c, 1.0).unwrap() < 1e-12);
            assert!(holder_estimate_h1(&c, 1.0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn degenerate_step() {
        let gx = scalar(0.0);
        let c = StepCache {
            step: scalar(0.0),
            f_x: 0.0,
            f_y: 0.0,
            g_x: &gx,
            quad_form: 0.0,
            g_y: None,
            h_step: None,
        };
        assert!(matches!(holder_estimate_h0(&c, 1.0), Err(Error::DegenerateStep(_))));
        assert!(matches!(holder_estimate_h1(&c, 1.0), Err(Error::DegenerateStep(_))));
    }

    #[test]
    fn h1_requires_gradient() {
        let gx = scalar(0.0);
        let c = StepCache {
            step: scalar(1.0),
            f_x: 0.0,
            f_y: 0.0,
            g_x: &gx,
            quad_form: 0.0,
            g_y: None,
            h_step: None,
        };
        assert!(matches!(holder_estimate_h1(&c, 1.0), Err(Error::Precondition(_))));
    }
}

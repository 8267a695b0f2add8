//! Dense brute-force oracles for desk-scale checks.
//!
//! Everything here is `O(n³)` and refuses dimensions above [`MAX_DENSE_DIM`];
//! solvers never call into this module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::oracle::Problem;

pub const MAX_DENSE_DIM: usize = 2000;

/// Symmetric matrix tolerance for [`DenseHessian::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHessian {
    entries: DMatrix<f64>,
}

impl DenseHessian {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Oracle("Hessian must be square".into()));
        }
        let defect = symmetry_defect(&entries);
        if defect > SYMMETRY_TOL * (1.0 + entries.amax()) {
            return Err(Error::Oracle(format!("matrix not symmetric (defect {defect:e})")));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// `-(H + 2σI)⁻¹ g` by LU with partial pivoting, residual-checked.
pub fn dense_damped_solve(h: &DenseHessian, g: &DVector<f64>, sigma: f64) -> Result<DVector<f64>> {
    let n = h.dim();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    let shifted = h.matrix() + DMatrix::identity(n, n) * (2.0 * sigma);
    let d = shifted
        .clone()
        .lu()
        .solve(&(-g))
        .ok_or_else(|| Error::Oracle("H + 2σI is singular".into()))?;
    let residual = (&shifted * &d + g).norm();
    if !(residual <= 1e-10 * (1.0 + g.norm())) {
        return Err(Error::Oracle(format!("dense solve residual {residual:e} too large")));
    }
    Ok(d)
}

/// Smallest eigenvalue and a unit eigenvector.
pub fn min_eigenpair(h: &DenseHessian) -> Result<(f64, DVector<f64>)> {
    if h.dim() > MAX_DENSE_DIM {
        return Err(Error::Oracle(format!("dimension {} above dense cap", h.dim())));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Oracle("empty matrix".into()))?;
    if !lambda.is_finite() {
        return Err(Error::Oracle("eigen-solve produced a non-finite value".into()));
    }
    Ok((lambda, eig.eigenvectors.column(idx).into_owned()))
}

pub fn min_eigenvalue(h: &DenseHessian) -> Result<f64> {
    min_eigenpair(h).map(|(l, _)| l)
}

/// Assembles `∇²f(x)` column by column from products `hvp(x, e_i)`.
/// Returns the symmetrized matrix and the symmetry defect of the raw one.
pub fn materialize_hessian(problem: &dyn Problem, x: &DVector<f64>) -> Result<(DenseHessian, f64)> {
    let n = problem.dim();
    if n > MAX_DENSE_DIM {
        return Err(Error::Oracle(format!("dimension {n} above dense cap")));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut raw = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        raw.set_column(i, &problem.hvp(x, &e));
    }
    let defect = symmetry_defect(&raw);
    if defect > 1e-8 * (1.0 + raw.amax()) {
        return Err(Error::Oracle(format!("hvp is not symmetric (defect {defect:e})")));
    }
    let sym = (&raw + raw.transpose()) * 0.5;
    Ok((DenseHessian { entries: sym }, defect))
}

/// Random symmetric matrix `Q diag(λ) Qᵀ` with `Q` orthogonal (from the QR
/// factorization of a Gaussian matrix).
pub fn symmetric_with_spectrum(eigenvalues: &[f64], rng: &mut crate::rng::InstanceRng) -> DMatrix<f64> {
    let n = eigenvalues.len();
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let q = gauss.qr().q();
    let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
    let m = &q * lambda * q.transpose();
    (&m + m.transpose()) * 0.5
}

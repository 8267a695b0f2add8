//! Benchmark families and test fixtures.
//!
//! * [`Infeasibility`]: `f(x) = (1/m) Σ (xᵀA_i x + b_iᵀx + c_i)₊^p`.
//! * [`Repu`]: single-layer RePU regression,
//!   `f(x) = (1/m) Σ ((a_iᵀx)₊^p - b_i)²`.
//! * [`Quadratic`] and [`QuarticTest`]: fixtures with known moduli.
//!
//! Random instances are drawn from [`InstanceRng`](crate::rng::InstanceRng)
//! in a fixed order (documented on each generator), so a spec and seed pin
//! the instance bit for bit. Instances round-trip through a JSON dump.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Problem;
use crate::rng::InstanceRng;

fn check_power(p: f64) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Config(format!("power p must be > 2, got {p}")));
    }
    Ok(())
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::Config(format!("n and m must be positive, got n={n}, m={m}")));
    }
    Ok(())
}

#[inline]
fn pos(t: f64) -> f64 {
    t.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilitySpec {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub seed: u64,
}

/// Quadratic-constraint infeasibility objective.
#[derive(Debug, Clone)]
pub struct Infeasibility {
    spec: InfeasibilitySpec,
    name: String,
    a: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
}

/// Draws an infeasibility instance.
///
/// For each `i` in order: an `n×n` standard-normal `G` (row-major), then
/// `b_i` (`n` normals), then `c_i`; `A_i = (G + Gᵀ)/(2√n)`.
pub fn make_infeasibility(spec: InfeasibilitySpec) -> Result<Infeasibility> {
    check_sizes(spec.n, spec.m)?;
    check_power(spec.p)?;
    let n = spec.n;
    let mut rng = InstanceRng::new(spec.seed);
    let scale = 1.0 / (2.0 * (n as f64).sqrt());
    let mut a = Vec::with_capacity(spec.m);
    let mut b = Vec::with_capacity(spec.m);
    let mut c = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let gm = DMatrix::from_row_iterator(n, n, (0..n * n).map(|_| rng.normal()));
        a.push((&gm + gm.transpose()) * scale);
        b.push(rng.normal_vector(n));
        c.push(rng.normal());
    }
    Infeasibility::from_parts(spec, a, b, c)
}

impl Infeasibility {
    fn from_parts(spec: InfeasibilitySpec, a: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>, c: Vec<f64>) -> Result<Self> {
        check_sizes(spec.n, spec.m)?;
        check_power(spec.p)?;
        if a.len() != spec.m || b.len() != spec.m || c.len() != spec.m {
            return Err(Error::Config("infeasibility data does not match m".into()));
        }
        if a.iter().any(|ai| ai.shape() != (spec.n, spec.n)) || b.iter().any(|bi| bi.len() != spec.n) {
            return Err(Error::Config("infeasibility data does not match n".into()));
        }
        let name = format!("infeas(n={},m={},p={},seed={})", spec.n, spec.m, spec.p, spec.seed);
        Ok(Self { spec, name, a, b, c })
    }

    pub fn spec(&self) -> InfeasibilitySpec {
        self.spec
    }

    /// Constraint values `q_i(x)` and gradients `2A_i x + b_i`.
    fn constraints(&self, x: &DVector<f64>) -> impl Iterator<Item = (usize, f64, DVector<f64>)> + '_ {
        let x = x.clone();
        (0..self.spec.m).map(move |i| {
            let ax = &self.a[i] * &x;
            let q = x.dot(&ax) + self.b[i].dot(&x) + self.c[i];
            (i, q, ax * 2.0 + &self.b[i])
        })
    }

    /// `q_i(x)` for every constraint.
    pub fn constraint_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints(x).map(|(_, q, _)| q).collect()
    }
}

impl Problem for Infeasibility {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.spec.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let p = self.spec.p;
        let total: f64 = (0..self.spec.m)
            .map(|i| {
                let q = x.dot(&(&self.a[i] * x)) + self.b[i].dot(x) + self.c[i];
                pos(q).powf(p)
            })
            .sum();
        total / self.spec.m as f64
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.spec.p;
        let mut g = DVector::zeros(self.spec.n);
        for (_, q, dq) in self.constraints(x) {
            if q > 0.0 {
                g.axpy(p * q.powf(p - 1.0), &dq, 1.0);
            }
        }
        g / self.spec.m as f64
    }

    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let p = self.spec.p;
        let mut hv = DVector::zeros(self.spec.n);
        for (i, q, dq) in self.constraints(x) {
            if q > 0.0 {
                let outer = p * (p - 1.0) * q.powf(p - 2.0) * dq.dot(v);
                hv.axpy(outer, &dq, 1.0);
                hv.axpy(2.0 * p * q.powf(p - 1.0), &(&self.a[i] * v), 1.0);
            }
        }
        hv / self.spec.m as f64
    }

    fn nu_hint(&self) -> Option<f64> {
        Some((self.spec.p - 2.0).min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepuSpec {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub seed: u64,
}

/// Single-layer RePU network with squared loss.
#[derive(Debug, Clone)]
pub struct Repu {
    spec: RepuSpec,
    name: String,
    /// Rows are the samples `a_i`.
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// Draws a RePU instance.
///
/// For each `i` in order: `a_i` (`n` normals), then `b̄_i`; `b_i = |b̄_i|`.
pub fn make_repu(spec: RepuSpec) -> Result<Repu> {
    check_sizes(spec.n, spec.m)?;
    check_power(spec.p)?;
    let mut rng = InstanceRng::new(spec.seed);
    let mut rows = Vec::with_capacity(spec.m * spec.n);
    let mut b = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        rows.extend((0..spec.n).map(|_| rng.normal()));
        b.push(rng.normal().abs());
    }
    let a = DMatrix::from_row_slice(spec.m, spec.n, &rows);
    Repu::from_parts(spec, a, DVector::from_vec(b))
}

impl Repu {
    fn from_parts(spec: RepuSpec, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_sizes(spec.n, spec.m)?;
        check_power(spec.p)?;
        if a.shape() != (spec.m, spec.n) || b.len() != spec.m {
            return Err(Error::Config("RePU data does not match (m, n)".into()));
        }
        let name = format!("repu(n={},m={},p={},seed={})", spec.n, spec.m, spec.p, spec.seed);
        Ok(Self { spec, name, a, b })
    }

    pub fn spec(&self) -> RepuSpec {
        self.spec
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.b
    }

    /// Per-sample `(z₊, residual)` with `z = a_iᵀx`.
    fn activations(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let p = self.spec.p;
        let z = (&self.a * x).map(pos);
        let res = DVector::from_iterator(self.spec.m, z.iter().zip(self.b.iter()).map(|(zi, bi)| zi.powf(p) - bi));
        (z, res)
    }
}

impl Problem for Repu {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.spec.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let (_, res) = self.activations(x);
        res.norm_squared() / self.spec.m as f64
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.spec.p;
        let (z, res) = self.activations(x);
        let w = z.zip_map(&res, |zi, ri| ri * zi.powf(p - 1.0));
        self.a.tr_mul(&w) * (2.0 * p / self.spec.m as f64)
    }

    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let p = self.spec.p;
        let (z, res) = self.activations(x);
        let w = z.zip_map(&res, |zi, ri| {
            let d1 = p * zi.powf(p - 1.0);
            d1 * d1 + ri * p * (p - 1.0) * zi.powf(p - 2.0)
        });
        let av = &self.a * v;
        self.a.tr_mul(&w.component_mul(&av)) * (2.0 / self.spec.m as f64)
    }

    fn nu_hint(&self) -> Option<f64> {
        Some((self.spec.p - 2.0).min(1.0))
    }
}

/// `f(x) = ½ xᵀ diag(a) x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: DVector<f64>,
    name: String,
}

pub fn make_quadratic(diag: Vec<f64>) -> Result<Quadratic> {
    if diag.is_empty() || diag.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Config("quadratic needs a nonempty positive diagonal".into()));
    }
    let name = format!("quadratic(dim={})", diag.len());
    Ok(Quadratic {
        diag: DVector::from_vec(diag),
        name,
    })
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.diag.component_mul(x))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.diag.component_mul(x)
    }
    fn hvp(&self, _x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.diag.component_mul(v)
    }
    /// The Hessian is constant, so every exponent works; report 1.
    fn nu_hint(&self) -> Option<f64> {
        Some(1.0)
    }
    fn hf_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x) = ½ xᵀ diag(a) x + ¼ Σ x_i⁴`, minimized at 0 with `∇²f(0) = diag(a)`.
///
/// On the box `[-R, R]ⁿ` the Hessian is Lipschitz with modulus `6R`; the
/// reported `hf_hint` uses the configured radius (default 2).
#[derive(Debug, Clone)]
pub struct QuarticTest {
    diag: DVector<f64>,
    radius: f64,
    name: String,
}

pub const QUARTIC_DEFAULT_RADIUS: f64 = 2.0;

pub fn make_quartic_test(diag: Vec<f64>) -> Result<QuarticTest> {
    if diag.is_empty() || diag.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Config("quartic test needs a nonempty positive diagonal".into()));
    }
    let name = format!("quartic(dim={})", diag.len());
    Ok(QuarticTest {
        diag: DVector::from_vec(diag),
        radius: QUARTIC_DEFAULT_RADIUS,
        name,
    })
}

impl QuarticTest {
    /// Sets the half-width `R` of the box on which `hf_hint = 6R` holds.
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Problem for QuarticTest {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.diag.component_mul(x)) + 0.25 * x.iter().map(|t| t.powi(4)).sum::<f64>()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.diag.component_mul(x) + x.map(|t| t.powi(3))
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (&self.diag + x.map(|t| 3.0 * t * t)).component_mul(v)
    }
    fn nu_hint(&self) -> Option<f64> {
        Some(1.0)
    }
    fn hf_hint(&self) -> Option<f64> {
        Some(6.0 * self.radius)
    }
}

/// Serialized instance data for cross-implementation regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InstanceDump {
    Infeasibility {
        spec: InfeasibilitySpec,
        /// `A_i`, row-major.
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    Repu {
        spec: RepuSpec,
        /// Sample matrix, row-major `m×n`.
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl Infeasibility {
    pub fn dump(&self) -> InstanceDump {
        InstanceDump::Infeasibility {
            spec: self.spec,
            a: self.a.iter().map(row_major).collect(),
            b: self.b.iter().map(|v| v.as_slice().to_vec()).collect(),
            c: self.c.clone(),
        }
    }
}

impl Repu {
    pub fn dump(&self) -> InstanceDump {
        InstanceDump::Repu {
            spec: self.spec,
            a: row_major(&self.a),
            b: self.b.as_slice().to_vec(),
        }
    }
}

impl InstanceDump {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rebuilds the problem, validating every shape.
    pub fn load(&self) -> Result<Box<dyn Problem>> {
        match self {
            InstanceDump::Infeasibility { spec, a, b, c } => {
                let n = spec.n;
                if a.iter().any(|ai| ai.len() != n * n) {
                    return Err(Error::Config("infeasibility dump: A_i must have n*n entries".into()));
                }
                let a = a.iter().map(|ai| DMatrix::from_row_slice(n, n, ai)).collect();
                let b = b.iter().map(|bi| DVector::from_column_slice(bi)).collect();
                Ok(Box::new(Infeasibility::from_parts(*spec, a, b, c.clone())?))
            }
            InstanceDump::Repu { spec, a, b } => {
                if a.len() != spec.m * spec.n {
                    return Err(Error::Config("RePU dump: a must have m*n entries".into()));
                }
                let a = DMatrix::from_row_slice(spec.m, spec.n, a);
                Ok(Box::new(Repu::from_parts(*spec, a, DVector::from_column_slice(b))?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0)
    }

    #[test]
    fn quadratic_fixture() {
        let q = make_quadratic(vec![1.0, 2.0]).unwrap();
        assert_eq!(q.value(&ones(2)), 1.5);
        assert_eq!(q.gradient(&DVector::zeros(2)).as_slice(), &[0.0, 0.0]);
        let v = DVector::from_vec(vec![0.3, -0.7]);
        assert_eq!(q.hvp(&ones(2), &v).as_slice(), &[0.3, -1.4]);
        assert!(make_quadratic(vec![1.0, 0.0]).unwrap_err().is_config());
        assert!(make_quadratic(vec![]).unwrap_err().is_config());
    }

    #[test]
    fn quartic_fixture() {
        let q = make_quartic_test(vec![1.0, 2.0]).unwrap();
        assert_eq!(q.value(&ones(2)), 2.0);
        assert_eq!(q.gradient(&ones(2)).as_slice(), &[2.0, 3.0]);
        assert_eq!(q.hf_hint(), Some(12.0));
        assert_eq!(q.with_radius(1.0).hf_hint(), Some(6.0));
        assert!(make_quartic_test(vec![-1.0]).unwrap_err().is_config());
    }

    #[test]
    fn power_must_exceed_two() {
        let bad = InfeasibilitySpec {
            n: 3,
            m: 2,
            p: 2.0,
            seed: 0,
        };
        assert!(make_infeasibility(bad).unwrap_err().is_config());
        let bad = RepuSpec {
            n: 3,
            m: 2,
            p: 1.5,
            seed: 0,
        };
        assert!(make_repu(bad).unwrap_err().is_config());
    }

    #[test]
    fn infeasibility_zero_when_all_constraints_hold() {
        let p = make_infeasibility(InfeasibilitySpec {
            n: 4,
            m: 3,
            p: 2.5,
            seed: 7,
        })
        .unwrap();
        // Sample until every q_i is nonpositive.
        let mut rng = InstanceRng::new(99);
        let mut found = false;
        for _ in 0..20_000 {
            let x = rng.normal_vector(4) * 3.0;
            if p.constraint_values(&x).iter().all(|q| *q <= 0.0) {
                assert_eq!(p.value(&x), 0.0);
                assert!(p.gradient(&x).iter().all(|g| *g == 0.0));
                found = true;
                break;
            }
        }
        assert!(found, "no feasible sample found");
    }

    #[test]
    fn objectives_nonnegative() {
        let inf = make_infeasibility(InfeasibilitySpec {
            n: 5,
            m: 4,
            p: 2.5,
            seed: 1,
        })
        .unwrap();
        let repu = make_repu(RepuSpec {
            n: 5,
            m: 4,
            p: 3.0,
            seed: 1,
        })
        .unwrap();
        let mut rng = InstanceRng::new(5);
        for _ in 0..1000 {
            let x = rng.normal_vector(5) * 2.0;
            assert!(inf.value(&x) >= 0.0);
            assert!(repu.value(&x) >= 0.0);
        }
    }

    #[test]
    fn repu_at_origin() {
        let r = make_repu(RepuSpec {
            n: 3,
            m: 4,
            p: 2.5,
            seed: 2,
        })
        .unwrap();
        let x = DVector::zeros(3);
        let expect = r.targets().norm_squared() / 4.0;
        assert_eq!(r.value(&x), expect);
        assert!(r.gradient(&x).iter().all(|g| *g == 0.0));
        assert!(r.targets().iter().all(|b| *b >= 0.0));
    }

    #[test]
    fn seed_determinism_and_dump_roundtrip() {
        let spec = InfeasibilitySpec {
            n: 6,
            m: 3,
            p: 2.75,
            seed: 42,
        };
        let a = make_infeasibility(spec).unwrap();
        let b = make_infeasibility(spec).unwrap();
        assert_eq!(a.dump(), b.dump());

        let json = a.dump().to_json().unwrap();
        let back = InstanceDump::from_json(&json).unwrap();
        assert_eq!(back, a.dump());
        let loaded = back.load().unwrap();
        let x = DVector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        assert_eq!(loaded.value(&x), a.value(&x));

        let r = make_repu(RepuSpec {
            n: 4,
            m: 5,
            p: 3.0,
            seed: 9,
        })
        .unwrap();
        let loaded = InstanceDump::from_json(&r.dump().to_json().unwrap()).unwrap().load().unwrap();
        let x = DVector::from_element(4, 0.5);
        assert_eq!(loaded.gradient(&x), r.gradient(&x));
    }

    #[test]
    fn dump_shape_validation() {
        let bad = InstanceDump::Repu {
            spec: RepuSpec {
                n: 2,
                m: 2,
                p: 3.0,
                seed: 0,
            },
            a: vec![1.0; 3],
            b: vec![0.0; 2],
        };
        assert!(matches!(bad.load(), Err(e) if e.is_config()));
    }

    #[test]
    fn a_matrices_symmetric() {
        let p = make_infeasibility(InfeasibilitySpec {
            n: 5,
            m: 2,
            p: 2.5,
            seed: 3,
        })
        .unwrap();
        for a in &p.a {
            assert_eq!(a, &a.transpose());
        }
    }
}

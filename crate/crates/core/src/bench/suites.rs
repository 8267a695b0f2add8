//! Property suites behind `verify`.
//!
//! Each suite draws its cases from fixed seeds, counts checks and keeps the
//! first failure as a reproducer line.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::ancg::{ancg_solve, AncgConfig};
use crate::capped_cg::{capped_cg, verify_nc_certificate, verify_sol_certificate, CgConfig, DirectionType, CERT_RTOL};
use crate::error::{Error, Result};
use crate::estimators::{holder_estimate_h0, holder_estimate_h1, StepCache};
use crate::oracle::{fd_check, Oracle, Problem};
use crate::problems::{make_infeasibility, make_quadratic, make_quartic_test, make_repu, InfeasibilitySpec, RepuSpec};
use crate::rng::InstanceRng;
use crate::solve::{nc_transform, SolveResult};
use crate::uancg::{uancg_solve, UancgConfig};
use crate::verify::{dense_damped_solve, min_eigenvalue, symmetric_with_spectrum, DenseHessian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Certificates,
    Dense,
    Estimators,
    Fd,
    Gamma,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Certificates, Suite::Dense, Suite::Estimators, Suite::Fd, Suite::Gamma];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Certificates => "certificates",
            Suite::Dense => "dense",
            Suite::Estimators => "estimators",
            Suite::Fd => "fd",
            Suite::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Deliberate bugs for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the negative-curvature rescaling.
    NcSign,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nc-sign" => Ok(Fault::NcSign),
            other => Err(Error::Config(format!("unknown fault {other:?}"))),
        }
    }
}

/// Case counts per suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub certificate_matrices: usize,
    pub dense_instances: usize,
    pub estimator_pairs: usize,
    pub fd_points: usize,
    pub gamma_seeds: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            certificate_matrices: 1000,
            dense_instances: 200,
            estimator_pairs: 1000,
            fd_points: 5,
            gamma_seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checked: usize,
    pub failed: usize,
    /// The first failure: what broke and how to rebuild the inputs.
    pub reproducer: Option<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checked: 0,
            failed: 0,
            reproducer: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.reproducer.is_none() {
                self.reproducer = Some(what());
            }
        }
    }
}

pub fn run_suite(suite: Suite, sizes: &SuiteSizes, fault: Option<Fault>) -> Result<SuiteReport> {
    match suite {
        Suite::Certificates => certificates(sizes.certificate_matrices, fault),
        Suite::Dense => dense(sizes.dense_instances),
        Suite::Estimators => estimators(sizes.estimator_pairs),
        Suite::Fd => fd(sizes.fd_points),
        Suite::Gamma => gamma(sizes.gamma_seeds),
    }
}

/// Spectrum shape of a drawn test matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spectrum {
    Spd,
    Indefinite,
    NearSingular,
}

/// A seeded capped-CG input.
#[derive(Debug, Clone)]
pub struct CgCase {
    pub seed: u64,
    pub spectrum: Spectrum,
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub sigma: f64,
    pub zeta: f64,
}

impl CgCase {
    /// `n ∈ [2, 50]`, spectrum cycling with the seed, `σ ∈ [1e-3, 1]`
    /// log-uniform, `ζ ∈ [0.01, 0.5]`.
    pub fn draw(seed: u64) -> Self {
        let mut rng = InstanceRng::new(seed);
        let n = 2 + (rng.next_u64() % 49) as usize;
        let spectrum = match seed % 3 {
            0 => Spectrum::Spd,
            1 => Spectrum::Indefinite,
            _ => Spectrum::NearSingular,
        };
        let lams: Vec<f64> = (0..n)
            .map(|_| match spectrum {
                Spectrum::Spd => rng.uniform_in(0.01, 10.0),
                Spectrum::Indefinite => rng.uniform_in(-5.0, 5.0),
                Spectrum::NearSingular => {
                    if rng.uniform() < 1.0 / 3.0 {
                        rng.uniform_in(-1e-8, 1e-8)
                    } else {
                        rng.uniform_in(0.1, 10.0)
                    }
                }
            })
            .collect();
        let h = symmetric_with_spectrum(&lams, &mut rng);
        let g = rng.normal_vector(n);
        let sigma = 10f64.powf(rng.uniform_in(-3.0, 0.0));
        let zeta = rng.uniform_in(0.01, 0.5);
        Self {
            seed,
            spectrum,
            h,
            g,
            sigma,
            zeta,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "seed={} n={} spectrum={:?} sigma={:e} zeta={:e} (CgCase::draw)",
            self.seed,
            self.g.len(),
            self.spectrum,
            self.sigma,
            self.zeta
        )
    }
}

fn certificates(count: usize, fault: Option<Fault>) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Certificates);
    for seed in 0..count as u64 {
        let case = CgCase::draw(seed);
        let h = &case.h;
        let hvp = |v: &DVector<f64>| Ok(h * v);
        let out = capped_cg(hvp, &case.g, case.sigma, case.zeta, &CgConfig::default())?;
        match out.d_type {
            DirectionType::Sol => {
                let cert = verify_sol_certificate(hvp, &case.g, case.sigma, case.zeta, &out.d)?;
                report.check(cert.pass, || format!("SOL certificate: {cert:?}; {}", case.describe()));
            }
            DirectionType::Nc => {
                let raw = verify_nc_certificate(hvp, &case.g, case.sigma, &out.d)?;
                report.check(raw.pass, || format!("NC certificate (raw direction): {raw:?}; {}", case.describe()));
                let mut d = nc_transform(&out.d, out.curvature(case.sigma), &case.g)?;
                if fault == Some(Fault::NcSign) {
                    d = -d;
                }
                let moved = verify_nc_certificate(hvp, &case.g, case.sigma, &d)?;
                report.check(moved.pass, || {
                    format!("NC certificate (rescaled direction): {moved:?}; {}", case.describe())
                });
            }
        }
    }
    Ok(report)
}

fn dense(count: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Dense);
    for seed in 0..count as u64 {
        let mut rng = InstanceRng::new(seed);
        let n = 2 + (rng.next_u64() % 49) as usize;
        let sigma = 10f64.powf(rng.uniform_in(-3.0, 0.0));
        let zeta = rng.uniform_in(0.01, 0.5);
        // λ(H) ≥ -σ/2 keeps H + 2σI ⪰ 1.5σI.
        let lams: Vec<f64> = (0..n).map(|_| rng.uniform_in(-0.5 * sigma, 10.0)).collect();
        let h = DenseHessian::new(symmetric_with_spectrum(&lams, &mut rng))?;
        let g = rng.normal_vector(n);
        let repro = || format!("dense seed={seed} n={n} sigma={sigma:e} zeta={zeta:e}");

        let out = capped_cg(|v| Ok(h.apply(v)), &g, sigma, zeta, &CgConfig::default())?;
        report.check(out.d_type == DirectionType::Sol, || format!("expected SOL; {}", repro()));
        if out.d_type != DirectionType::Sol {
            continue;
        }
        let d = &out.d;
        let ball = zeta * sigma * d.norm() / 2.0;
        let residual = (h.apply(d) + d * (2.0 * sigma) + &g).norm();
        report.check(residual <= ball * (1.0 + CERT_RTOL), || {
            format!("residual {residual:e} > {ball:e}; {}", repro())
        });
        let exact = dense_damped_solve(&h, &g, sigma)?;
        let diff = d - &exact;
        let gap = (h.apply(&diff) + &diff * (2.0 * sigma)).norm();
        let slack = 1e-10 * (1.0 + g.norm());
        report.check(gap <= ball * (1.0 + CERT_RTOL) + slack, || {
            format!("‖H̄(d - d*)‖ = {gap:e} outside ball {ball:e}; {}", repro())
        });
    }
    // Negative curvature reported only when the spectrum allows it.
    for seed in 0..(count / 2) as u64 {
        let case = CgCase::draw(3 * seed + 1);
        let out = capped_cg(|v| Ok(&case.h * v), &case.g, case.sigma, case.zeta, &CgConfig::default())?;
        if out.d_type == DirectionType::Nc {
            let lmin = min_eigenvalue(&DenseHessian::new(case.h.clone())?)?;
            report.check(lmin < -case.sigma, || {
                format!("NC but λmin = {lmin:e} ≥ -σ; {}", case.describe())
            });
        }
    }
    Ok(report)
}

/// `H0`, `H1` at `(x, y)` with `ν = 1`.
fn estimates(problem: &dyn Problem, x: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, f64)> {
    let s = y - x;
    let g_x = problem.gradient(x);
    let g_y = problem.gradient(y);
    let h_step = problem.hvp(x, &s);
    let cache = StepCache {
        quad_form: s.dot(&h_step),
        step: s,
        f_x: problem.value(x),
        f_y: problem.value(y),
        g_x: &g_x,
        g_y: Some(&g_y),
        h_step: Some(h_step),
    };
    Ok((holder_estimate_h0(&cache, 1.0)?, holder_estimate_h1(&cache, 1.0)?))
}

fn estimators(pairs: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Estimators);
    let quartic = make_quartic_test(vec![1.0, 2.0, 3.0, 4.0, 5.0])?.with_radius(1.0);
    let hf = quartic.hf_hint().expect("quartic carries hf_hint");
    let mut rng = InstanceRng::new(4);
    for i in 0..pairs {
        let x = DVector::from_fn(5, |_, _| rng.uniform_in(-1.0, 1.0));
        let y = DVector::from_fn(5, |_, _| rng.uniform_in(-1.0, 1.0));
        let (h0, h1) = estimates(&quartic, &x, &y)?;
        let cap = hf * (1.0 + 1e-9);
        report.check(h0 <= cap && h1 <= cap, || {
            format!("pair {i} (rng seed 4): H0={h0:e} H1={h1:e} > hf={hf}; x={x:?} y={y:?}")
        });
    }
    // Points on a 1/16 grid keep every quadratic-model term exact.
    let quad = make_quadratic(vec![1.0, 2.0, 3.0, 4.0, 5.0])?;
    let mut rng = InstanceRng::new(5);
    let mut grid = || (rng.next_u64() % 33) as f64 / 16.0 - 1.0;
    for i in 0..pairs {
        let x = DVector::from_fn(5, |_, _| grid());
        let y = DVector::from_fn(5, |_, _| grid());
        if x == y {
            continue;
        }
        let (h0, h1) = estimates(&quad, &x, &y)?;
        report.check(h0 == 0.0 && h1 == 0.0, || {
            format!("quadratic pair {i} (rng seed 5): H0={h0:e} H1={h1:e}; x={x:?} y={y:?}")
        });
    }
    Ok(report)
}

/// Small instances of every family, as `(label, problem)`.
fn fd_fixtures() -> Result<Vec<(String, Box<dyn Problem>)>> {
    Ok(vec![
        ("quadratic(1,2,3,4)".into(), Box::new(make_quadratic(vec![1.0, 2.0, 3.0, 4.0])?)),
        ("quartic(1,2,3,4)".into(), Box::new(make_quartic_test(vec![1.0, 2.0, 3.0, 4.0])?)),
        (
            "infeas(n=4,m=2,p=2.5,seed=7)".into(),
            Box::new(make_infeasibility(InfeasibilitySpec {
                n: 4,
                m: 2,
                p: 2.5,
                seed: 7,
            })?),
        ),
        (
            "repu(n=3,m=2,p=3,seed=1)".into(),
            Box::new(make_repu(RepuSpec {
                n: 3,
                m: 2,
                p: 3.0,
                seed: 1,
            })?),
        ),
    ])
}

/// Thresholds on [`fd_check`]'s scaled errors.
pub const FD_GRAD_TOL: f64 = 1e-5;
pub const FD_HVP_TOL: f64 = 1e-4;

fn fd(points: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Fd);
    for (label, problem) in fd_fixtures()? {
        let oracle = Oracle::new(problem.as_ref());
        let n = problem.dim();
        let mut rng = InstanceRng::new(11);
        for i in 0..points {
            let x = DVector::from_fn(n, |_, _| rng.uniform_in(-1.0, 1.0));
            let rep = fd_check(&oracle, &x, 8, i as u64)?;
            report.check(rep.max_grad_err <= FD_GRAD_TOL && rep.max_hvp_err <= FD_HVP_TOL, || {
                format!("{label} point {i} (rng seed 11), fd seed {i}: {rep:?}")
            });
        }
    }
    Ok(report)
}

/// Families exercised by the γ suite, each with a starting point per seed.
fn gamma_cases(seed: u64) -> Result<Vec<(String, Box<dyn Problem>, DVector<f64>)>> {
    let mut rng = InstanceRng::new(seed);
    let box_point = |rng: &mut InstanceRng| DVector::from_fn(6, |_, _| rng.uniform_in(-1.0, 1.0));
    let diag = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    Ok(vec![
        ("quadratic".into(), Box::new(make_quadratic(diag.clone())?), box_point(&mut rng)),
        ("quartic".into(), Box::new(make_quartic_test(diag)?), box_point(&mut rng)),
        (
            "infeas".into(),
            Box::new(make_infeasibility(InfeasibilitySpec {
                n: 20,
                m: 5,
                p: 2.5,
                seed,
            })?),
            DVector::from_element(20, 1.0),
        ),
        (
            "repu".into(),
            Box::new(make_repu(RepuSpec {
                n: 10,
                m: 10,
                p: 2.5,
                seed,
            })?),
            DVector::from_element(10, 1.0),
        ),
    ])
}

/// First index at which `f` fails to strictly decrease, counting the final
/// value.
pub fn first_non_descent(res: &SolveResult) -> Option<usize> {
    let mut fs: Vec<f64> = res.trace.iter().map(|r| r.f).collect();
    fs.push(res.f_final);
    fs.windows(2).position(|w| !(w[1] < w[0]))
}

fn gamma(seeds: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Gamma);
    for seed in 1..=seeds as u64 {
        for (label, problem, x0) in gamma_cases(seed)? {
            let tag = || format!("family={label} seed={seed} x0={:?}", x0.as_slice());
            let cfg = AncgConfig::default();
            let res = ancg_solve(problem.as_ref(), &x0, &cfg)?;
            report.check(res.status == crate::solve::Status::Converged, || {
                format!("ancg status {}; {}", res.status, tag())
            });
            let k = first_non_descent(&res);
            report.check(k.is_none(), || format!("ancg f not decreasing at k={k:?}; {}", tag()));
            let mut prev = cfg.gamma0;
            for r in &res.trace {
                let ok = r.gamma_after >= prev;
                report.check(ok, || format!("ancg γ decreased at k={}; {}", r.k, tag()));
                prev = r.gamma_after;
            }
            if let Some(hf) = problem.hf_hint() {
                let cap = cfg.gamma0.max(hf);
                let peak = res.trace.iter().map(|r| r.gamma_after).fold(cfg.gamma0, f64::max);
                report.check(peak <= cap, || format!("ancg γ peaked at {peak} > {cap}; {}", tag()));
            }

            let ucfg = UancgConfig::default();
            let res = uancg_solve(problem.as_ref(), &x0, &ucfg)?;
            report.check(res.status == crate::solve::Status::Converged, || {
                format!("uancg status {}; {}", res.status, tag())
            });
            let mut prev = ucfg.gamma0;
            for r in &res.trace {
                let ok = r.gamma_after == prev || r.gamma_after == 2.0 * prev;
                report.check(ok, || format!("uancg γ jumped {prev} -> {} at k={}; {}", r.gamma_after, r.k, tag()));
                prev = r.gamma_after;
            }
        }
    }
    Ok(report)
}

//! Capped conjugate gradient for possibly indefinite damped systems.
//!
//! Given a symmetric `H` (through products only), `g != 0`, `σ > 0` and a
//! relative accuracy `ζ ∈ (0, 1)`, [`capped_cg`] runs CG on
//! `(H + 2σI) d = -g` and stops with either
//!
//! * `SOL`: an approximate solution satisfying
//!   `σ‖d‖² ≤ dᵀH̄d`, `‖d‖ ≤ 1.1‖g‖/σ`, `dᵀg = -dᵀH̄d` and
//!   `‖H̄d + g‖ ≤ ζσ‖d‖/2`, where `H̄ = H + 2σI`; or
//! * `NC`: a direction with `dᵀg ≤ 0` and `dᵀHd < -σ‖d‖²`.
//!
//! Curvature is monitored on every CG vector. A running lower estimate `U`
//! of `‖H‖` drives the accuracy target `ζ̂` and the residual-decay envelope
//! `√T τ^{j/2}`; when the residual falls outside that envelope, a
//! negative-curvature pair is extracted from the stored iterates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CgStall, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionType {
    #[serde(rename = "SOL")]
    Sol,
    #[serde(rename = "NC")]
    Nc,
}

impl DirectionType {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionType::Sol => "SOL",
            DirectionType::Nc => "NC",
        }
    }
}

impl std::fmt::Display for DirectionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Hard cap on CG iterations; `None` means `4·dim + 100`.
    pub max_iters: Option<usize>,
    /// Include `‖Hr^j‖/‖r^j‖` in the `U` update at one extra product per
    /// iteration.
    pub track_hr: bool,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iters: None,
            track_hr: false,
        }
    }
}

impl CgConfig {
    pub fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iters.unwrap_or(4 * dim + 100)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == Some(0) {
            return Err(Error::Config("capped CG max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub d: DVector<f64>,
    pub d_type: DirectionType,
    /// `(H + 2σI) d`, maintained by recurrence.
    pub hbar_d: DVector<f64>,
    pub iters: usize,
    pub hv_products: usize,
    /// Final curvature estimate `U`.
    pub u_final: f64,
}

impl CgOutcome {
    /// `dᵀ H d` recovered from the cached product.
    pub fn curvature(&self, sigma: f64) -> f64 {
        self.d.dot(&self.hbar_d) - 2.0 * sigma * self.d.norm_squared()
    }
}

/// Quantities derived from the curvature estimate `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgDerived {
    pub u: f64,
    pub kappa: f64,
    pub zeta_hat: f64,
    pub tau: f64,
    pub t_cap: f64,
}

impl CgDerived {
    pub fn new(u: f64, sigma: f64, zeta: f64) -> Self {
        let kappa = (u + 2.0 * sigma) / sigma;
        let sk = kappa.sqrt();
        let tau = sk / (sk + 1.0);
        let t_cap = 4.0 * kappa.powi(4) / (1.0 - tau.sqrt()).powi(2);
        Self {
            u,
            kappa,
            zeta_hat: zeta / (3.0 * kappa),
            tau,
            t_cap,
        }
    }

    /// `√T τ^{j/2}`.
    pub fn envelope(&self, j: usize) -> f64 {
        self.t_cap.sqrt() * (0.5 * j as f64 * self.tau.ln()).exp()
    }
}

fn ratio(num: &DVector<f64>, den: &DVector<f64>) -> f64 {
    let d = den.norm();
    if d > 0.0 {
        num.norm() / d
    } else {
        0.0
    }
}

struct Counted<F> {
    hvp: F,
    calls: usize,
}

impl<F> Counted<F>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    fn apply(&mut self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.calls += 1;
        (self.hvp)(v)
    }
}

/// Runs capped CG on `(H + 2σI) d = -g` where `hvp(v) = H v`.
pub fn capped_cg<F>(hvp: F, g: &DVector<f64>, sigma: f64, zeta: f64, cfg: &CgConfig) -> Result<CgOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let r0 = g.norm();
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::Precondition("capped CG needs a finite nonzero g".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Precondition(format!("capped CG needs sigma > 0, got {sigma}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Precondition(format!("capped CG needs zeta in (0,1), got {zeta}")));
    }

    let n = g.len();
    let max_iters = cfg.iteration_cap(n);
    let mut h = Counted { hvp, calls: 0 };
    let two_sigma = 2.0 * sigma;

    let mut y = DVector::<f64>::zeros(n);
    let mut hy = DVector::<f64>::zeros(n);
    let mut r = g.clone();
    let mut p = -g;
    let mut hp = h.apply(&p)?;
    let hp0_ratio = ratio(&hp, &p);
    let mut hbar_p = &hp + &p * two_sigma;

    let done = |d: DVector<f64>, d_type, hbar_d, iters, calls, u| CgOutcome {
        d,
        d_type,
        hbar_d,
        iters,
        hv_products: calls,
        u_final: u,
    };

    if p.dot(&hbar_p) < sigma * p.norm_squared() {
        return Ok(done(p, DirectionType::Nc, hbar_p, 0, h.calls, 0.0));
    }

    let mut derived = CgDerived::new(0.0, sigma, zeta);
    // y^0..y^{j-1} and H y^i, for the slow-decay negative-curvature search.
    let mut ys: Vec<DVector<f64>> = vec![y.clone()];
    let mut hys: Vec<DVector<f64>> = vec![hy.clone()];
    let mut rr = r.norm_squared();
    let mut j = 0usize;

    loop {
        if j >= max_iters {
            return Err(Error::CgStalled(Box::new(CgStall {
                iters: j,
                hv_products: h.calls,
                best_y: y,
                residual_ratio: rr.sqrt() / r0,
            })));
        }

        let alpha = rr / p.dot(&hbar_p);
        y.axpy(alpha, &p, 1.0);
        hy.axpy(alpha, &hp, 1.0);
        r.axpy(alpha, &hbar_p, 1.0);
        let rr_next = r.norm_squared();
        let beta = rr_next / rr;
        rr = rr_next;
        p *= beta;
        p -= &r;
        j += 1;

        hp = h.apply(&p)?;
        hbar_p = &hp + &p * two_sigma;

        let mut u = derived.u.max(hp0_ratio).max(ratio(&hp, &p)).max(ratio(&hy, &y));
        if cfg.track_hr {
            let hr = h.apply(&r)?;
            u = u.max(ratio(&hr, &r));
        }
        if u != derived.u {
            derived = CgDerived::new(u, sigma, zeta);
        }

        let hbar_y = &hy + &y * two_sigma;
        let r_norm = rr.sqrt();
        if y.dot(&hbar_y) < sigma * y.norm_squared() {
            return Ok(done(y, DirectionType::Nc, hbar_y, j, h.calls, derived.u));
        }
        if r_norm <= derived.zeta_hat * r0 {
            // Exact CG gives yᵀg = -yᵀH̄y; rescale along y to undo the drift
            // that long runs accumulate in that identity. The factor is 1 up
            // to rounding.
            let c = -y.dot(g) / y.dot(&hbar_y);
            let (y, hbar_y) = if c.is_finite() && c > 0.0 { (y * c, hbar_y * c) } else { (y, hbar_y) };
            return Ok(done(y, DirectionType::Sol, hbar_y, j, h.calls, derived.u));
        }
        if p.dot(&hbar_p) < sigma * p.norm_squared() {
            return Ok(done(p, DirectionType::Nc, hbar_p, j, h.calls, derived.u));
        }
        if r_norm > derived.envelope(j) * r0 {
            let alpha_next = rr / p.dot(&hbar_p);
            let y_next = &y + &p * alpha_next;
            let hy_next = &hy + &hp * alpha_next;
            for (yi, hyi) in ys.iter().zip(&hys) {
                let diff = &y_next - yi;
                let hbar_diff = (&hy_next - hyi) + &diff * two_sigma;
                if diff.dot(&hbar_diff) < sigma * diff.norm_squared() {
                    return Ok(done(diff, DirectionType::Nc, hbar_diff, j, h.calls, derived.u));
                }
            }
            // No certifying pair (possible only when U underestimates ‖H‖);
            // keep iterating.
        }

        ys.push(y.clone());
        hys.push(hy.clone());
    }
}

/// Relative slack used by the certificate checks.
pub const CERT_RTOL: f64 = 1e-8;
/// Slack on the strict negative-curvature inequality.
pub const NC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolCertificate {
    pub pass: bool,
    /// Smallest normalized slack over the four inequalities; negative means a
    /// violation beyond tolerance.
    pub worst_slack: f64,
    pub positive_curvature: bool,
    pub norm_bound: bool,
    pub orthogonality: bool,
    pub residual: bool,
}

/// Checks the four SOL certificates with a fresh product `H d`.
pub fn verify_sol_certificate<F>(mut hvp: F, g: &DVector<f64>, sigma: f64, zeta: f64, d: &DVector<f64>) -> Result<SolCertificate>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let dn2 = d.norm_squared();
    if dn2 == 0.0 {
        return Err(Error::Precondition("certificate check needs d != 0".into()));
    }
    let hbar_d = hvp(d)? + d * (2.0 * sigma);
    let dhd = d.dot(&hbar_d);
    let dn = dn2.sqrt();
    let gn = g.norm();

    // Each slack is (rhs - lhs) / scale + rtol, so >= 0 means satisfied.
    let s1 = (dhd - sigma * dn2) / (sigma * dn2).max(dhd.abs()) + CERT_RTOL;
    let bound = 1.1 * gn / sigma;
    let s2 = (bound - dn) / bound + CERT_RTOL;
    let dg = d.dot(g);
    let s3 = CERT_RTOL - (dg + dhd).abs() / dg.abs().max(dhd.abs());
    let res = (&hbar_d + g).norm();
    let res_bound = zeta * sigma * dn / 2.0;
    let s4 = (res_bound - res) / res_bound + CERT_RTOL;

    let worst = s1.min(s2).min(s3).min(s4);
    Ok(SolCertificate {
        pass: worst >= 0.0,
        worst_slack: worst,
        positive_curvature: s1 >= 0.0,
        norm_bound: s2 >= 0.0,
        orthogonality: s3 >= 0.0,
        residual: s4 >= 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcCertificate {
    pub pass: bool,
    /// `dᵀHd / ‖d‖²`.
    pub rayleigh: f64,
    pub descent: bool,
}

/// Checks `dᵀg ≤ 0` and `dᵀHd/‖d‖² < -σ`.
pub fn verify_nc_certificate<F>(mut hvp: F, g: &DVector<f64>, sigma: f64, d: &DVector<f64>) -> Result<NcCertificate>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let dn2 = d.norm_squared();
    if dn2 == 0.0 {
        return Err(Error::Precondition("certificate check needs d != 0".into()));
    }
    let rayleigh = d.dot(&hvp(d)?) / dn2;
    let descent = d.dot(g) <= NC_SLACK * dn2.sqrt() * g.norm();
    let curvature = rayleigh < -sigma + NC_SLACK * sigma.max(rayleigh.abs());
    Ok(NcCertificate {
        pass: descent && curvature,
        rayleigh,
        descent,
    })
}

//! End-to-end solver behavior. Iteration counts and step values are frozen
//! from a scripted Python run of the same outer logic with dense solves.

use ancg::ancg::damping;
use ancg::capped_cg::DirectionType;
use ancg::oracle::{Oracle, Problem};
use ancg::problems::{make_infeasibility, make_quadratic, make_quartic_test, InfeasibilitySpec};
use ancg::verify::{dense_damped_solve, DenseHessian};
use ancg::{
    ancg_solve, ancg_step, fixed_solve, uancg_solve, AncgConfig, FixedConfig, SolveResult, SolverState, Status,
    UancgConfig,
};
use nalgebra::{DMatrix, DVector};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Least-squares slope of `log g_{k+1}` against `log g_k` over the last
/// `pairs` consecutive gradient norms (final norm included).
fn tail_slope(res: &SolveResult, pairs: usize) -> f64 {
    let mut g: Vec<f64> = res.trace.iter().map(|r| r.grad_norm).collect();
    g.push(res.grad_norm_final);
    let tail = &g[g.len() - pairs - 1..];
    let pts: Vec<(f64, f64)> = tail.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `-½‖x‖² + ¼‖x‖⁴`.
struct DoubleWell;

impl Problem for DoubleWell {
    fn name(&self) -> &str {
        "double-well"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let r2 = x.norm_squared();
        -0.5 * r2 + 0.25 * r2 * r2
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * (x.norm_squared() - 1.0)
    }
    fn hvp(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        w * (x.norm_squared() - 1.0) + x * (2.0 * x.dot(w))
    }
    fn nu_hint(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[test]
fn ancg_on_quadratic_matches_reference_run() {
    let p = make_quadratic(vec![1.0, 2.0]).unwrap();
    let cfg = AncgConfig {
        nu: Some(1.0),
        grad_tol: 1e-8,
        ..Default::default()
    };
    let res = ancg_solve(&p, &v(&[1.0, 1.0]), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!(res.trace.iter().all(|r| r.d_type == DirectionType::Sol && r.j == 0));
    // The dense-solve reference needs 23 outer iterations with defaults.
    assert_eq!(res.trace.len(), 23);
}

#[test]
fn ancg_on_quadratic_from_unit_gamma_takes_full_steps() {
    let p = make_quadratic(vec![1.0, 2.0]).unwrap();
    let cfg = AncgConfig {
        gamma0: 1.0,
        grad_tol: 1e-8,
        ..Default::default()
    };
    let res = ancg_solve(&p, &v(&[1.0, 1.0]), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!(res.trace.iter().all(|r| r.j == 0 && r.gamma_after == 1.0));
    assert_eq!(res.trace.len(), 12);
}

#[test]
fn ancg_quartic_tail_is_superlinear() {
    let p = make_quartic_test(vec![1.0, 2.0]).unwrap();
    let cfg = AncgConfig {
        grad_tol: 1e-12,
        ..Default::default()
    };
    let res = ancg_solve(&p, &v(&[2.0, 2.0]), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    let mut g: Vec<f64> = res.trace.iter().map(|r| r.grad_norm).collect();
    g.push(res.grad_norm_final);
    for w in g[g.len() - 4..].windows(2) {
        assert!(w[1] <= w[0].powf(1.3), "{} -> {}", w[0], w[1]);
    }
    assert!(tail_slope(&res, 3) >= 1.3);
}

#[test]
fn ancg_step_damping_and_direction() {
    let p = make_quadratic(vec![2.0, 4.0]).unwrap();
    let oracle = Oracle::new(&p);
    let x = v(&[1.0, 1.0]);
    let mut state = SolverState::at(&oracle, x.clone(), 1.0).unwrap();
    assert_eq!(state.g_x, v(&[2.0, 4.0]));
    let rec = ancg_step(&mut state, &oracle, &AncgConfig::default(), 1.0).unwrap();
    let eps = 20f64.powf(0.25);
    assert!((rec.epsilon - eps).abs() < 1e-12);
    assert_eq!((rec.d_type, rec.j), (DirectionType::Sol, 0));
    let d = (&state.x - &x) / rec.alpha;
    let h = DenseHessian::new(DMatrix::from_diagonal(&v(&[2.0, 4.0]))).unwrap();
    let exact = dense_damped_solve(&h, &v(&[2.0, 4.0]), eps).unwrap();
    let diff = &d - &exact;
    let gap = (h.apply(&diff) + &diff * (2.0 * eps)).norm();
    assert!(gap <= rec.zeta * eps * d.norm() / 2.0 * (1.0 + 1e-8));
    assert_eq!(rec.gamma_after, 1.0);
}

#[test]
fn ancg_negative_curvature_step_on_double_well() {
    let oracle = Oracle::new(&DoubleWell);
    let x = v(&[0.1, 0.0]);
    let mut state = SolverState::at(&oracle, x, 1.0).unwrap();
    let rec = ancg_step(&mut state, &oracle, &AncgConfig::default(), 1.0).unwrap();
    // Reference: ε = 0.31464265445104544, d = (0.97, 0), j = 0, f → -0.2447509975.
    assert_eq!(rec.d_type, DirectionType::Nc);
    assert!((rec.epsilon - 0.31464265445104544).abs() < 1e-14);
    assert_eq!(rec.j, 0);
    assert!((state.x[0] - 1.07).abs() < 1e-12 && state.x[1] == 0.0);
    assert!((state.f_x - (-0.2447509975)).abs() < 1e-12);
    assert!(state.f_x < rec.f);
}

#[test]
fn uancg_on_quadratic_never_doubles() {
    let p = make_quadratic(vec![1.0, 2.0]).unwrap();
    let cfg = UancgConfig {
        grad_tol: 1e-8,
        ..Default::default()
    };
    let res = uancg_solve(&p, &v(&[1.0, 1.0]), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!(res
        .trace
        .iter()
        .all(|r| r.d_type == DirectionType::Sol && r.gamma_after == 10.0 && r.j == 0));
    assert_eq!(res.trace.len(), 23);
}

#[test]
fn uancg_full_step_near_optimum_costs_one_value() {
    let p = make_quadratic(vec![1.0, 2.0]).unwrap();
    let cfg = UancgConfig {
        gamma0: 1.0,
        grad_tol: 1e-10,
        ..Default::default()
    };
    let res = uancg_solve(&p, &v(&[1e-4, 1e-4]), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!(res.trace.iter().all(|r| r.alpha == 1.0));
    // One value at x0, then one accept test per iteration.
    assert_eq!(res.totals.n_f as usize, 1 + res.trace.len());
}

#[test]
fn uancg_quartic_tail_is_superlinear() {
    let p = make_quartic_test((1..=10).map(f64::from).collect()).unwrap();
    let cfg = UancgConfig {
        grad_tol: 1e-12,
        ..Default::default()
    };
    let res = uancg_solve(&p, &DVector::from_element(10, 1.0), &cfg).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!(tail_slope(&res, 3) >= 1.3);
}

#[test]
fn fixed_baseline_has_no_superlinear_tail() {
    let p = make_quartic_test((1..=10).map(f64::from).collect()).unwrap();
    let x0 = DVector::from_element(10, 1.0);
    let fixed = fixed_solve(
        &p,
        &x0,
        &FixedConfig {
            eps_target: 1e-4,
            grad_tol: 1e-12,
            ..Default::default()
        },
    )
    .unwrap();
    let adaptive = ancg_solve(
        &p,
        &x0,
        &AncgConfig {
            grad_tol: 1e-12,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(fixed.status, Status::Converged);
    assert!(tail_slope(&fixed, 3) < 1.3);
    assert!(tail_slope(&adaptive, 3) >= 1.3);
}

#[test]
fn damping_formulas_hold_on_every_record() {
    let p = make_infeasibility(InfeasibilitySpec {
        n: 30,
        m: 6,
        p: 2.5,
        seed: 4,
    })
    .unwrap();
    let x0 = DVector::from_element(30, 1.0);
    let res = ancg_solve(&p, &x0, &AncgConfig::default()).unwrap();
    let mut gamma = 10.0;
    for r in &res.trace {
        let (eps, _) = damping(gamma, r.grad_norm, 0.5);
        assert!((r.epsilon - eps).abs() <= 1e-12 * eps);
        gamma = r.gamma_after;
    }
    let res = uancg_solve(&p, &x0, &UancgConfig::default()).unwrap();
    let mut gamma = 10.0;
    let mut f_prev = f64::INFINITY;
    for r in &res.trace {
        let eps = (gamma * r.grad_norm).sqrt();
        assert!((r.epsilon - eps).abs() <= 1e-12 * eps);
        assert!(r.f <= f_prev);
        f_prev = r.f;
        gamma = r.gamma_after;
    }
}

//! Trace files, per-run summaries and comparison tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solve::{SolveResult, Status};

use super::spec::Algo;

/// Column order of every trace file.
pub const TRACE_HEADER: [&str; 14] = [
    "k",
    "f",
    "grad_norm",
    "d_type",
    "epsilon",
    "zeta",
    "alpha",
    "j",
    "sigma",
    "gamma_after",
    "cg_iters",
    "hv_products",
    "cum_hv",
    "wall_ns",
];

#[derive(Serialize)]
struct TraceRow {
    k: usize,
    f: f64,
    grad_norm: f64,
    d_type: &'static str,
    epsilon: f64,
    zeta: f64,
    alpha: f64,
    j: usize,
    sigma: Option<f64>,
    gamma_after: f64,
    cg_iters: usize,
    hv_products: usize,
    cum_hv: u64,
    wall_ns: u64,
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Oracle(format!("csv: {other:?}")),
    }
}

/// Writes one row per outer iteration to `w`.
pub fn write_trace<W: Write>(w: W, result: &SolveResult) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(TRACE_HEADER).map_err(csv_error)?;
    let mut cum_hv = 0u64;
    for r in &result.trace {
        cum_hv += r.hv_products as u64;
        out.serialize(TraceRow {
            k: r.k,
            f: r.f,
            grad_norm: r.grad_norm,
            d_type: r.d_type.as_str(),
            epsilon: r.epsilon,
            zeta: r.zeta,
            alpha: r.alpha,
            j: r.j,
            sigma: r.sigma,
            gamma_after: r.gamma_after,
            cg_iters: r.cg_iters,
            hv_products: r.hv_products,
            cum_hv,
            wall_ns: r.wall_ns,
        })
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(result: &SolveResult) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, result)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Trace file contents with the `wall_ns` column dropped, for determinism
/// comparisons.
pub fn strip_wall_ns(trace_csv: &str) -> String {
    trace_csv
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

/// One finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algo: Algo,
    pub seed: u64,
    pub problem: String,
    pub result: SolveResult,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algo: Algo,
    pub seed: u64,
    pub problem: String,
    pub status: String,
    pub outer_iters: usize,
    pub subproblems: usize,
    pub cg_iters: usize,
    pub n_f: u64,
    pub n_grad: u64,
    pub n_hvp: u64,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub wall_ms: f64,
}

impl From<&RunOutcome> for SummaryRow {
    fn from(o: &RunOutcome) -> Self {
        Self {
            algo: o.algo,
            seed: o.seed,
            problem: o.problem.clone(),
            status: o.result.status.to_string(),
            outer_iters: o.result.trace.len(),
            subproblems: o.result.subproblems(),
            cg_iters: o.result.cg_iterations(),
            n_f: o.result.totals.n_f,
            n_grad: o.result.totals.n_grad,
            n_hvp: o.result.totals.n_hvp,
            f_final: o.result.f_final,
            grad_norm_final: o.result.grad_norm_final,
            wall_ms: o.wall_ns as f64 / 1e6,
        }
    }
}

impl SummaryRow {
    pub fn line(&self) -> String {
        format!(
            "{} seed={} status={} outer={} cg_iters={} n_f={} n_grad={} n_hvp={} |g|={:.3e} wall_ms={:.2}",
            self.algo,
            self.seed,
            self.status,
            self.outer_iters,
            self.cg_iters,
            self.n_f,
            self.n_grad,
            self.n_hvp,
            self.grad_norm_final,
            self.wall_ms
        )
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregate over seeds for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoStats {
    pub algo: Algo,
    pub runs: usize,
    pub converged: usize,
    pub mean_runtime_s: f64,
    pub median_runtime_s: f64,
    pub mean_subproblems: f64,
    pub median_subproblems: f64,
    pub mean_hv: f64,
    pub median_hv: f64,
}

impl AlgoStats {
    pub fn from_outcomes(algo: Algo, runs: &[RunOutcome]) -> Self {
        let col = |f: &dyn Fn(&RunOutcome) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let rt = col(&|o| o.wall_ns as f64 / 1e9);
        let sub = col(&|o| o.result.subproblems() as f64);
        let hv = col(&|o| o.result.totals.n_hvp as f64);
        Self {
            algo,
            runs: runs.len(),
            converged: runs.iter().filter(|o| o.result.status == Status::Converged).count(),
            mean_runtime_s: mean(&rt),
            median_runtime_s: median(&rt),
            mean_subproblems: mean(&sub),
            median_subproblems: median(&sub),
            mean_hv: mean(&hv),
            median_hv: median(&hv),
        }
    }
}

pub fn write_stats_csv(path: &Path, stats: &[AlgoStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for s in stats {
        w.serialize(s).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text table.
pub fn stats_table(stats: &[AlgoStats]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:>5} {:>9} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10}",
        "algo", "runs", "converged", "mean_time_s", "med_time_s", "mean_sub", "med_sub", "mean_hv", "med_hv"
    );
    for r in stats {
        let _ = writeln!(
            s,
            "{:<6} {:>5} {:>9} {:>12.4} {:>12.4} {:>10.1} {:>10.1} {:>10.1} {:>10.1}",
            r.algo.as_str(),
            r.runs,
            r.converged,
            r.mean_runtime_s,
            r.median_runtime_s,
            r.mean_subproblems,
            r.median_subproblems,
            r.mean_hv,
            r.median_hv
        );
    }
    s
}

/// Process exit code for a batch: 0 when every run converged, otherwise the
/// code of the first failing run in seed order.
pub fn exit_code(outcomes: &[RunOutcome]) -> i32 {
    outcomes
        .iter()
        .map(|o| status_code(o.result.status))
        .find(|&c| c != 0)
        .unwrap_or(0)
}

pub fn status_code(status: Status) -> i32 {
    match status {
        Status::Converged => 0,
        Status::MaxOuterReached => 2,
        Status::LineSearchFailed => 3,
        Status::CgStalled => 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capped_cg::DirectionType;
    use crate::oracle::EvalCounters;
    use crate::solve::IterationRecord;
    use nalgebra::DVector;

    fn record(k: usize, sigma: Option<f64>, hv: usize) -> IterationRecord {
        IterationRecord {
            k,
            f: 1.5,
            grad_norm: 0.25,
            d_type: DirectionType::Sol,
            epsilon: 0.5,
            zeta: 0.5,
            alpha: 1.0,
            j: 0,
            sigma,
            gamma_after: 10.0,
            cg_iters: hv,
            hv_products: hv,
            wall_ns: 1234,
        }
    }

    fn result(trace: Vec<IterationRecord>, status: Status) -> SolveResult {
        SolveResult {
            x_final: DVector::zeros(1),
            f_final: 0.0,
            grad_norm_final: 0.0,
            status,
            trace,
            totals: EvalCounters::default(),
        }
    }

    #[test]
    fn trace_format() {
        let res = result(vec![record(0, None, 2), record(1, Some(0.125), 3)], Status::Converged);
        let text = trace_to_string(&res).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER.join(","));
        assert_eq!(lines[1], "0,1.5,0.25,SOL,0.5,0.5,1.0,0,,10.0,2,2,2,1234");
        assert_eq!(lines[2], "1,1.5,0.25,SOL,0.5,0.5,1.0,0,0.125,10.0,3,3,5,1234");
        let stripped = strip_wall_ns(&text);
        assert!(stripped.lines().all(|l| l.split(',').count() == 13));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn exit_codes_follow_seed_order() {
        let mk = |seed, status| RunOutcome {
            algo: Algo::Ancg,
            seed,
            problem: "p".into(),
            result: result(vec![], status),
            wall_ns: 0,
        };
        assert_eq!(exit_code(&[mk(1, Status::Converged)]), 0);
        let runs = [mk(1, Status::Converged), mk(2, Status::CgStalled), mk(3, Status::MaxOuterReached)];
        assert_eq!(exit_code(&runs), 5);
        assert_eq!(status_code(Status::LineSearchFailed), 3);
    }
}

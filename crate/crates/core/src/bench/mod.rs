//! Benchmark driver behind the `ancg-bench` binary: `run`, `compare` and
//! `verify`.
//!
//! Seeds run concurrently on a rayon pool sized by `SOLVER_THREADS`; every
//! run owns its oracle and buffers, and results are gathered in seed order.

pub mod report;
pub mod spec;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use report::{exit_code, AlgoStats, RunOutcome, SummaryRow, TRACE_HEADER};
pub use spec::{parse_seeds, Algo, Family, RunSpec, SpecOverrides};
pub use suites::{run_suite, Fault, Suite, SuiteReport, SuiteSizes};

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 4;
/// Exit code for failed verification or unexpected runtime errors.
pub const EXIT_FAILURE: i32 = 1;

/// Reads `SOLVER_THREADS`; `None` means rayon's default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("SOLVER_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("SOLVER_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

fn solve_seed(spec: &RunSpec, seed: u64) -> Result<RunOutcome> {
    let start = Instant::now();
    let problem = spec.build_problem(seed)?;
    let result = spec.solver().solve(problem.as_ref(), &spec.x0())?;
    Ok(RunOutcome {
        algo: spec.algo,
        seed,
        problem: problem.name().to_string(),
        result,
        wall_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Solves every seed of a validated spec; outcomes are in seed-list order.
pub fn execute(spec: &RunSpec, threads: Option<usize>) -> Result<Vec<RunOutcome>> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| spec.seeds.par_iter().map(|&seed| solve_seed(spec, seed)).collect())
}

pub fn trace_path(out: &Path, spec: &RunSpec, seed: u64) -> PathBuf {
    out.join(format!("trace_{}_{}_seed{}.csv", spec.algo, spec.problem, seed))
}

fn write_outputs(spec: &RunSpec, outcomes: &[RunOutcome]) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(&spec.out)?;
    for o in outcomes {
        let file = std::fs::File::create(trace_path(&spec.out, spec, o.seed))?;
        report::write_trace(std::io::BufWriter::new(file), &o.result)?;
    }
    let rows: Vec<SummaryRow> = outcomes.iter().map(SummaryRow::from).collect();
    report::write_summary_csv(&spec.out.join(format!("summary_{}_{}.csv", spec.algo, spec.problem)), &rows)?;
    Ok(rows)
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}

/// `run`: solves each seed, writes traces and a summary, returns the exit
/// code.
pub fn cmd_run(spec: &RunSpec) -> i32 {
    let result = threads_from_env().and_then(|t| {
        let outcomes = execute(spec, t)?;
        let rows = write_outputs(spec, &outcomes)?;
        Ok((outcomes, rows))
    });
    let (outcomes, rows) = match result {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    for r in &rows {
        println!("{}", r.line());
    }
    let stats = AlgoStats::from_outcomes(spec.algo, &outcomes);
    println!(
        "median subproblems={} median hv_products={} median wall_s={:.4} converged={}/{}",
        stats.median_subproblems, stats.median_hv, stats.median_runtime_s, stats.converged, stats.runs
    );
    exit_code(&outcomes)
}

/// Checks that compared specs share instances and differ in algorithm.
pub fn validate_comparison(specs: &[RunSpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Config("compare needs at least two algorithms".into()));
    }
    for s in specs {
        s.validate()?;
        if !s.same_instances(&specs[0]) {
            return Err(Error::Config(format!(
                "{} does not share seeds and instances with {}",
                s.algo, specs[0].algo
            )));
        }
        if s.out != specs[0].out {
            return Err(Error::Config("compared specs must share one output directory".into()));
        }
    }
    let mut algos: Vec<_> = specs.iter().map(|s| s.algo).collect();
    algos.sort();
    algos.dedup();
    if algos.len() != specs.len() {
        return Err(Error::Config("each algorithm may appear once in a comparison".into()));
    }
    Ok(())
}

/// `compare`: runs every spec on the same instances and writes
/// `compare.csv` and `compare.txt` next to the traces.
pub fn cmd_compare(specs: &[RunSpec]) -> i32 {
    let result = (|| {
        validate_comparison(specs)?;
        let threads = threads_from_env()?;
        let runs = specs
            .iter()
            .map(|s| execute(s, threads))
            .collect::<Result<Vec<_>>>()?;
        let mut stats = Vec::new();
        for (s, outcomes) in specs.iter().zip(&runs) {
            write_outputs(s, outcomes)?;
            stats.push(AlgoStats::from_outcomes(s.algo, outcomes));
        }
        let out = &specs[0].out;
        report::write_stats_csv(&out.join("compare.csv"), &stats)?;
        let table = report::stats_table(&stats);
        std::fs::write(out.join("compare.txt"), &table)?;
        Ok((runs, table))
    })();
    match result {
        Ok((runs, table)) => {
            print!("{table}");
            runs.iter().map(|o| exit_code(o)).find(|&c| c != 0).unwrap_or(0)
        }
        Err(e) => fail(&e),
    }
}

/// `verify`: runs the selected suites (all by default).
pub fn cmd_verify(only: Option<Suite>, fault: Option<Fault>) -> i32 {
    let sizes = SuiteSizes::default();
    let mut ok = true;
    for suite in Suite::ALL.into_iter().filter(|s| only.is_none_or(|o| o == *s)) {
        match run_suite(suite, &sizes, fault) {
            Ok(rep) => {
                println!("suite {}: {} checks, {} failed", rep.suite, rep.checked, rep.failed);
                if let Some(r) = &rep.reproducer {
                    println!("FAIL {}: {r}", rep.suite);
                }
                ok &= rep.passed();
            }
            Err(e) => {
                println!("FAIL {suite}: error {e}");
                ok = false;
            }
        }
    }
    if ok {
        0
    } else {
        EXIT_FAILURE
    }
}

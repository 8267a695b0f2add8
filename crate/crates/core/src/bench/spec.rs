//! Run specifications: what to solve, with which method, on which seeds.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ancg::{ancg_solve, AncgConfig};
use crate::capped_cg::CgConfig;
use crate::error::{Error, Result};
use crate::fixed::{fixed_solve, FixedConfig};
use crate::oracle::Problem;
use crate::problems::{
    make_infeasibility, make_quadratic, make_quartic_test, make_repu, InfeasibilitySpec, RepuSpec,
};
use crate::solve::SolveResult;
use crate::uancg::{uancg_solve, LsVariant, UancgConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ancg,
    Uancg,
    Fixed,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Ancg => "ancg",
            Algo::Uancg => "uancg",
            Algo::Fixed => "fixed",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ancg" => Ok(Algo::Ancg),
            "uancg" => Ok(Algo::Uancg),
            "fixed" => Ok(Algo::Fixed),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Problem family. `quadratic` and `quartic` use `diag = (1, 2, …, dim)`
/// and ignore the seed; `infeas` and `repu` draw an instance per seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quadratic,
    Quartic,
    Infeas,
    Repu,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::Quartic => "quartic",
            Family::Infeas => "infeas",
            Family::Repu => "repu",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Family::Quadratic),
            "quartic" => Ok(Family::Quartic),
            "infeas" | "infeasibility" => Ok(Family::Infeas),
            "repu" => Ok(Family::Repu),
            other => Err(Error::Config(format!("unknown problem family {other:?}"))),
        }
    }
}

/// Parses `a..b` (inclusive), `a,b,c` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list {s:?}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(Error::Config(format!("empty seed range {s:?}")));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// One benchmark configuration. Missing keys in a JSON config take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub algo: Algo,
    pub problem: Family,
    /// Dimension for `infeas` and `repu`.
    pub n: usize,
    /// Number of constraints / samples.
    pub m: usize,
    pub p: f64,
    /// Dimension for `quadratic` and `quartic`.
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub gamma0: f64,
    pub eta: f64,
    pub theta: f64,
    pub nu: Option<f64>,
    pub max_iters: usize,
    /// Output directory for traces and summaries.
    pub out: PathBuf,
    pub ls_variant: LsVariant,
    pub track_hr: bool,
    /// Fixed baseline target; defaults to `tol`.
    pub eps_target: Option<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            algo: Algo::Ancg,
            problem: Family::Quadratic,
            n: 100,
            m: 10,
            p: 2.5,
            dim: 2,
            seeds: vec![1],
            tol: 1e-4,
            gamma0: 10.0,
            eta: 0.01,
            theta: 0.5,
            nu: None,
            max_iters: 10_000,
            out: PathBuf::from("bench_out"),
            ls_variant: LsVariant::Proof,
            track_hr: false,
            eps_target: None,
        }
    }
}

/// Command-line values that override a [`RunSpec`].
#[derive(Debug, Clone, Default, clap::Args)]
pub struct SpecOverrides {
    /// Problem family: quadratic, quartic, infeas, repu.
    #[arg(long)]
    pub problem: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// A single seed.
    #[arg(long, conflicts_with_all = ["seeds", "seed_range"])]
    pub seed: Option<u64>,
    /// `a..b` (inclusive) or a comma list.
    #[arg(long, conflicts_with = "seed_range")]
    pub seeds: Option<String>,
    /// `a..b`, inclusive.
    #[arg(long)]
    pub seed_range: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SOL backtracking scale for uancg: proof or displayed.
    #[arg(long)]
    pub ls_variant: Option<LsVariant>,
    /// Include ‖Hr‖/‖r‖ in capped CG's curvature bound (one extra product
    /// per CG iteration).
    #[arg(long)]
    pub track_hr: bool,
}

impl SpecOverrides {
    pub fn apply(&self, spec: &mut RunSpec) -> Result<()> {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    spec.$f = v.clone();
                }
            )*};
        }
        set!(problem, n, m, p, dim, tol, gamma0, eta, theta, max_iters, out, ls_variant);
        if self.nu.is_some() {
            spec.nu = self.nu;
        }
        if let Some(s) = self.seed {
            spec.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            spec.seeds = parse_seeds(s)?;
        }
        if let Some(s) = &self.seed_range {
            if !s.contains("..") {
                return Err(Error::Config(format!("--seed-range expects a..b, got {s:?}")));
            }
            spec.seeds = parse_seeds(s)?;
        }
        if self.track_hr {
            spec.track_hr = true;
        }
        Ok(())
    }
}

/// Reads a JSON config; unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// The solver configuration a spec resolves to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    Ancg(AncgConfig),
    Uancg(UancgConfig),
    Fixed(FixedConfig),
}

impl SolverChoice {
    pub fn solve(&self, problem: &dyn Problem, x0: &DVector<f64>) -> Result<SolveResult> {
        match self {
            SolverChoice::Ancg(c) => ancg_solve(problem, x0, c),
            SolverChoice::Uancg(c) => uancg_solve(problem, x0, c),
            SolverChoice::Fixed(c) => fixed_solve(problem, x0, c),
        }
    }
}

impl RunSpec {
    /// Problem dimension for this spec.
    pub fn problem_dim(&self) -> usize {
        match self.problem {
            Family::Quadratic | Family::Quartic => self.dim,
            Family::Infeas | Family::Repu => self.n,
        }
    }

    pub fn solver(&self) -> SolverChoice {
        let cg = CgConfig {
            max_iters: None,
            track_hr: self.track_hr,
        };
        match self.algo {
            Algo::Ancg => SolverChoice::Ancg(AncgConfig {
                gamma0: self.gamma0,
                eta: self.eta,
                theta: self.theta,
                nu: self.nu,
                grad_tol: self.tol,
                max_outer: self.max_iters,
                cg,
                ..AncgConfig::default()
            }),
            Algo::Uancg => SolverChoice::Uancg(UancgConfig {
                gamma0: self.gamma0,
                eta: self.eta,
                theta: self.theta,
                grad_tol: self.tol,
                max_outer: self.max_iters,
                cg,
                ls_variant: self.ls_variant,
                ..UancgConfig::default()
            }),
            Algo::Fixed => SolverChoice::Fixed(FixedConfig {
                eps_target: self.eps_target.unwrap_or(self.tol),
                nu: self.nu,
                eta: self.eta,
                theta: self.theta,
                grad_tol: self.tol,
                max_outer: self.max_iters,
                cg,
                ..FixedConfig::default()
            }),
        }
    }

    /// Full validation; touches no oracle and no file.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        if self.problem_dim() == 0 {
            return Err(Error::Config("problem dimension must be >= 1".into()));
        }
        if matches!(self.problem, Family::Infeas | Family::Repu) {
            if self.m == 0 {
                return Err(Error::Config("m must be >= 1".into()));
            }
            if !(self.p > 2.0) || !self.p.is_finite() {
                return Err(Error::Config(format!("power p must be > 2, got {}", self.p)));
            }
        }
        if self.algo != Algo::Uancg && self.ls_variant != LsVariant::Proof {
            return Err(Error::Config("--ls-variant only applies to uancg".into()));
        }
        match self.solver() {
            SolverChoice::Ancg(c) => c.validate(),
            SolverChoice::Uancg(c) => c.validate(),
            SolverChoice::Fixed(c) => c.validate(),
        }
    }

    pub fn build_problem(&self, seed: u64) -> Result<Box<dyn Problem>> {
        let diag = || (1..=self.dim).map(|i| i as f64).collect::<Vec<_>>();
        Ok(match self.problem {
            Family::Quadratic => Box::new(make_quadratic(diag())?),
            Family::Quartic => Box::new(make_quartic_test(diag())?),
            Family::Infeas => Box::new(make_infeasibility(InfeasibilitySpec {
                n: self.n,
                m: self.m,
                p: self.p,
                seed,
            })?),
            Family::Repu => Box::new(make_repu(RepuSpec {
                n: self.n,
                m: self.m,
                p: self.p,
                seed,
            })?),
        })
    }

    /// Starting point `(1, …, 1)`.
    pub fn x0(&self) -> DVector<f64> {
        DVector::from_element(self.problem_dim(), 1.0)
    }

    /// Whether two specs draw the same instances.
    pub fn same_instances(&self, other: &RunSpec) -> bool {
        let shape = |s: &RunSpec| match s.problem {
            Family::Quadratic | Family::Quartic => (s.problem, s.dim, 0, 0.0),
            Family::Infeas | Family::Repu => (s.problem, s.n, s.m, s.p),
        };
        self.seeds == other.seeds && shape(self) == shape(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert_eq!(parse_seeds("5, 2,9").unwrap(), vec![5, 2, 9]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("a..b").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn overrides_win_over_file_values() {
        let mut spec: RunSpec = serde_json::from_str(r#"{"algo":"fixed","problem":"repu","tol":1e-3,"seeds":[7]}"#).unwrap();
        let ov = SpecOverrides {
            tol: Some(1e-6),
            seed_range: Some("2..4".into()),
            ..Default::default()
        };
        ov.apply(&mut spec).unwrap();
        assert_eq!(spec.algo, Algo::Fixed);
        assert_eq!(spec.problem, Family::Repu);
        assert_eq!(spec.tol, 1e-6);
        assert_eq!(spec.seeds, vec![2, 3, 4]);
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(serde_json::from_str::<RunSpec>(r#"{"tolerance":1e-3}"#).is_err());
    }

    #[test]
    fn validation() {
        let ok = RunSpec::default();
        ok.validate().unwrap();
        let bad = RunSpec {
            problem: Family::Infeas,
            p: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().unwrap_err().is_config());
        let bad = RunSpec {
            seeds: vec![1, 1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunSpec {
            algo: Algo::Ancg,
            ls_variant: LsVariant::Displayed,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunSpec {
            theta: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fixed_target_defaults_to_tol() {
        let spec = RunSpec {
            algo: Algo::Fixed,
            tol: 1e-6,
            ..Default::default()
        };
        match spec.solver() {
            SolverChoice::Fixed(c) => assert_eq!(c.eps_target, 1e-6),
            other => panic!("{other:?}"),
        }
    }
}

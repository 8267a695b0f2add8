//! Adaptive regularized Newton-CG methods for nonconvex problems with Hölder
//! continuous Hessians.
//!
//! The solvers only ever touch the objective through an [`Oracle`]: values,
//! gradients and Hessian-vector products. Each outer iteration makes exactly
//! one call to [`capped_cg`](capped_cg::capped_cg).

pub mod ancg;
pub mod bench;
pub mod capped_cg;
pub mod error;
pub mod estimators;
pub mod fixed;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod solve;
pub mod uancg;
pub mod verify;

pub use ancg::{ancg_solve, ancg_step, AncgConfig};
pub use capped_cg::{capped_cg, CgConfig, CgOutcome, DirectionType};
pub use error::{Error, Result};
pub use fixed::{fixed_solve, FixedConfig};
pub use oracle::{EvalCounters, Oracle, Problem};
pub use solve::{IterationRecord, SolveResult, SolverState, Status};
pub use uancg::{uancg_solve, uancg_step, LsVariant, UancgConfig};

//! The kernel optimization problem and its solver.

mod ipm;
mod kernel;
mod problem;
mod sof;
mod solve;
mod sweep;

pub use kernel::{Provenance, TransformKernel};
pub use problem::{assemble, Objective, Problem, ProblemSpec};
pub use solve::{
    solve, Solution, SolveStatus, SolverSettings, Violation, DEFAULT_MAX_ITERS, DEFAULT_TIE_BREAK, DEFAULT_TOL,
};
pub use sof::{feature_divergence, sof_solve, SofSolution, SofStrategy};
pub use sweep::{sweep_epsilon, SweepPoint, SweepResult};

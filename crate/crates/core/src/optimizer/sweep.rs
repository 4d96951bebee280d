use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::ProblemSpec;
use super::solve::{solve, SolveStatus, SolverSettings};
use crate::constraints::Epsilon;
use crate::domain::JointPmf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub status: SolveStatus,
    /// Utility loss of the returned kernel (for infeasible points, of the
    /// least-violating kernel).
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Optimal objectives never increase along the grid (within `tol`).
    pub monotone: bool,
    /// Largest grid value that was infeasible while a larger value was feasible.
    pub infeasible_below: Option<f64>,
    /// Smallest grid value whose objective is at most `tol`.
    pub zero_from: Option<f64>,
}

/// Solves the problem independently for each uniform `epsilon` in an ascending
/// grid. Per-entry epsilon overrides of the template are dropped.
pub fn sweep_epsilon(
    pmf: &JointPmf,
    template: &ProblemSpec,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty epsilon grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidParams(format!("epsilon grid must be ascending and nonnegative: {grid:?}")));
    }
    let points = grid
        .par_iter()
        .map(|&eps| {
            let mut spec = template.clone();
            spec.discrimination = spec.discrimination.with_epsilon(Epsilon::scalar(eps));
            let problem = spec.assemble(pmf)?;
            let sol = solve(&problem, settings)?;
            Ok(SweepPoint { epsilon: eps, status: sol.status, objective: sol.objective, residual: sol.residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(points, settings.tol))
}

fn summarize(points: Vec<SweepPoint>, tol: f64) -> SweepResult {
    let optimal: Vec<&SweepPoint> = points.iter().filter(|p| p.status == SolveStatus::Optimal).collect();
    let monotone = optimal.windows(2).all(|w| w[1].objective <= w[0].objective + tol);
    let first_feasible = points.iter().position(|p| p.status == SolveStatus::Optimal);
    let infeasible_below = first_feasible
        .and_then(|i| i.checked_sub(1))
        .filter(|&i| points[i].status == SolveStatus::Infeasible)
        .map(|i| points[i].epsilon);
    let zero_from = optimal.iter().find(|p| p.objective <= tol).map(|p| p.epsilon);
    SweepResult { points, monotone, infeasible_below, zero_from }
}

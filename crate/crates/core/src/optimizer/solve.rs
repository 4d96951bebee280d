use std::fmt;

use serde::{Deserialize, Serialize};

use super::ipm::{self, IpmSettings, IpmStatus};
use super::kernel::{Provenance, TransformKernel};
use super::problem::{build_program, LossLevel, Objective, Parametrization, Phase, Problem};
use crate::constraints::ConstraintLabel;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 50_000;
pub const DEFAULT_TIE_BREAK: f64 = 1e-9;

/// Interior-point iterations rarely exceed a few dozen; this caps a single solve.
const IPM_ITER_CAP: usize = 500;
const INITIAL_PENALTY: f64 = 1e3;
/// Room left to the utility loss while polishing.
const POLISH_SLACK: f64 = 1e-7;
/// Parameters below this are treated as interior-point residue and zeroed.
const SNAP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Weight of `||k - I||^2 / 2` in the main solve.
    pub tie_break: f64,
    /// After the main solve, move to the optimal kernel closest to the identity.
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_polish() -> bool {
    true
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, tie_break: DEFAULT_TIE_BREAK, polish: true }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) || self.max_iters == 0 || !(self.tie_break >= 0.0) {
            return Err(Error::InvalidParams(format!("bad solver settings {self:?}")));
        }
        Ok(())
    }

    fn ipm(&self) -> IpmSettings {
        IpmSettings {
            max_iters: self.max_iters.min(IPM_ITER_CAP),
            primal_tol: 1e-11,
            dual_tol: (self.tol * 1e-3).clamp(1e-12, 1e-9),
            gap_tol: (self.tol * 1e-3).clamp(1e-12, 1e-9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
        })
    }
}

/// The constraint violated most by the returned kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Index into the problem's constraints (discrimination first).
    pub index: usize,
    pub label: ConstraintLabel,
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub kernel: TransformKernel,
    pub objective: f64,
    /// Largest constraint violation of `kernel`.
    pub residual: f64,
    /// Remaining complementarity of the interior-point certificate.
    pub gap: f64,
    pub iterations: usize,
    /// For infeasible problems, the minimum total violation found.
    pub min_total_violation: Option<f64>,
    pub violated: Option<Violation>,
    pub warnings: Vec<String>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solution in parameter space plus the assembled kernel.
pub(crate) struct ParamSolution {
    pub solution: Solution,
    pub values: Vec<Vec<f64>>,
}

fn snap(values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|b| {
            let kept: Vec<f64> = b.iter().map(|&v| if v < SNAP { 0.0 } else { v }).collect();
            let total: f64 = kept.iter().sum();
            if total > 0.0 {
                kept.iter().map(|v| v / total).collect()
            } else {
                b.clone()
            }
        })
        .collect()
}

fn violation(problem: &Problem, kernel: &TransformKernel) -> (f64, Option<Violation>) {
    let (amount, idx) = problem.max_residual(kernel);
    let v = idx.map(|index| Violation { index, label: problem.constraint(index).label, amount });
    (amount, v)
}

fn provenance(problem: &Problem, settings: &SolverSettings) -> Provenance {
    Provenance {
        fingerprint: String::new(),
        tol: settings.tol,
        objective: problem.objective.name().into(),
        solver: "ipm".into(),
    }
}

pub(crate) fn solve_param(
    problem: &Problem,
    param: &Parametrization,
    settings: &SolverSettings,
) -> Result<ParamSolution> {
    settings.validate()?;
    let ipm_settings = settings.ipm();
    let finish = |values: Vec<Vec<f64>>, status, iterations, gap, min_total| -> Result<ParamSolution> {
        let (probs, values) = param.kernel(problem, &values);
        let kernel = TransformKernel::from_probs(problem.pmf.schema(), probs, provenance(problem, settings))?;
        let (residual, violated) = violation(problem, &kernel);
        let objective = problem.objective_value(&kernel);
        Ok(ParamSolution {
            solution: Solution {
                status,
                objective,
                residual,
                gap,
                iterations,
                min_total_violation: min_total,
                violated,
                kernel,
                warnings: problem.warnings(),
            },
            values,
        })
    };

    let mut total_iters = 0;
    let mut feasibility: Option<f64> = None;
    let mut penalty = INITIAL_PENALTY;
    for _ in 0..3 {
        let prog = build_program(problem, param, &Phase::Optimize { penalty }, settings.tie_break);
        let out = ipm::solve(&prog, &ipm_settings);
        total_iters += out.iterations;
        match out.status {
            IpmStatus::Breakdown => {
                return Err(Error::NumericalBreakdown(format!(
                    "interior point stalled after {} iterations (primal {:.2e}, dual {:.2e})",
                    out.iterations, out.primal_res, out.dual_res
                )))
            }
            IpmStatus::IterationLimit => {
                let n = param.blocks.len();
                return finish(out.z[..n].to_vec(), SolveStatus::IterationLimit, total_iters, out.gap, None);
            }
            IpmStatus::Converged => {}
        }
        let n = param.blocks.len();
        let candidate = finish(out.z[..n].to_vec(), SolveStatus::Optimal, total_iters, out.gap, None)?;
        if candidate.solution.residual <= settings.tol && out.gap <= settings.tol {
            if !settings.polish {
                return Ok(candidate);
            }
            let level = match problem.objective {
                Objective::Kl => {
                    let q = candidate.solution.kernel.pushforward(&problem.pmf);
                    LossLevel::Image {
                        lo: q.iter().map(|v| v * (1.0 - POLISH_SLACK)).collect(),
                        hi: q.iter().map(|v| v * (1.0 + POLISH_SLACK)).collect(),
                    }
                }
                Objective::L1 => LossLevel::Total { bound: candidate.solution.objective + POLISH_SLACK },
            };
            let prog = build_program(problem, param, &Phase::Polish { penalty, level }, settings.tie_break);
            let polish_settings = IpmSettings { gap_tol: 1e-13, dual_tol: 1e-12, ..ipm_settings };
            let pol = ipm::solve(&prog, &polish_settings);
            total_iters += pol.iterations;
            let mut best = candidate;
            best.solution.iterations = total_iters;
            let acceptable = |p: &ParamSolution, best: &ParamSolution| {
                p.solution.residual <= settings.tol && p.solution.objective <= best.solution.objective + settings.tol
            };
            if pol.primal_res <= polish_settings.primal_tol {
                let polished = finish(pol.z[..n].to_vec(), SolveStatus::Optimal, total_iters, out.gap, None)?;
                if acceptable(&polished, &best) {
                    best = polished;
                }
            } else {
                log::debug!("polish did not improve the solution ({:?})", pol.status);
            }
            let snapped = finish(snap(&best.values), SolveStatus::Optimal, total_iters, out.gap, None)?;
            if acceptable(&snapped, &best) {
                best = snapped;
            }
            return Ok(best);
        }
        if feasibility.is_none() {
            let prog = build_program(problem, param, &Phase::Feasibility, settings.tie_break);
            let p1 = ipm::solve(&prog, &ipm_settings);
            total_iters += p1.iterations;
            if p1.status == IpmStatus::Breakdown {
                return Err(Error::NumericalBreakdown("feasibility phase stalled".into()));
            }
            let phase1 = finish(p1.z[..n].to_vec(), SolveStatus::Infeasible, total_iters, p1.gap, None)?;
            let total = problem.total_violation(&phase1.solution.kernel);
            if total > settings.tol {
                let mut sol = phase1;
                sol.solution.min_total_violation = Some(total);
                log::info!("infeasible: minimum total violation {total:.3e}");
                return Ok(sol);
            }
            feasibility = Some(total);
        }
        penalty *= 100.0;
    }
    let prog = build_program(problem, param, &Phase::Optimize { penalty }, settings.tie_break);
    let out = ipm::solve(&prog, &ipm_settings);
    let n = param.blocks.len();
    finish(out.z[..n].to_vec(), SolveStatus::IterationLimit, total_iters + out.iterations, out.gap, None)
}

/// Solves the problem. Infeasible problems return the kernel minimizing total
/// constraint violation with the worst violated constraint.
pub fn solve(problem: &Problem, settings: &SolverSettings) -> Result<Solution> {
    let param = Parametrization::direct(problem);
    if param.blocks.iter().any(Vec::is_empty) {
        return Err(Error::Infeasible("an input cell has no admissible output".into()));
    }
    Ok(solve_param(problem, &param, settings)?.solution)
}

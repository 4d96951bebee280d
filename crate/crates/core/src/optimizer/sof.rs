//! Kernels factored as `k(x_hat, y_hat | d, x, y) = p(y_hat | x_hat) * p(x_hat | d, x, y)`,
//! so that the outcome can be produced from the transformed features alone.

use serde::{Deserialize, Serialize};

use super::kernel::TransformKernel;
use super::problem::{ParamVar, Parametrization, Problem};
use super::solve::{solve_param, Solution, SolveStatus, SolverSettings, Violation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SofStrategy {
    /// Keep `p(y_hat | x_hat)` equal to the data's `p(y | x)` and optimize the feature map.
    FixConditional,
    /// Alternate exact solves over the feature map and the outcome conditional.
    Alternating,
}

#[derive(Debug, Clone)]
pub struct SofSolution {
    /// The product kernel with its diagnostics.
    pub solution: Solution,
    /// `p(y_hat | x_hat)`, indexed `x_hat * n_y + y_hat`.
    pub conditional: Vec<f64>,
    /// `p(x_hat | d, x, y)`, indexed `cell * n_x + x_hat`.
    pub mapping: Vec<f64>,
    /// Objective after each accepted step.
    pub history: Vec<f64>,
    /// Divergence between the original and transformed feature marginals.
    pub lower_bound: f64,
    pub outer_iterations: usize,
}

/// Solves the factored problem. Zero-mass input cells keep their features.
pub fn sof_solve(
    problem: &Problem,
    strategy: SofStrategy,
    settings: &SolverSettings,
    max_outer: usize,
) -> Result<SofSolution> {
    if max_outer == 0 {
        return Err(Error::InvalidParams("max_outer must be positive".into()));
    }
    let start = data_conditional(problem);
    let mut state = match mapping_step(problem, &start, settings)? {
        Some(s) if s.solution.is_optimal() => s,
        first if strategy == SofStrategy::Alternating => {
            match conditional_step(problem, &identity_mapping(problem), &start, settings)? {
                Some(s) if s.solution.is_optimal() => s,
                other => return unsolved(problem, first.or(other)),
            }
        }
        first => return unsolved(problem, first),
    };
    let mut history = vec![state.solution.objective];
    let mut outer = 1;
    if strategy == SofStrategy::Alternating {
        let mut converged = false;
        while outer < max_outer {
            outer += 1;
            let before = state.solution.objective;
            if let Some(next) = conditional_step(problem, &state.mapping, &state.conditional, settings)? {
                if next.solution.is_optimal() && next.solution.objective <= state.solution.objective {
                    state = next;
                }
            }
            if let Some(next) = mapping_step(problem, &state.conditional, settings)? {
                if next.solution.is_optimal() && next.solution.objective <= state.solution.objective {
                    state = next;
                }
            }
            history.push(state.solution.objective);
            if before - state.solution.objective < settings.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            state.solution.status = SolveStatus::IterationLimit;
        }
    }
    let lower_bound = feature_divergence(problem, &state.solution.kernel);
    debug_assert!(strategy == SofStrategy::Alternating || state.solution.objective >= lower_bound - 1e-9);
    Ok(SofSolution {
        solution: state.solution,
        conditional: state.conditional,
        mapping: state.mapping,
        history,
        lower_bound,
        outer_iterations: outer,
    })
}

struct State {
    solution: Solution,
    conditional: Vec<f64>,
    mapping: Vec<f64>,
}

/// `p(y | x)` where defined, `p(y)` elsewhere.
fn data_conditional(problem: &Problem) -> Vec<f64> {
    let s = problem.pmf.schema();
    let fallback = problem.pmf.p_y();
    (0..s.x_card()).flat_map(|x| problem.pmf.y_given_x(x).unwrap_or(fallback)).collect()
}

fn identity_mapping(problem: &Problem) -> Vec<f64> {
    let s = problem.pmf.schema();
    let nx = s.x_card();
    let mut r = vec![0.0; s.n_cells() * nx];
    for c in 0..s.n_cells() {
        r[c * nx + s.split_cell(c).1] = 1.0;
    }
    r
}

/// Optimizes the feature map with the outcome conditional fixed.
fn mapping_step(problem: &Problem, conditional: &[f64], settings: &SolverSettings) -> Result<Option<State>> {
    let s = problem.pmf.schema();
    let (nx, ny, nxy) = (s.x_card(), s.y_card(), s.n_xy());
    let mut blocks = Vec::new();
    let mut targets = Vec::new();
    for &c in problem.rows() {
        let x = s.split_cell(c).1;
        let mut block = Vec::new();
        let mut ts = Vec::new();
        for xh in 0..nx {
            let entries: Vec<(usize, f64)> = (0..ny)
                .map(|yh| (c * nxy + s.xy(xh, yh), conditional[xh * ny + yh]))
                .filter(|e| e.1 > 0.0)
                .collect();
            if entries.iter().any(|&(e, _)| problem.is_fixed_zero(e)) {
                continue;
            }
            block.push(ParamVar { entries, center: if xh == x { 1.0 } else { 0.0 } });
            ts.push(xh);
        }
        if block.is_empty() {
            return Ok(None);
        }
        blocks.push(block);
        targets.push(ts);
    }
    let param = Parametrization { blocks, covered: problem.rows().to_vec() };
    let ps = solve_param(problem, &param, settings)?;
    let mut mapping = identity_mapping(problem);
    for ((&c, ts), vals) in problem.rows().iter().zip(&targets).zip(&ps.values) {
        let row = &mut mapping[c * nx..(c + 1) * nx];
        row.iter_mut().for_each(|v| *v = 0.0);
        for (&xh, &v) in ts.iter().zip(vals) {
            row[xh] = v;
        }
    }
    Ok(Some(finish(problem, ps.solution, conditional.to_vec(), mapping)?))
}

/// Optimizes the outcome conditional with the feature map fixed.
fn conditional_step(
    problem: &Problem,
    mapping: &[f64],
    current: &[f64],
    settings: &SolverSettings,
) -> Result<Option<State>> {
    let s = problem.pmf.schema();
    let (nx, ny, nxy) = (s.x_card(), s.y_card(), s.n_xy());
    let mut blocks = Vec::new();
    let mut owners = Vec::new();
    for xh in 0..nx {
        let feeding: Vec<(usize, f64)> =
            problem.rows().iter().map(|&c| (c, mapping[c * nx + xh])).filter(|t| t.1 > 0.0).collect();
        if feeding.is_empty() {
            continue;
        }
        let mut block = Vec::new();
        let mut ys = Vec::new();
        for yh in 0..ny {
            let entries: Vec<(usize, f64)> = feeding.iter().map(|&(c, w)| (c * nxy + s.xy(xh, yh), w)).collect();
            if entries.iter().any(|&(e, _)| problem.is_fixed_zero(e)) {
                continue;
            }
            block.push(ParamVar { entries, center: current[xh * ny + yh] });
            ys.push(yh);
        }
        if block.is_empty() {
            return Ok(None);
        }
        blocks.push(block);
        owners.push((xh, ys));
    }
    let param = Parametrization { blocks, covered: problem.rows().to_vec() };
    let ps = solve_param(problem, &param, settings)?;
    let mut conditional = current.to_vec();
    for ((xh, ys), vals) in owners.iter().zip(&ps.values) {
        let row = &mut conditional[xh * ny..(xh + 1) * ny];
        row.iter_mut().for_each(|v| *v = 0.0);
        for (&yh, &v) in ys.iter().zip(vals) {
            row[yh] = v;
        }
    }
    Ok(Some(finish(problem, ps.solution, conditional, mapping.to_vec())?))
}

/// Rebuilds the kernel as the exact product of the two factors.
fn product_kernel(problem: &Problem, conditional: &[f64], mapping: &[f64], base: &TransformKernel) -> Result<TransformKernel> {
    let s = problem.pmf.schema();
    let (nx, ny, nxy) = (s.x_card(), s.y_card(), s.n_xy());
    let mut probs = vec![0.0; s.n_cells() * nxy];
    for c in 0..s.n_cells() {
        for xh in 0..nx {
            for yh in 0..ny {
                probs[c * nxy + s.xy(xh, yh)] = mapping[c * nx + xh] * conditional[xh * ny + yh];
            }
        }
    }
    TransformKernel::from_probs(s, probs, base.provenance().clone())
}

fn finish(problem: &Problem, mut solution: Solution, conditional: Vec<f64>, mapping: Vec<f64>) -> Result<State> {
    let kernel = product_kernel(problem, &conditional, &mapping, &solution.kernel)?;
    let (residual, idx) = problem.max_residual(&kernel);
    solution.violated = idx.map(|index| Violation { index, label: problem.constraint(index).label, amount: residual });
    solution.residual = residual;
    solution.objective = problem.objective_value(&kernel);
    if solution.status == SolveStatus::Infeasible {
        solution.min_total_violation = Some(problem.total_violation(&kernel));
    }
    solution.kernel = kernel;
    Ok(State { solution, conditional, mapping })
}

/// Reports a failed first step. `None` means some input cell had no admissible
/// target at all; the identity features are reported then.
fn unsolved(problem: &Problem, state: Option<State>) -> Result<SofSolution> {
    let state = match state {
        Some(s) => s,
        None => {
            let kernel = TransformKernel::identity(problem.pmf.schema());
            let solution = Solution {
                status: SolveStatus::Infeasible,
                objective: 0.0,
                residual: 0.0,
                gap: f64::NAN,
                iterations: 0,
                min_total_violation: None,
                violated: None,
                kernel: kernel.clone(),
                warnings: problem.warnings(),
            };
            finish(problem, solution, data_conditional(problem), identity_mapping(problem))?
        }
    };
    let lower_bound = feature_divergence(problem, &state.solution.kernel);
    Ok(SofSolution {
        solution: state.solution,
        conditional: state.conditional,
        mapping: state.mapping,
        history: Vec::new(),
        lower_bound,
        outer_iterations: 1,
    })
}

/// Utility loss between the feature marginals, a lower bound on the full loss.
pub fn feature_divergence(problem: &Problem, kernel: &TransformKernel) -> f64 {
    let s = problem.pmf.schema();
    let ny = s.y_card();
    let q = kernel.pushforward(&problem.pmf);
    let qx: Vec<f64> = q.chunks(ny).map(|c| c.iter().sum()).collect();
    problem.objective.eval(&problem.pmf.p_x(), &qx)
}

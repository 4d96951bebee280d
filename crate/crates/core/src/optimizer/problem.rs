use serde::{Deserialize, Serialize};

use super::ipm::{Block, Cost, Program};
use super::kernel::TransformKernel;
use crate::constraints::{
    build_discrimination_constraints, build_distortion_constraints, ConstraintLabel, DiscriminationSpec,
    DistortionBudget, DistortionMetric, LinearConstraint, LinearConstraintSet, FORBIDDEN,
};
use crate::domain::{kl_divergence, l1_distance, JointPmf};
use crate::error::{Error, Result};

/// Utility loss between the original and transformed (x, y) distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `KL(p_XY || q)`.
    Kl,
    /// `sum |p_XY - q|`.
    L1,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Kl => "kl",
            Objective::L1 => "l1",
        }
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Objective::Kl => kl_divergence(p, q).unwrap_or(f64::INFINITY),
            Objective::L1 => l1_distance(p, q).unwrap_or(f64::INFINITY),
        }
    }
}

/// Everything needed to assemble a problem from a pmf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub discrimination: DiscriminationSpec,
    pub metric: DistortionMetric,
    pub budget: DistortionBudget,
    pub objective: Objective,
}

impl ProblemSpec {
    pub fn assemble(&self, pmf: &JointPmf) -> Result<Problem> {
        assemble(pmf, &self.discrimination, &self.metric, &self.budget, self.objective)
    }
}

/// The convex program over the transform kernel: one simplex row per
/// positive-mass input cell.
#[derive(Debug, Clone)]
pub struct Problem {
    pub pmf: JointPmf,
    pub objective: Objective,
    pub discrimination: LinearConstraintSet,
    pub distortion: LinearConstraintSet,
    rows: Vec<usize>,
    fixed_zero: Vec<bool>,
}

pub fn assemble(
    pmf: &JointPmf,
    discrimination: &DiscriminationSpec,
    metric: &DistortionMetric,
    budget: &DistortionBudget,
    objective: Objective,
) -> Result<Problem> {
    let disc = build_discrimination_constraints(discrimination, pmf)?;
    let compiled = metric.compile(pmf.schema())?;
    let dist = build_distortion_constraints(&compiled, budget, pmf)?;
    Problem::new(pmf.clone(), objective, disc, dist)
}

impl Problem {
    /// Builds a problem from explicit constraint sets. Kernel entries that a
    /// nonnegative constraint makes unreachable are fixed to zero: every positive
    /// coefficient of a `<= 0` row, and forbidden-level distortion entries whose
    /// budget is below the forbidden level.
    pub fn new(
        pmf: JointPmf,
        objective: Objective,
        discrimination: LinearConstraintSet,
        distortion: LinearConstraintSet,
    ) -> Result<Self> {
        let schema = pmf.schema();
        let n_vars = schema.n_cells() * schema.n_xy();
        for c in discrimination.constraints.iter().chain(&distortion.constraints) {
            if let Some(&(v, _)) = c.terms.iter().find(|t| t.0 >= n_vars) {
                return Err(Error::InvalidParams(format!("constraint {} references variable {v}", c.label)));
            }
        }
        let mut fixed_zero = vec![false; n_vars];
        for c in discrimination.constraints.iter().chain(&distortion.constraints) {
            if c.terms.iter().any(|t| t.1 < 0.0) {
                continue;
            }
            let expected = matches!(c.label, ConstraintLabel::Expected { .. });
            for &(v, a) in &c.terms {
                if c.rhs <= 0.0 || (expected && a >= FORBIDDEN && c.rhs < FORBIDDEN) {
                    fixed_zero[v] = true;
                }
            }
        }
        let rows = pmf.support();
        Ok(Problem { pmf, objective, discrimination, distortion, rows, fixed_zero })
    }

    /// Input cells that carry kernel variables.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Number of kernel variables before eliminating fixed entries.
    pub fn n_variables(&self) -> usize {
        self.rows.len() * self.pmf.schema().n_xy()
    }

    /// Number of kernel variables left after fixing unreachable entries.
    pub fn n_free_variables(&self) -> usize {
        let nxy = self.pmf.schema().n_xy();
        self.rows
            .iter()
            .map(|&c| (0..nxy).filter(|&o| !self.fixed_zero[c * nxy + o]).count())
            .sum()
    }

    pub fn is_fixed_zero(&self, var: usize) -> bool {
        self.fixed_zero[var]
    }

    pub fn constraints(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.discrimination.constraints.iter().chain(&self.distortion.constraints)
    }

    pub fn n_constraints(&self) -> usize {
        self.discrimination.len() + self.distortion.len()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.discrimination.warnings.iter().chain(&self.distortion.warnings).cloned().collect()
    }

    /// Utility loss of a kernel (without the tie-break term).
    pub fn objective_value(&self, kernel: &TransformKernel) -> f64 {
        self.objective.eval(&self.pmf.p_xy(), &kernel.pushforward(&self.pmf))
    }

    /// Largest violation of any constraint or fixed entry, with the index of the
    /// worst constraint (`None` when the worst is a fixed entry or nothing is violated).
    pub fn max_residual(&self, kernel: &TransformKernel) -> (f64, Option<usize>) {
        let probs = kernel.probs();
        let mut worst = (0.0, None);
        for (i, c) in self.constraints().enumerate() {
            let v = c.violation(probs);
            if v > worst.0 {
                worst = (v, Some(i));
            }
        }
        for (v, &f) in self.fixed_zero.iter().enumerate() {
            if f && probs[v] > worst.0 {
                worst = (probs[v], None);
            }
        }
        worst
    }

    pub fn total_violation(&self, kernel: &TransformKernel) -> f64 {
        let probs = kernel.probs();
        self.constraints().map(|c| c.violation(probs)).sum::<f64>()
            + self.fixed_zero.iter().zip(probs).filter(|(f, _)| **f).map(|(_, p)| p).sum::<f64>()
    }

    pub fn constraint(&self, i: usize) -> &LinearConstraint {
        let nd = self.discrimination.len();
        if i < nd {
            &self.discrimination.constraints[i]
        } else {
            &self.distortion.constraints[i - nd]
        }
    }
}

/// A parameter that feeds kernel entries linearly: `k[entry] += w * value`.
#[derive(Debug, Clone, Default)]
pub(crate) struct ParamVar {
    pub entries: Vec<(usize, f64)>,
    /// Center of the tie-break penalty.
    pub center: f64,
}

/// Parameters grouped into simplex blocks (each block sums to 1). Each kernel
/// entry may be fed by at most one parameter; entries of covered rows not fed
/// by any parameter are zero.
#[derive(Debug, Clone, Default)]
pub(crate) struct Parametrization {
    pub blocks: Vec<Vec<ParamVar>>,
    /// Input cells whose kernel rows the parameters determine.
    pub covered: Vec<usize>,
}

impl Parametrization {
    /// One block per positive-mass row, one parameter per free kernel entry.
    pub fn direct(problem: &Problem) -> Self {
        let nxy = problem.pmf.schema().n_xy();
        let blocks = problem
            .rows
            .iter()
            .map(|&c| {
                (0..nxy)
                    .filter(|&o| !problem.fixed_zero[c * nxy + o])
                    .map(|o| ParamVar {
                        entries: vec![(c * nxy + o, 1.0)],
                        center: if o == c % nxy { 1.0 } else { 0.0 },
                    })
                    .collect()
            })
            .collect();
        Parametrization { blocks, covered: problem.rows.clone() }
    }

    /// Builds the kernel from parameter values (clipped at 0 and renormalized per block).
    pub fn kernel(&self, problem: &Problem, values: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let schema = problem.pmf.schema();
        let nxy = schema.n_xy();
        let mut probs = TransformKernel::identity(schema).probs().to_vec();
        for &c in &self.covered {
            probs[c * nxy..(c + 1) * nxy].iter_mut().for_each(|v| *v = 0.0);
        }
        let mut clean = Vec::with_capacity(values.len());
        for (block, vals) in self.blocks.iter().zip(values) {
            // trailing values belong to the block's slack variables
            let mut v: Vec<f64> = vals[..block.len()].iter().map(|x| x.max(0.0)).collect();
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter_mut().for_each(|x| *x /= s);
            } else {
                v.iter_mut().for_each(|x| *x = 1.0 / block.len() as f64);
            }
            for (p, &x) in block.iter().zip(&v) {
                for &(e, w) in &p.entries {
                    probs[e] += w * x;
                }
            }
            clean.push(v);
        }
        // rows may drift by rounding when parameters feed several entries
        for &c in &self.covered {
            let row = &mut probs[c * nxy..(c + 1) * nxy];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        (probs, clean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Phase {
    /// Minimize the utility loss; constraint violations cost `penalty` each.
    Optimize { penalty: f64 },
    /// Minimize total constraint violation.
    Feasibility,
    /// Minimize the distance to the parameter centers while keeping the
    /// utility loss at its optimum.
    Polish { penalty: f64, level: LossLevel },
}

/// How the polish phase pins the utility loss.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LossLevel {
    /// Each transformed mass with positive original mass stays within `[lo, hi]`.
    Image { lo: Vec<f64>, hi: Vec<f64> },
    /// Total absolute deviation stays below `bound`.
    Total { bound: f64 },
}

/// Lowers a parametrized problem to the interior-point program. The last block
/// holds the global auxiliary variables.
pub(crate) fn build_program(problem: &Problem, param: &Parametrization, phase: &Phase, tie_break: f64) -> Program {
    let schema = problem.pmf.schema();
    let nxy = schema.n_xy();
    let mut owner: Vec<Option<(usize, usize, f64)>> = vec![None; schema.n_cells() * nxy];
    for (b, block) in param.blocks.iter().enumerate() {
        for (i, v) in block.iter().enumerate() {
            for &(e, w) in &v.entries {
                owner[e] = Some((b, i, w));
            }
        }
    }

    let weight = match phase {
        Phase::Polish { .. } => 1.0,
        _ => tie_break,
    };
    let mut blocks: Vec<Block> = param
        .blocks
        .iter()
        .map(|block| {
            let mut b = Block::default();
            for v in block {
                let sq: f64 = v.entries.iter().map(|e| e.1 * e.1).sum::<f64>().max(1.0);
                let cost = Cost { lin: -weight * sq * v.center, quad: weight * sq, neglog: 0.0 };
                b.push_var(cost, 1.0 / block.len() as f64);
            }
            b.push_row(&vec![1.0; block.len()], 1.0);
            b
        })
        .collect();
    let mut global = Block::default();
    let mut global_rhs: Vec<f64> = Vec::new();
    let violation_cost = match phase {
        Phase::Optimize { penalty } | Phase::Polish { penalty, .. } => *penalty,
        Phase::Feasibility => 1.0,
    };

    for c in problem.constraints() {
        let mut coefs: Vec<(usize, usize, f64)> = Vec::new();
        for &(e, a) in &c.terms {
            if let Some((b, i, w)) = owner[e] {
                coefs.push((b, i, a * w));
            }
        }
        if coefs.is_empty() && c.rhs >= 0.0 {
            continue;
        }
        let first = coefs.first().map(|t| t.0);
        match first.filter(|&b0| coefs.iter().all(|t| t.0 == b0)) {
            Some(b) => {
                let blk = &mut blocks[b];
                let mut row = vec![0.0; blk.n()];
                for &(_, i, a) in &coefs {
                    row[i] += a;
                }
                blk.push_var(Cost::default(), 1.0);
                blk.push_var(Cost::linear(violation_cost), 1.0);
                row.push(1.0);
                row.push(-1.0);
                blk.push_row(&row, c.rhs);
            }
            None => {
                let r = global_rhs.len();
                global_rhs.push(c.rhs);
                for &(b, i, a) in &coefs {
                    blocks[b].global[i].push((r, a));
                }
                let s = global.push_var(Cost::default(), 1.0);
                global.global[s].push((r, 1.0));
                let t = global.push_var(Cost::linear(violation_cost), 1.0);
                global.global[t].push((r, -1.0));
            }
        }
    }

    let p = problem.pmf.p_xy();
    let kl = problem.objective == Objective::Kl;
    let mut link_rows: Vec<Option<usize>> = vec![None; nxy];
    match phase {
        Phase::Feasibility => {}
        Phase::Optimize { .. } => {
            for j in 0..nxy {
                if kl && p[j] <= 0.0 {
                    continue;
                }
                let r = global_rhs.len();
                link_rows[j] = Some(r);
                if kl {
                    global_rhs.push(0.0);
                    let q = global.push_var(Cost { neglog: p[j], ..Default::default() }, p[j]);
                    global.global[q].push((r, -1.0));
                } else {
                    global_rhs.push(p[j]);
                    let u = global.push_var(Cost::linear(1.0), 1.0);
                    global.global[u].push((r, 1.0));
                    let v = global.push_var(Cost::linear(1.0), 1.0);
                    global.global[v].push((r, -1.0));
                }
            }
        }
        Phase::Polish { level: LossLevel::Image { lo, hi }, .. } => {
            for j in 0..nxy {
                if p[j] <= 0.0 {
                    continue;
                }
                // image - a = lo, a + b = hi - lo
                let r = global_rhs.len();
                link_rows[j] = Some(r);
                global_rhs.push(lo[j]);
                global_rhs.push(hi[j] - lo[j]);
                let a = global.push_var(Cost::default(), 0.5 * (hi[j] - lo[j]).max(1e-12));
                global.global[a].push((r, -1.0));
                global.global[a].push((r + 1, 1.0));
                let b = global.push_var(Cost::default(), 0.5 * (hi[j] - lo[j]).max(1e-12));
                global.global[b].push((r + 1, 1.0));
            }
        }
        Phase::Polish { level: LossLevel::Total { bound }, .. } => {
            let total = nxy + global_rhs.len();
            let mut dev = Vec::new();
            for j in 0..nxy {
                let r = global_rhs.len();
                link_rows[j] = Some(r);
                global_rhs.push(p[j]);
                let u = global.push_var(Cost::default(), 1.0);
                global.global[u].push((r, 1.0));
                let v = global.push_var(Cost::default(), 1.0);
                global.global[v].push((r, -1.0));
                dev.push(u);
                dev.push(v);
            }
            debug_assert_eq!(total, global_rhs.len());
            global_rhs.push(*bound);
            for u in dev {
                global.global[u].push((total, 1.0));
            }
            let s = global.push_var(Cost::default(), 1.0);
            global.global[s].push((total, 1.0));
        }
    }
    let mass = problem.pmf.mass();
    for (b, block) in param.blocks.iter().enumerate() {
        for (i, v) in block.iter().enumerate() {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for &(e, w) in &v.entries {
                let (cell, j) = (e / nxy, e % nxy);
                if let Some(r) = link_rows[j] {
                    match acc.iter_mut().find(|t| t.0 == r) {
                        Some(t) => t.1 += mass[cell] * w,
                        None => acc.push((r, mass[cell] * w)),
                    }
                }
            }
            blocks[b].global[i].extend(acc.into_iter().filter(|t| t.1 != 0.0));
        }
    }

    blocks.push(global);
    Program { blocks, global_rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Combiner, DiscriminationMode, DistortionMetric};
    use crate::domain::{Alphabet, Role, Schema, Variable};

    pub(crate) fn schema(nd: usize, nx: usize) -> Schema {
        let d: Vec<String> = (0..nd).map(|i| format!("d{i}")).collect();
        let x: Vec<String> = (0..nx).map(|i| format!("x{i}")).collect();
        let d: Vec<&str> = d.iter().map(String::as_str).collect();
        let x: Vec<&str> = x.iter().map(String::as_str).collect();
        Schema::new(vec![
            Variable::new(Alphabet::new("D", &d, false).unwrap(), Role::D),
            Variable::new(Alphabet::new("X", &x, true).unwrap(), Role::X),
            Variable::new(Alphabet::new("Y", &["0", "1"], false).unwrap(), Role::Y),
        ])
        .unwrap()
    }

    fn free_metric() -> DistortionMetric {
        DistortionMetric::rule_table(vec![], 1.0)
    }

    #[test]
    fn counts_variables() {
        let s = schema(2, 2);
        let pmf = JointPmf::from_weights(s, vec![1.0; 8]).unwrap();
        let p = assemble(
            &pmf,
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
            &free_metric(),
            &DistortionBudget::expected(1.0),
            Objective::Kl,
        )
        .unwrap();
        assert_eq!(p.n_variables(), 32);
        assert_eq!(p.n_free_variables(), 32);
        assert_eq!(p.n_constraints(), 8 + 8);
    }

    #[test]
    fn identity_objective_is_zero() {
        let s = schema(2, 3);
        let pmf = JointPmf::from_weights(s.clone(), (0..12).map(|i| (i * 7 % 5) as f64 + 0.5).collect()).unwrap();
        for obj in [Objective::Kl, Objective::L1] {
            let p = assemble(
                &pmf,
                &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
                &free_metric(),
                &DistortionBudget::expected(1.0),
                obj,
            )
            .unwrap();
            assert_eq!(p.objective_value(&TransformKernel::identity(&s)), 0.0);
        }
    }

    #[test]
    fn random_replacement_is_perfect() {
        // k(.|d,x,y) = p_XY: same output distribution, no group dependence
        let s = schema(2, 2);
        let pmf = JointPmf::from_weights(s.clone(), vec![3.0, 1.0, 2.0, 2.0, 1.0, 3.0, 0.5, 1.5]).unwrap();
        let pxy = pmf.p_xy();
        let probs: Vec<f64> = (0..s.n_cells()).flat_map(|_| pxy.clone()).collect();
        let k = TransformKernel::from_probs(&s, probs, Default::default()).unwrap();
        let p = assemble(
            &pmf,
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.0),
            &free_metric(),
            &DistortionBudget::expected(1.0),
            Objective::Kl,
        )
        .unwrap();
        assert!(p.objective_value(&k).abs() < 1e-15);
        let probs = k.probs();
        for c in &p.discrimination.constraints {
            assert!(c.violation(probs) < 1e-12);
        }
    }

    #[test]
    fn forbidden_and_zero_budget_entries_are_fixed() {
        let s = schema(1, 3);
        let pmf = JointPmf::from_weights(s.clone(), vec![1.0; 6]).unwrap();
        let metric = DistortionMetric::per_attribute(
            Combiner::Sum,
            vec![
                crate::constraints::AttributePenalty {
                    variable: "X".into(),
                    rule: crate::constraints::AttributeRule::Ordinal { steps: vec![0.0, 1.0, FORBIDDEN], up: None },
                },
                crate::constraints::AttributePenalty {
                    variable: "Y".into(),
                    rule: crate::constraints::AttributeRule::Ordinal { steps: vec![0.0, 1.0], up: None },
                },
            ],
        );
        let p = assemble(
            &pmf,
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 1.0),
            &metric,
            &DistortionBudget::expected(0.5),
            Objective::L1,
        )
        .unwrap();
        let nxy = s.n_xy();
        // from x0: outputs x2 (y either) are two steps away
        let c = s.cell(0, 0, 0);
        assert!(p.is_fixed_zero(c * nxy + s.xy(2, 0)));
        assert!(p.is_fixed_zero(c * nxy + s.xy(2, 1)));
        assert!(!p.is_fixed_zero(c * nxy + s.xy(1, 1)));
        assert_eq!(p.n_free_variables(), 6 * 6 - 4 * 2);
        let zero = assemble(
            &pmf,
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 1.0),
            &metric,
            &DistortionBudget::expected(0.0),
            Objective::L1,
        )
        .unwrap();
        assert_eq!(zero.n_free_variables(), 6);
    }

    #[test]
    fn program_shapes() {
        let s = schema(2, 2);
        let pmf = JointPmf::from_weights(s, vec![1.0; 8]).unwrap();
        let p = assemble(
            &pmf,
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
            &free_metric(),
            &DistortionBudget::expected(1.0),
            Objective::L1,
        )
        .unwrap();
        let param = Parametrization::direct(&p);
        let prog = build_program(&p, &param, &Phase::Optimize { penalty: 1e3 }, 1e-9);
        assert_eq!(prog.blocks.len(), 9);
        // 8 discrimination rows and 4 link rows are global
        assert_eq!(prog.global_rhs.len(), 12);
        assert_eq!(prog.blocks[0].n_local(), 2);
    }
}

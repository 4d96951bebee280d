use std::fmt;

use crate::domain::Schema;

/// Index of kernel entry `k(out | cell)` in the flat kernel vector
/// (`cell` in the (d, x, y) layout, `out` in the (x, y) layout).
pub fn kernel_var(schema: &Schema, cell: usize, out: usize) -> usize {
    cell * schema.n_xy() + out
}

/// Origin of an emitted constraint, kept for reporting and for the assembler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintLabel {
    /// `p(y|d)` against the target; `upper` selects the `(1 + eps)` side.
    Target { y: usize, d: usize, upper: bool },
    /// `p(y|d1) <= f * p(y|d2)`.
    Pairwise { y: usize, d1: usize, d2: usize },
    /// `p(y|d,b)` against the segment target.
    Conditional { y: usize, d: usize, b: usize, upper: bool },
    /// Expected distortion of an input cell.
    Expected { cell: usize },
    /// Probability of exceeding the `level`-th distortion threshold.
    Threshold { cell: usize, level: usize },
}

impl ConstraintLabel {
    pub fn is_discrimination(&self) -> bool {
        matches!(
            self,
            ConstraintLabel::Target { .. }
                | ConstraintLabel::Pairwise { .. }
                | ConstraintLabel::Conditional { .. }
        )
    }
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintLabel::Target { y, d, upper } => {
                write!(f, "target[y={y},d={d},{}]", if *upper { "upper" } else { "lower" })
            }
            ConstraintLabel::Pairwise { y, d1, d2 } => write!(f, "pairwise[y={y},d1={d1},d2={d2}]"),
            ConstraintLabel::Conditional { y, d, b, upper } => write!(
                f,
                "conditional[y={y},d={d},b={b},{}]",
                if *upper { "upper" } else { "lower" }
            ),
            ConstraintLabel::Expected { cell } => write!(f, "distortion[cell={cell}]"),
            ConstraintLabel::Threshold { cell, level } => {
                write!(f, "exceedance[cell={cell},level={level}]")
            }
        }
    }
}

/// `sum_i coef_i * k[var_i] <= rhs` over the flat kernel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub label: ConstraintLabel,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    /// Builds a constraint, merging duplicate variables and dropping zero coefficients.
    pub fn new(label: ConstraintLabel, mut terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinearConstraint { label, terms: merged, rhs }
    }

    pub fn lhs(&self, kernel: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * kernel[v]).sum()
    }

    /// Amount by which the constraint is violated (0 when satisfied).
    pub fn violation(&self, kernel: &[f64]) -> f64 {
        (self.lhs(kernel) - self.rhs).max(0.0)
    }
}

/// Constraints plus the warnings raised while building them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearConstraintSet {
    pub constraints: Vec<LinearConstraint>,
    pub warnings: Vec<String>,
}

impl LinearConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn extend(&mut self, other: LinearConstraintSet) {
        self.constraints.extend(other.constraints);
        self.warnings.extend(other.warnings);
    }

    /// Largest violation over all constraints and its index.
    pub fn max_violation(&self, kernel: &[f64]) -> (f64, Option<usize>) {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (c.violation(kernel), Some(i)))
            .fold((0.0, None), |acc, v| if v.0 > acc.0 { v } else { acc })
    }

    pub(crate) fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

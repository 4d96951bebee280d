use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::linear::{kernel_var, ConstraintLabel, LinearConstraint, LinearConstraintSet};
use crate::domain::{JointPmf, Schema, Variable};
use crate::error::{Error, Result};

/// Penalty level for mappings that must never happen.
pub const FORBIDDEN: f64 = 1e4;

/// Penalty for changing a single attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeRule {
    /// `penalties[from][to]`, indexed by category.
    Table { penalties: Vec<Vec<f64>> },
    /// Penalty by category distance; distances past the end reuse the last step.
    /// `up` overrides the steps for increases when given.
    Ordinal {
        steps: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        up: Option<Vec<f64>>,
    },
}

impl AttributeRule {
    fn penalty(&self, from: usize, to: usize) -> f64 {
        match self {
            AttributeRule::Table { penalties } => penalties[from][to],
            AttributeRule::Ordinal { steps, up } => {
                let steps = match up {
                    Some(u) if to > from => u,
                    _ => steps,
                };
                let dist = from.abs_diff(to);
                steps.get(dist).or(steps.last()).copied().unwrap_or(0.0)
            }
        }
    }

    fn validate(&self, var: &Variable) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(format!("rule for `{}`: {msg}", var.name())));
        match self {
            AttributeRule::Table { penalties } => {
                if penalties.len() != var.card() || penalties.iter().any(|r| r.len() != var.card()) {
                    return bad(format!("table must be {0}x{0}", var.card()));
                }
                if (0..var.card()).any(|i| penalties[i][i] != 0.0) {
                    return bad("diagonal must be zero".into());
                }
            }
            AttributeRule::Ordinal { steps, up } => {
                if steps.is_empty() || up.as_ref().is_some_and(Vec::is_empty) {
                    return bad("steps must not be empty".into());
                }
                if steps[0] != 0.0 || up.as_ref().is_some_and(|u| u[0] != 0.0) {
                    return bad("zero-distance step must be zero".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePenalty {
    pub variable: String,
    pub rule: AttributeRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    SumOfSquares,
    Sum,
    RuleTable,
}

/// Predicate on how one variable changes between input and output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum Condition {
    /// Signed category change `to - from` lies in `[min, max]`.
    Delta {
        variable: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
    /// Absolute category change lies in `[min, max]`.
    AbsDelta {
        variable: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
    },
    /// Input category is one of `categories`.
    From { variable: String, categories: Vec<String> },
    /// Output category is one of `categories`.
    To { variable: String, categories: Vec<String> },
}

impl Condition {
    fn variable(&self) -> &str {
        match self {
            Condition::Delta { variable, .. }
            | Condition::AbsDelta { variable, .. }
            | Condition::From { variable, .. }
            | Condition::To { variable, .. } => variable,
        }
    }

    fn holds(&self, var: &Variable, from: usize, to: usize) -> bool {
        let within = |v: i64, min: &Option<i64>, max: &Option<i64>| {
            min.is_none_or(|m| v >= m) && max.is_none_or(|m| v <= m)
        };
        match self {
            Condition::Delta { min, max, .. } => within(to as i64 - from as i64, min, max),
            Condition::AbsDelta { min, max, .. } => within(from.abs_diff(to) as i64, min, max),
            Condition::From { categories, .. } => {
                categories.iter().any(|c| *c == var.alphabet.categories[from])
            }
            Condition::To { categories, .. } => categories.iter().any(|c| *c == var.alphabet.categories[to]),
        }
    }
}

/// All conditions must hold for the rule to fire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub when: Vec<Condition>,
    pub value: f64,
}

/// Cost of mapping an (x, y) pair to another.
///
/// With a per-attribute combiner, variables without a listed rule may not change
/// (any change costs [`FORBIDDEN`]). With `RuleTable`, the first matching rule
/// gives the value and unmatched pairs cost `default_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionMetric {
    pub combiner: Combiner,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<AttributePenalty>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub default_value: f64,
}

/// Variables that the metric inspects: all X variables then Y.
fn xy_vars(schema: &Schema) -> Vec<&Variable> {
    schema.x_vars().iter().chain(std::iter::once(schema.y_var())).collect()
}

impl DistortionMetric {
    pub fn per_attribute(combiner: Combiner, attributes: Vec<AttributePenalty>) -> Self {
        DistortionMetric { combiner, attributes, rules: Vec::new(), default_value: 0.0 }
    }

    pub fn rule_table(rules: Vec<Rule>, default_value: f64) -> Self {
        DistortionMetric { combiner: Combiner::RuleTable, attributes: Vec::new(), rules, default_value }
    }

    /// Cost of mapping `(x, y)` to `(x_hat, y_hat)`, composite indices.
    pub fn evaluate(&self, schema: &Schema, from: (usize, usize), to: (usize, usize)) -> f64 {
        let mut from_digits = schema.x_digits(from.0);
        from_digits.push(from.1);
        let mut to_digits = schema.x_digits(to.0);
        to_digits.push(to.1);
        let vars = xy_vars(schema);
        let pos = |name: &str| vars.iter().position(|v| v.name() == name);
        match self.combiner {
            Combiner::RuleTable => {
                for rule in &self.rules {
                    let fires = rule.when.iter().all(|c| match pos(c.variable()) {
                        Some(i) => c.holds(vars[i], from_digits[i], to_digits[i]),
                        None => false,
                    });
                    if fires {
                        return rule.value;
                    }
                }
                if from_digits == to_digits {
                    0.0
                } else {
                    self.default_value
                }
            }
            Combiner::Sum | Combiner::SumOfSquares => {
                let mut total = 0.0;
                for (i, v) in vars.iter().enumerate() {
                    let (a, b) = (from_digits[i], to_digits[i]);
                    if a == b {
                        continue;
                    }
                    let p = self
                        .attributes
                        .iter()
                        .find(|r| r.variable == v.name())
                        .map_or(FORBIDDEN, |r| r.rule.penalty(a, b));
                    total += if self.combiner == Combiner::Sum { p } else { p * p };
                }
                total
            }
        }
    }

    /// Checks names against the schema, then tabulates the metric and enforces
    /// nonnegativity and zero cost on the identity.
    pub fn compile(&self, schema: &Schema) -> Result<CompiledMetric> {
        let vars = xy_vars(schema);
        let find = |name: &str| {
            vars.iter().copied().find(|v| v.name() == name).ok_or_else(|| Error::UnknownVariable(name.into()))
        };
        for a in &self.attributes {
            a.rule.validate(find(&a.variable)?)?;
        }
        for rule in &self.rules {
            for c in &rule.when {
                let var = find(c.variable())?;
                if let Condition::From { categories, .. } | Condition::To { categories, .. } = c {
                    if let Some(bad) = categories.iter().find(|c| var.alphabet.index_of(c).is_none()) {
                        return Err(Error::InvalidParams(format!(
                            "category `{bad}` not in `{}`",
                            var.name()
                        )));
                    }
                }
            }
        }
        let n = schema.n_xy();
        let mut table = vec![0.0; n * n];
        for from in 0..n {
            for to in 0..n {
                let v = self.evaluate(schema, schema.split_xy(from), schema.split_xy(to));
                if !(v >= 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "distortion {v} from {from} to {to} is negative or undefined"
                    )));
                }
                if from == to && v != 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "distortion of identity mapping at {from} is {v}, must be 0"
                    )));
                }
                table[from * n + to] = v;
            }
        }
        Ok(CompiledMetric { n, table })
    }
}

/// Dense `(x, y) -> (x_hat, y_hat)` cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledMetric {
    n: usize,
    table: Vec<f64>,
}

impl CompiledMetric {
    /// Costs indexed by `schema.xy` on both sides.
    pub fn get(&self, from_xy: usize, to_xy: usize) -> f64 {
        self.table[from_xy * self.n + to_xy]
    }

    pub fn row(&self, from_xy: usize) -> &[f64] {
        &self.table[from_xy * self.n..(from_xy + 1) * self.n]
    }

    pub fn n_xy(&self) -> usize {
        self.n
    }
}

/// One threshold with the probability allowed above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub threshold: f64,
    pub budget: f64,
}

/// Per-cell budgets on the distortion of the mapping. Cells are full (d, x, y)
/// indices; a cell without an override uses the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DistortionBudget {
    /// Bound on the expected distortion.
    Expected {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<f64>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "cell_keys")]
        per_cell: BTreeMap<usize, f64>,
    },
    /// Bounds on the probability of exceeding each threshold.
    Thresholded {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Vec<Level>>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "cell_keys")]
        per_cell: BTreeMap<usize, Vec<Level>>,
    },
}

/// Cell-indexed maps with string keys, as text formats require.
mod cell_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, V: Serialize>(map: &BTreeMap<usize, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(d: D) -> Result<BTreeMap<usize, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("cell key `{k}` is not an index"))))
            .collect()
    }
}

impl DistortionBudget {
    pub fn expected(c: f64) -> Self {
        DistortionBudget::Expected { default: Some(c), per_cell: BTreeMap::new() }
    }

    pub fn thresholded(levels: Vec<Level>) -> Self {
        DistortionBudget::Thresholded { default: Some(levels), per_cell: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            DistortionBudget::Expected { default, per_cell } => {
                if !default.iter().chain(per_cell.values()).all(|&c| ok(c)) {
                    return Err(Error::InvalidParams("budgets must be finite and nonnegative".into()));
                }
            }
            DistortionBudget::Thresholded { default, per_cell } => {
                for levels in default.iter().chain(per_cell.values()) {
                    validate_levels(levels)?;
                }
            }
        }
        Ok(())
    }

    /// Expected-distortion budget of a cell, if this is an expected budget.
    pub fn expected_for(&self, cell: usize) -> Option<f64> {
        match self {
            DistortionBudget::Expected { default, per_cell } => per_cell.get(&cell).copied().or(*default),
            DistortionBudget::Thresholded { .. } => None,
        }
    }

    pub fn levels_for(&self, cell: usize) -> Option<&[Level]> {
        match self {
            DistortionBudget::Thresholded { default, per_cell } => {
                per_cell.get(&cell).or(default.as_ref()).map(Vec::as_slice)
            }
            DistortionBudget::Expected { .. } => None,
        }
    }
}

fn validate_levels(levels: &[Level]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParams("threshold list is empty".into()));
    }
    for l in levels {
        if !(l.threshold.is_finite() && l.budget.is_finite() && l.budget >= 0.0) {
            return Err(Error::InvalidParams("thresholds and budgets must be finite, budgets >= 0".into()));
        }
    }
    for w in levels.windows(2) {
        if w[1].threshold <= w[0].threshold {
            return Err(Error::InvalidParams("thresholds must be strictly increasing".into()));
        }
        if w[1].budget > w[0].budget {
            return Err(Error::InvalidParams("budgets must not increase with the threshold".into()));
        }
    }
    Ok(())
}

/// Emits one distortion constraint per positive-mass cell (expected mode) or one
/// per cell and threshold (thresholded mode).
pub fn build_distortion_constraints(
    metric: &CompiledMetric,
    budget: &DistortionBudget,
    pmf: &JointPmf,
) -> Result<LinearConstraintSet> {
    budget.validate()?;
    let schema = pmf.schema();
    if metric.n_xy() != schema.n_xy() {
        return Err(Error::SchemaMismatch(format!(
            "metric covers {} output cells, schema has {}",
            metric.n_xy(),
            schema.n_xy()
        )));
    }
    let mut set = LinearConstraintSet::default();
    for cell in pmf.support() {
        let from = cell % schema.n_xy();
        let row = metric.row(from);
        let missing = || Error::MissingBudget(schema.cell_label(cell));
        match budget {
            DistortionBudget::Expected { .. } => {
                let c = budget.expected_for(cell).ok_or_else(missing)?;
                let terms = row.iter().enumerate().map(|(o, &w)| (kernel_var(schema, cell, o), w)).collect();
                set.constraints.push(LinearConstraint::new(ConstraintLabel::Expected { cell }, terms, c));
            }
            DistortionBudget::Thresholded { .. } => {
                let levels = budget.levels_for(cell).ok_or_else(missing)?;
                for (level, l) in levels.iter().enumerate() {
                    let terms = row
                        .iter()
                        .enumerate()
                        .filter(|(_, &w)| w > l.threshold)
                        .map(|(o, _)| (kernel_var(schema, cell, o), 1.0))
                        .collect();
                    set.constraints.push(LinearConstraint::new(
                        ConstraintLabel::Threshold { cell, level },
                        terms,
                        l.budget,
                    ));
                }
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Alphabet, Role};
    use proptest::prelude::*;

    fn compas_like() -> (Schema, DistortionMetric) {
        let s = Schema::new(vec![
            Variable::new(Alphabet::new("race", &["a", "b"], false).unwrap(), Role::D),
            Variable::new(Alphabet::new("age", &["<25", "25-45", ">45"], true).unwrap(), Role::X),
            Variable::new(Alphabet::new("degree", &["F", "M"], false).unwrap(), Role::X),
            Variable::new(Alphabet::new("recid", &["0", "1"], false).unwrap(), Role::Y),
        ])
        .unwrap();
        let m = DistortionMetric::per_attribute(
            Combiner::SumOfSquares,
            vec![
                AttributePenalty {
                    variable: "age".into(),
                    rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, FORBIDDEN], up: None },
                },
                AttributePenalty {
                    variable: "degree".into(),
                    rule: AttributeRule::Ordinal { steps: vec![0.0, 2.0], up: None },
                },
                AttributePenalty {
                    variable: "recid".into(),
                    rule: AttributeRule::Table { penalties: vec![vec![0.0, FORBIDDEN], vec![2.0, 0.0]] },
                },
            ],
        );
        (s, m)
    }

    #[test]
    fn per_attribute_examples() {
        let (s, m) = compas_like();
        let x = |age, deg| s.x_from_digits(&[age, deg]);
        assert_eq!(m.evaluate(&s, (x(1, 0), 1), (x(1, 0), 1)), 0.0);
        assert!(m.evaluate(&s, (x(1, 0), 0), (x(1, 0), 1)) >= FORBIDDEN);
        assert_eq!(m.evaluate(&s, (x(0, 0), 1), (x(1, 0), 0)), 5.0);
        assert!(m.evaluate(&s, (x(0, 0), 1), (x(2, 0), 1)) >= FORBIDDEN);
        assert_eq!(m.evaluate(&s, (x(0, 0), 1), (x(0, 1), 1)), 4.0);
        let sum = DistortionMetric { combiner: Combiner::Sum, ..m.clone() };
        assert_eq!(sum.evaluate(&s, (x(0, 0), 1), (x(1, 1), 0)), 5.0);
        m.compile(&s).unwrap();
    }

    #[test]
    fn unlisted_attribute_is_forbidden() {
        let (s, mut m) = compas_like();
        m.attributes.retain(|a| a.variable != "degree");
        let x = |age, deg| s.x_from_digits(&[age, deg]);
        assert_eq!(m.evaluate(&s, (x(0, 0), 0), (x(0, 1), 0)), FORBIDDEN * FORBIDDEN);
    }

    #[test]
    fn identity_cost_must_be_zero() {
        let (s, _) = compas_like();
        let m = DistortionMetric::per_attribute(
            Combiner::Sum,
            vec![AttributePenalty {
                variable: "age".into(),
                rule: AttributeRule::Table { penalties: vec![vec![1.0; 3]; 3] },
            }],
        );
        assert!(m.compile(&s).is_err());
        let m = DistortionMetric::rule_table(
            vec![Rule { when: vec![Condition::AbsDelta { variable: "age".into(), min: None, max: Some(0) }], value: 1.0 }],
            0.0,
        );
        assert!(m.compile(&s).is_err());
        let m = DistortionMetric::rule_table(vec![], -1.0);
        assert!(m.compile(&s).is_err());
    }

    #[test]
    fn unknown_names_rejected() {
        let (s, _) = compas_like();
        let m = DistortionMetric::rule_table(
            vec![Rule { when: vec![Condition::Delta { variable: "nope".into(), min: None, max: None }], value: 1.0 }],
            0.0,
        );
        assert!(matches!(m.compile(&s), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn zero_budget_forces_identity() {
        let (s, m) = compas_like();
        let cm = m.compile(&s).unwrap();
        let pmf = JointPmf::from_weights(s.clone(), vec![1.0; s.n_cells()]).unwrap();
        let set = build_distortion_constraints(&cm, &DistortionBudget::expected(0.0), &pmf).unwrap();
        assert_eq!(set.len(), s.n_cells());
        // every off-identity entry has a positive coefficient in a `<= 0` row
        for c in &set.constraints {
            let ConstraintLabel::Expected { cell } = c.label else { panic!() };
            assert_eq!(c.rhs, 0.0);
            assert_eq!(c.terms.len(), s.n_xy() - 1);
            assert!(c.terms.iter().all(|&(v, w)| w > 0.0 && v != kernel_var(&s, cell, cell % s.n_xy())));
        }
    }

    #[test]
    fn thresholded_counts_and_missing_budget() {
        let (s, m) = compas_like();
        let cm = m.compile(&s).unwrap();
        let mut mass = vec![1.0; s.n_cells()];
        mass[0] = 0.0;
        let pmf = JointPmf::from_weights(s.clone(), mass).unwrap();
        let levels = vec![
            Level { threshold: 0.9, budget: 0.1 },
            Level { threshold: 1.9, budget: 0.05 },
            Level { threshold: 2.9, budget: 0.0 },
        ];
        let set = build_distortion_constraints(&cm, &DistortionBudget::thresholded(levels), &pmf).unwrap();
        assert_eq!(set.len(), 3 * (s.n_cells() - 1));
        let sparse = DistortionBudget::Expected { default: None, per_cell: [(1, 0.5)].into() };
        assert!(matches!(
            build_distortion_constraints(&cm, &sparse, &pmf),
            Err(Error::MissingBudget(_))
        ));
    }

    #[test]
    fn level_validation() {
        let bad = [
            vec![Level { threshold: 1.0, budget: 0.1 }, Level { threshold: 1.0, budget: 0.0 }],
            vec![Level { threshold: 1.0, budget: 0.1 }, Level { threshold: 2.0, budget: 0.2 }],
            vec![Level { threshold: 1.0, budget: -0.1 }],
        ];
        for levels in bad {
            assert!(DistortionBudget::thresholded(levels).validate().is_err());
        }
        assert!(DistortionBudget::expected(-1.0).validate().is_err());
    }

    #[test]
    fn single_threshold_on_binary_metric_is_probability_bound() {
        let (s, _) = compas_like();
        let m = DistortionMetric::rule_table(
            vec![Rule { when: vec![Condition::AbsDelta { variable: "age".into(), min: Some(1), max: None }], value: 1.0 }],
            0.0,
        );
        let cm = m.compile(&s).unwrap();
        let pmf = JointPmf::from_weights(s.clone(), vec![1.0; s.n_cells()]).unwrap();
        let t = build_distortion_constraints(
            &cm,
            &DistortionBudget::thresholded(vec![Level { threshold: 0.5, budget: 0.2 }]),
            &pmf,
        )
        .unwrap();
        let e = build_distortion_constraints(&cm, &DistortionBudget::expected(0.2), &pmf).unwrap();
        for (a, b) in t.constraints.iter().zip(&e.constraints) {
            assert_eq!(a.terms, b.terms);
            assert_eq!(a.rhs, b.rhs);
        }
    }

    proptest! {
        #[test]
        fn distortion_constraints_are_affine(
            k1 in prop::collection::vec(0.01f64..1.0, 24 * 12),
            k2 in prop::collection::vec(0.01f64..1.0, 24 * 12),
            thresholded in any::<bool>(),
        ) {
            let (s, m) = compas_like();
            let cm = m.compile(&s).unwrap();
            let pmf = JointPmf::from_weights(s.clone(), vec![1.0; s.n_cells()]).unwrap();
            let budget = if thresholded {
                DistortionBudget::thresholded(vec![Level { threshold: 1.5, budget: 0.1 }])
            } else {
                DistortionBudget::expected(0.5)
            };
            let set = build_distortion_constraints(&cm, &budget, &pmf).unwrap();
            let mid: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
            for c in &set.constraints {
                let scale = 1.0 + c.lhs(&k1).abs().max(c.lhs(&k2).abs());
                prop_assert!((c.lhs(&mid) - 0.5 * (c.lhs(&k1) + c.lhs(&k2))).abs() <= 1e-12 * scale);
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::linear::{kernel_var, ConstraintLabel, LinearConstraint, LinearConstraintSet};
use crate::domain::JointPmf;
use crate::error::{Error, Result};

/// Minimum number of samples a (d, b) segment needs before it is constrained.
pub const DEFAULT_MIN_SEGMENT_COUNT: usize = 20;

/// `|p / q - 1|`.
pub fn ratio_distance(p: f64, q: f64) -> Result<f64> {
    if q <= 0.0 {
        return Err(Error::ZeroReference(format!("ratio of {p} to {q}")));
    }
    Ok((p / q - 1.0).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationMode {
    /// Each group's outcome rate stays close to a target rate.
    TargetDistance,
    /// Every pair of groups has similar outcome rates.
    PairwiseDistance,
    /// Target distance within segments defined by a subset of X variables.
    ConditionalTargetDistance,
}

/// Override of the tolerance for one index. `d2` applies to pairwise mode and
/// `b` (composite segment index) to conditional mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEntry {
    pub y: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    pub value: f64,
}

/// Discrimination tolerance: a broadcast default plus per-index overrides.
/// Deserializes from a bare number as well as from the full form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "EpsilonRepr")]
pub struct Epsilon {
    pub default: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<EpsilonEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EpsilonRepr {
    Scalar(f64),
    Full {
        default: f64,
        #[serde(default)]
        overrides: Vec<EpsilonEntry>,
    },
}

impl From<EpsilonRepr> for Epsilon {
    fn from(r: EpsilonRepr) -> Self {
        match r {
            EpsilonRepr::Scalar(default) => Epsilon::scalar(default),
            EpsilonRepr::Full { default, overrides } => Epsilon { default, overrides },
        }
    }
}

impl Epsilon {
    pub fn scalar(eps: f64) -> Self {
        Epsilon { default: eps, overrides: Vec::new() }
    }

    pub fn get(&self, y: usize, d: usize, d2: Option<usize>, b: Option<usize>) -> f64 {
        self.overrides
            .iter()
            .find(|e| e.y == y && e.d == d && e.d2 == d2 && e.b == b)
            .map_or(self.default, |e| e.value)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.default) || !self.overrides.iter().all(|e| ok(e.value)) {
            return Err(Error::InvalidParams("epsilon must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationSpec {
    pub mode: DiscriminationMode,
    /// Explicit outcome target; the data's outcome marginal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 2]>,
    pub epsilon: Epsilon,
    /// X variable names defining segments (conditional mode only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditioning: Vec<String>,
    #[serde(default = "default_min_segment_count")]
    pub min_segment_count: usize,
}

fn default_min_segment_count() -> usize {
    DEFAULT_MIN_SEGMENT_COUNT
}

impl DiscriminationSpec {
    pub fn new(mode: DiscriminationMode, epsilon: f64) -> Self {
        DiscriminationSpec {
            mode,
            target: None,
            epsilon: Epsilon::scalar(epsilon),
            conditioning: Vec::new(),
            min_segment_count: DEFAULT_MIN_SEGMENT_COUNT,
        }
    }

    pub fn with_target(mut self, target: [f64; 2]) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_conditioning<S: Into<String>>(mut self, vars: impl IntoIterator<Item = S>) -> Self {
        self.conditioning = vars.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self, pmf: &JointPmf) -> Result<()> {
        self.epsilon.validate()?;
        if let Some(t) = self.target {
            if t.iter().any(|v| !v.is_finite() || *v < 0.0) || (t[0] + t[1] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPmf(format!("target {t:?} is not a pmf")));
            }
        }
        let schema = pmf.schema();
        for name in &self.conditioning {
            if !schema.x_vars().iter().any(|v| v.name() == name) {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        if !self.conditioning.is_empty() && self.mode != DiscriminationMode::ConditionalTargetDistance {
            return Err(Error::InvalidParams(
                "conditioning variables apply to conditional mode only".into(),
            ));
        }
        Ok(())
    }
}

/// Maps each composite X index to its segment index over the named X variables.
pub fn segment_map(pmf: &JointPmf, conditioning: &[String]) -> Result<(Vec<usize>, usize)> {
    let schema = pmf.schema();
    let mut positions = Vec::new();
    for name in conditioning {
        let pos = schema
            .x_vars()
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        positions.push(pos);
    }
    let n_segments = positions.iter().map(|&p| schema.x_vars()[p].card()).product();
    let map = (0..schema.x_card())
        .map(|x| {
            let digits = schema.x_digits(x);
            positions
                .iter()
                .fold(0, |acc, &p| acc * schema.x_vars()[p].card() + digits[p])
        })
        .collect();
    Ok((map, n_segments))
}

/// Linear form of `p(Yhat = y | d, segment)` over kernel variables, where the
/// segment is the set of x with `in_segment(x)`. `None` when the segment is empty.
fn outcome_rate_terms(
    pmf: &JointPmf,
    d: usize,
    y: usize,
    in_segment: &dyn Fn(usize) -> bool,
) -> Option<Vec<(usize, f64)>> {
    let schema = pmf.schema();
    let total: f64 = (0..schema.x_card())
        .filter(|&x| in_segment(x))
        .map(|x| pmf.at(d, x, 0) + pmf.at(d, x, 1))
        .sum();
    if total <= 0.0 {
        return None;
    }
    let mut terms = Vec::new();
    for x in (0..schema.x_card()).filter(|&x| in_segment(x)) {
        for y_in in 0..2 {
            let w = pmf.at(d, x, y_in) / total;
            if w <= 0.0 {
                continue;
            }
            let cell = schema.cell(d, x, y_in);
            for x_hat in 0..schema.x_card() {
                terms.push((kernel_var(schema, cell, schema.xy(x_hat, y)), w));
            }
        }
    }
    Some(terms)
}

fn negate(terms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    terms.iter().map(|&(v, c)| (v, -c)).collect()
}

fn two_sided(
    set: &mut LinearConstraintSet,
    terms: &[(usize, f64)],
    target: f64,
    eps: f64,
    label: impl Fn(bool) -> ConstraintLabel,
) {
    set.constraints.push(LinearConstraint::new(label(true), terms.to_vec(), (1.0 + eps) * target));
    set.constraints.push(LinearConstraint::new(label(false), negate(terms), -(1.0 - eps) * target));
}

/// Emits the discrimination constraints as linear inequalities over the kernel.
pub fn build_discrimination_constraints(
    spec: &DiscriminationSpec,
    pmf: &JointPmf,
) -> Result<LinearConstraintSet> {
    spec.validate(pmf)?;
    let schema = pmf.schema();
    let mut set = LinearConstraintSet::default();
    let all = |_: usize| true;
    match spec.mode {
        DiscriminationMode::TargetDistance => {
            let target = spec.target.unwrap_or_else(|| pmf.p_y());
            for (y, t) in target.iter().enumerate() {
                if *t <= 0.0 {
                    return Err(Error::ZeroReference(format!("target rate of outcome {y}")));
                }
            }
            for d in 0..schema.d_card() {
                for y in 0..2 {
                    let Some(terms) = outcome_rate_terms(pmf, d, y, &all) else {
                        set.warn(format!("group {} has no mass; skipped", schema.d_label(d)));
                        break;
                    };
                    let eps = spec.epsilon.get(y, d, None, None);
                    two_sided(&mut set, &terms, target[y], eps, |upper| ConstraintLabel::Target {
                        y,
                        d,
                        upper,
                    });
                }
            }
        }
        DiscriminationMode::PairwiseDistance => {
            let present: Vec<usize> = (0..schema.d_card())
                .filter(|&d| {
                    let keep = pmf.y_given_d(d).is_some();
                    if !keep {
                        set.warn(format!("group {} has no mass; skipped", schema.d_label(d)));
                    }
                    keep
                })
                .collect();
            for (i, &d1) in present.iter().enumerate() {
                for &d2 in &present[i + 1..] {
                    for y in 0..2 {
                        let a = outcome_rate_terms(pmf, d1, y, &all).expect("group has mass");
                        let b = outcome_rate_terms(pmf, d2, y, &all).expect("group has mass");
                        let e12 = spec.epsilon.get(y, d1, Some(d2), None);
                        let e21 = spec.epsilon.get(y, d2, Some(d1), None);
                        // |a/b - 1| <= e12 and |b/a - 1| <= e21 reduce to one upper
                        // bound per direction.
                        let f12 = pairwise_factor(e12, e21);
                        let f21 = pairwise_factor(e21, e12);
                        let mut ab = a.clone();
                        ab.extend(b.iter().map(|&(v, c)| (v, -f12 * c)));
                        set.constraints.push(LinearConstraint::new(
                            ConstraintLabel::Pairwise { y, d1, d2 },
                            ab,
                            0.0,
                        ));
                        let mut ba = b;
                        ba.extend(a.iter().map(|&(v, c)| (v, -f21 * c)));
                        set.constraints.push(LinearConstraint::new(
                            ConstraintLabel::Pairwise { y, d1: d2, d2: d1 },
                            ba,
                            0.0,
                        ));
                    }
                }
            }
        }
        DiscriminationMode::ConditionalTargetDistance => {
            let (seg, n_seg) = segment_map(pmf, &spec.conditioning)?;
            let n = pmf.sample_count();
            for b in 0..n_seg {
                let in_b = |x: usize| seg[x] == b;
                let mut seg_y = [0.0; 2];
                for x in (0..schema.x_card()).filter(|&x| in_b(x)) {
                    for d in 0..schema.d_card() {
                        seg_y[0] += pmf.at(d, x, 0);
                        seg_y[1] += pmf.at(d, x, 1);
                    }
                }
                let seg_mass = seg_y[0] + seg_y[1];
                if seg_mass <= 0.0 {
                    set.warn(format!("segment {b} has no mass; skipped"));
                    continue;
                }
                let target = spec.target.unwrap_or([seg_y[0] / seg_mass, seg_y[1] / seg_mass]);
                if let Some(y) = (0..2).find(|&y| target[y] <= 0.0) {
                    if spec.target.is_some() {
                        return Err(Error::ZeroReference(format!("target rate of outcome {y}")));
                    }
                    set.warn(format!("segment {b} never has outcome {y}; skipped"));
                    continue;
                }
                for d in 0..schema.d_card() {
                    let mass: f64 = (0..schema.x_card())
                        .filter(|&x| in_b(x))
                        .map(|x| pmf.at(d, x, 0) + pmf.at(d, x, 1))
                        .sum();
                    let big_enough = match n {
                        Some(n) => (mass * n as f64).round() as usize >= spec.min_segment_count,
                        None => mass > 0.0,
                    };
                    if !big_enough {
                        set.warn(format!(
                            "segment ({}, {b}) is below the minimum sample count; skipped",
                            schema.d_label(d)
                        ));
                        continue;
                    }
                    for y in 0..2 {
                        let terms = outcome_rate_terms(pmf, d, y, &in_b).expect("segment has mass");
                        let eps = spec.epsilon.get(y, d, None, Some(b));
                        two_sided(&mut set, &terms, target[y], eps, |upper| {
                            ConstraintLabel::Conditional { y, d, b, upper }
                        });
                    }
                }
            }
        }
    }
    Ok(set)
}

/// Upper factor on `a / b` implied by `|a/b - 1| <= e_ab` and `|b/a - 1| <= e_ba`.
fn pairwise_factor(e_ab: f64, e_ba: f64) -> f64 {
    if e_ba < 1.0 {
        (1.0 + e_ab).min(1.0 / (1.0 - e_ba))
    } else {
        1.0 + e_ab
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Alphabet, Role, Schema, Variable};
    use proptest::prelude::*;

    pub(crate) fn toy_schema(nd: usize, nx: usize) -> Schema {
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

    fn identity(schema: &Schema) -> Vec<f64> {
        let nxy = schema.n_xy();
        let mut k = vec![0.0; schema.n_cells() * nxy];
        for c in 0..schema.n_cells() {
            k[c * nxy + c % nxy] = 1.0;
        }
        k
    }

    #[test]
    fn ratio_distance_examples() {
        assert_eq!(ratio_distance(0.5, 0.5).unwrap(), 0.0);
        assert!((ratio_distance(0.6, 0.5).unwrap() - 0.2).abs() < 1e-15);
        // 0.593 / 0.430 - 1
        assert!((ratio_distance(0.593, 0.430).unwrap() - 0.379_069_767_441_860_5).abs() < 1e-12);
        assert!(matches!(ratio_distance(0.1, 0.0), Err(Error::ZeroReference(_))));
    }

    #[test]
    fn target_mode_counts_eight() {
        let s = toy_schema(2, 2);
        let pmf = JointPmf::from_weights(s, vec![1.0; 8]).unwrap();
        let set = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
            &pmf,
        )
        .unwrap();
        assert_eq!(set.len(), 8);
    }

    #[test]
    fn pairwise_counts_two_per_pair_and_outcome() {
        let s = toy_schema(3, 2);
        let pmf = JointPmf::from_weights(s, vec![1.0; 12]).unwrap();
        let set = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::PairwiseDistance, 0.1),
            &pmf,
        )
        .unwrap();
        assert_eq!(set.len(), 3 * 2 * 2);
    }

    #[test]
    fn identity_on_independent_pmf_is_feasible() {
        let s = toy_schema(2, 3);
        let pd = [0.3, 0.7];
        let pxy = [0.1, 0.2, 0.05, 0.25, 0.3, 0.1];
        let mass: Vec<f64> = pd.iter().flat_map(|a| pxy.iter().map(move |b| a * b)).collect();
        let pmf = JointPmf::from_weights(s.clone(), mass).unwrap();
        for mode in [DiscriminationMode::TargetDistance, DiscriminationMode::PairwiseDistance] {
            let set = build_discrimination_constraints(&DiscriminationSpec::new(mode, 0.0), &pmf)
                .unwrap();
            assert!(set.max_violation(&identity(&s)).0 < 1e-12);
        }
    }

    #[test]
    fn pairwise_identity_violated_for_disparate_rates() {
        // Recidivism rates 0.593 and 0.430 in two groups.
        let s = toy_schema(2, 1);
        let mass = vec![0.5 * 0.407, 0.5 * 0.593, 0.5 * 0.570, 0.5 * 0.430];
        let pmf = JointPmf::from_weights(s.clone(), mass).unwrap();
        let set = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::PairwiseDistance, 0.1),
            &pmf,
        )
        .unwrap();
        let (v, idx) = set.max_violation(&identity(&s));
        assert!(v > 0.0);
        assert!(set.constraints[idx.unwrap()].label.is_discrimination());
        let loose = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::PairwiseDistance, 0.41),
            &pmf,
        )
        .unwrap();
        assert!(loose.max_violation(&identity(&s)).0 < 1e-12);
    }

    #[test]
    fn zero_target_rejected() {
        let s = toy_schema(2, 1);
        let pmf = JointPmf::from_weights(s, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let err = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
            &pmf,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroReference(_)));
    }

    #[test]
    fn absent_group_is_skipped_with_warning() {
        let s = toy_schema(2, 1);
        let pmf = JointPmf::from_mass(s, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let set = build_discrimination_constraints(
            &DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
            &pmf,
        )
        .unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.warnings.len(), 1);
    }

    #[test]
    fn conditional_respects_minimum_count() {
        let s = toy_schema(2, 2);
        // segment x1 of group d1 holds 10 of 100 samples
        let counts = [20.0, 20.0, 15.0, 15.0, 10.0, 10.0, 5.0, 5.0];
        let pmf = JointPmf::from_weights(s, counts.to_vec()).unwrap().with_sample_count(100);
        let spec = DiscriminationSpec::new(DiscriminationMode::ConditionalTargetDistance, 0.1)
            .with_conditioning(["X"]);
        let set = build_discrimination_constraints(&spec, &pmf).unwrap();
        assert_eq!(set.len(), 3 * 4);
        assert_eq!(set.warnings.len(), 1);
    }

    #[test]
    fn conditioning_outside_conditional_mode_rejected() {
        let s = toy_schema(2, 2);
        let pmf = JointPmf::from_weights(s, vec![1.0; 8]).unwrap();
        let spec = DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1).with_conditioning(["X"]);
        assert!(build_discrimination_constraints(&spec, &pmf).is_err());
        let spec = DiscriminationSpec::new(DiscriminationMode::ConditionalTargetDistance, 0.1)
            .with_conditioning(["nope"]);
        assert!(build_discrimination_constraints(&spec, &pmf).is_err());
    }

    #[test]
    fn pairwise_pair_matches_both_ratio_directions() {
        for (e12, e21) in [(0.1, 0.1), (0.3, 0.05), (0.0, 0.5), (0.2, 1.5)] {
            let f12 = pairwise_factor(e12, e21);
            let f21 = pairwise_factor(e21, e12);
            for i in 1..200 {
                let a = i as f64 / 200.0;
                let b = 0.4;
                let lin = a <= f12 * b + 1e-15 && b <= f21 * a + 1e-15;
                let exact = ratio_distance(a, b).unwrap() <= e12 + 1e-12
                    && ratio_distance(b, a).unwrap() <= e21 + 1e-12;
                assert_eq!(lin, exact, "a={a} e12={e12} e21={e21}");
            }
        }
    }

    fn random_kernel(s: &Schema, raw: &[f64]) -> Vec<f64> {
        let nxy = s.n_xy();
        let mut k = raw.to_vec();
        for row in k.chunks_mut(nxy) {
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= t);
        }
        k
    }

    proptest! {
        #[test]
        fn ratio_distance_quasiconvex(a in 0.0f64..1.0, b in 0.0f64..1.0, q in 0.01f64..1.0, l in 0.0f64..=1.0) {
            let mid = ratio_distance(l * a + (1.0 - l) * b, q).unwrap();
            let hi = ratio_distance(a, q).unwrap().max(ratio_distance(b, q).unwrap());
            prop_assert!(mid <= hi + 1e-12);
        }

        #[test]
        fn constraints_are_affine(
            mass in prop::collection::vec(0.0f64..1.0, 12),
            k1 in prop::collection::vec(0.01f64..1.0, 12 * 4),
            k2 in prop::collection::vec(0.01f64..1.0, 12 * 4),
            mode in 0usize..3,
        ) {
            prop_assume!(mass.iter().sum::<f64>() > 0.1);
            let s = toy_schema(3, 2);
            let pmf = JointPmf::from_weights(s.clone(), mass).unwrap();
            let mode = [DiscriminationMode::TargetDistance, DiscriminationMode::PairwiseDistance,
                DiscriminationMode::ConditionalTargetDistance][mode];
            let mut spec = DiscriminationSpec::new(mode, 0.2);
            if mode == DiscriminationMode::ConditionalTargetDistance {
                spec = spec.with_conditioning(["X"]);
            }
            let Ok(set) = build_discrimination_constraints(&spec, &pmf) else { return Ok(()); };
            let a = random_kernel(&s, &k1);
            let b = random_kernel(&s, &k2);
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            for c in &set.constraints {
                let avg = 0.5 * (c.lhs(&a) + c.lhs(&b));
                prop_assert!((c.lhs(&m) - avg).abs() <= 1e-12);
            }
        }
    }
}

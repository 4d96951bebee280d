//! Before/after reports on discrimination, utility, distortion, group
//! inference advantage and finite-sample robustness.

mod advantage;
mod discrimination;
mod distortion;
mod robustness;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use advantage::{check_estimation_discrimination, map_advantage, AdvantageReport, EstimationVerdict};
pub use discrimination::{
    audit_discrimination, empirical_group_outcome, pushforward_group_outcome, DiscriminationReport, GroupOutcome,
    PairEntry, TargetEntry,
};
pub use distortion::{
    audit_distortion, cohort_deltas, empirical_joint, CellDistortion, CohortDelta, DistortionSummary, Exceedance,
    MIN_COHORT_COUNT,
};
pub use robustness::{
    kl_radius, lemma_ratio_bounds, lemma_ratio_bounds_for, lemma_tau_limit, robustness_bounds, robustness_from_joint,
    RobustnessBound, LINEARIZATION_FLAG,
};

use crate::domain::{Dataset, JointPmf};
use crate::error::{Error, Result};
use crate::optimizer::{ProblemSpec, TransformKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Failure probability for the robustness bounds.
    pub beta: f64,
    /// Distortion thresholds for exceedance rates.
    pub thresholds: Vec<f64>,
    pub min_cohort_count: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { beta: 0.05, thresholds: Vec::new(), min_cohort_count: MIN_COHORT_COUNT }
    }
}

/// How the transformed distribution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditSource {
    /// Exact pushforward of the original pmf through a kernel.
    Analytic,
    /// Frequencies of a transformed dataset.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub objective: String,
    /// Divergence between original and transformed (x, y) distributions.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub source: AuditSource,
    pub fingerprint: Option<String>,
    pub groups: Vec<String>,
    pub before: DiscriminationReport,
    pub after: DiscriminationReport,
    pub utility: UtilityReport,
    pub distortion: Option<DistortionSummary>,
    pub advantage_before: AdvantageReport,
    pub advantage_after: AdvantageReport,
    pub estimation: EstimationVerdict,
    pub robustness: Option<RobustnessBound>,
    pub cohorts: Vec<CohortDelta>,
}

fn rows(dy: &[[f64; 2]]) -> Vec<Vec<f64>> {
    dy.iter().map(|r| r.to_vec()).collect()
}

fn build(
    source: AuditSource,
    pmf: &JointPmf,
    after_joint: &[f64],
    spec: &ProblemSpec,
    opts: &AuditOptions,
    distortion: Option<DistortionSummary>,
    fingerprint: Option<String>,
) -> Result<AuditReport> {
    let schema = pmf.schema();
    let nxy = schema.n_xy();
    let target = spec.discrimination.target.unwrap_or_else(|| pmf.p_y());
    let eps = &spec.discrimination.epsilon;
    let before_dy = pmf.p_dy();
    let after_dy: Vec<[f64; 2]> = after_joint
        .chunks(nxy)
        .map(|c| {
            let mut dy = [0.0; 2];
            for (o, m) in c.iter().enumerate() {
                dy[o % 2] += m;
            }
            dy
        })
        .collect();
    let before = audit_discrimination(&before_dy, target, eps)?;
    let after = audit_discrimination(&after_dy, target, eps)?;
    let mut q_xy = vec![0.0; nxy];
    for c in after_joint.chunks(nxy) {
        q_xy.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let loss = spec.objective.eval(&pmf.p_xy(), &q_xy);
    let advantage_before = map_advantage(&rows(&before_dy))?;
    let advantage_after = map_advantage(&rows(&after_dy))?;
    let estimation = check_estimation_discrimination(&advantage_after, eps.default, &rows(&after_dy), &target)?;
    let robustness = match pmf.sample_count() {
        Some(n) if n > 0 && after_dy.iter().flatten().all(|v| *v > 0.0) => Some(robustness_from_joint(
            n,
            opts.beta,
            schema.n_cells(),
            &after_dy,
            eps.default,
            loss,
        )?),
        _ => None,
    };
    let cohorts = match pmf.sample_count() {
        Some(n) => cohort_deltas(pmf, after_joint, n, opts.min_cohort_count)?,
        None => Vec::new(),
    };
    Ok(AuditReport {
        source,
        fingerprint,
        groups: (0..schema.d_card()).map(|d| schema.d_label(d)).collect(),
        before,
        after,
        utility: UtilityReport { objective: spec.objective.name().into(), loss },
        distortion,
        advantage_before,
        advantage_after,
        estimation,
        robustness,
        cohorts,
    })
}

/// Audit of the exact pushforward of `pmf` through `kernel`.
pub fn audit_kernel(
    pmf: &JointPmf,
    kernel: &TransformKernel,
    spec: &ProblemSpec,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    if kernel.schema().n_cells() != pmf.schema().n_cells() {
        return Err(Error::SchemaMismatch("kernel and pmf differ in support".into()));
    }
    let joint = kernel.joint_with_groups(pmf);
    let fp = Some(kernel.provenance().fingerprint.clone()).filter(|f| !f.is_empty());
    build(AuditSource::Analytic, pmf, &joint, spec, opts, None, fp)
}

/// Audit of a transformed dataset against the original, record by record.
pub fn audit_datasets(
    original: &Dataset,
    transformed: &Dataset,
    spec: &ProblemSpec,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let metric = spec.metric.compile(original.schema())?;
    let distortion = audit_distortion(original, transformed, &metric, &opts.thresholds)?;
    let pmf = JointPmf::estimate_empirical(original)?;
    let joint = empirical_joint(transformed)?;
    build(AuditSource::Empirical, &pmf, &joint, spec, opts, Some(distortion), None)
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Positive-rate table per group before and after, followed by the other sections.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let w = self.groups.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "Outcome rate by group (target {:.3}, eps {:.3})", self.after.target[1], self.after.epsilon);
        let _ = writeln!(s, "{:<w$}  {:>8}  {:>8}", "group", "before", "after");
        for (d, g) in self.groups.iter().enumerate() {
            let _ = writeln!(s, "{g:<w$}  {:>8.3}  {:>8.3}", self.before.positive_rate[d], self.after.positive_rate[d]);
        }
        let _ = writeln!(
            s,
            "max distance to target: {:.4} -> {:.4}; max pairwise: {:.4} -> {:.4}",
            self.before.max_target_distance,
            self.after.max_target_distance,
            self.before.max_pairwise_distance,
            self.after.max_pairwise_distance
        );
        let _ = writeln!(s, "utility loss ({}): {:.6}", self.utility.objective, self.utility.loss);
        let _ = writeln!(
            s,
            "group advantage from outcome: {:.4} -> {:.4} (bound {:.4}, consistent: {})",
            self.advantage_before.advantage, self.advantage_after.advantage, self.estimation.bound, self.estimation.consistent
        );
        if let Some(d) = &self.distortion {
            let _ = writeln!(s, "distortion: mean {:.4}, max {:.4}", d.mean, d.max);
            for e in &d.exceedance {
                let _ = writeln!(s, "  P(distortion > {}) = {:.4}", e.threshold, e.rate);
            }
        }
        if let Some(r) = &self.robustness {
            let _ = writeln!(
                s,
                "robustness (n={}, beta={}): tau {:.3e}, h {:.4}, eps drift {:.4} (linearized {:.4}{}), loss drift {:.4}, rate {:.4}{}",
                r.n,
                r.beta,
                r.tau,
                r.h,
                r.epsilon_drift,
                r.epsilon_drift_linear,
                if r.linearization_flagged { ", flagged" } else { "" },
                r.mu_drift,
                r.asymptotic_rate,
                match r.valid {
                    Some(false) => "; radius outside the proven range",
                    _ => "",
                }
            );
        }
        if !self.cohorts.is_empty() {
            let _ = writeln!(s, "{:<w$}  {:<24}  {:>6}  {:>8}  {:>8}  {:>8}", "group", "features", "count", "before", "after", "delta");
            for c in &self.cohorts {
                let _ = writeln!(
                    s,
                    "{:<w$}  {:<24}  {:>6}  {:>8.3}  {:>8.3}  {:>+8.3}",
                    c.group, c.features, c.count, c.before, c.after, c.delta
                );
            }
        }
        s
    }
}

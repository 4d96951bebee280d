use serde::{Deserialize, Serialize};

use crate::constraints::CompiledMetric;
use crate::domain::{Dataset, JointPmf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub threshold: f64,
    /// Fraction of records with distortion above the threshold.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDistortion {
    pub cell: usize,
    pub label: String,
    pub count: usize,
    pub mean: f64,
    pub max: f64,
    /// Sample variance of the per-record distortion.
    pub variance: f64,
    pub exceedance: Vec<Exceedance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSummary {
    pub records: usize,
    pub mean: f64,
    pub max: f64,
    pub exceedance: Vec<Exceedance>,
    /// Input cells with at least one record.
    pub cells: Vec<CellDistortion>,
}

/// Per-record distortion between aligned original and transformed records.
pub fn audit_distortion(
    original: &Dataset,
    transformed: &Dataset,
    metric: &CompiledMetric,
    thresholds: &[f64],
) -> Result<DistortionSummary> {
    if original.len() != transformed.len() {
        return Err(Error::LengthMismatch(original.len(), transformed.len()));
    }
    let schema = original.schema();
    if metric.n_xy() != schema.n_xy() {
        return Err(Error::SchemaMismatch("metric does not match the schema".into()));
    }
    let n_cells = schema.n_cells();
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); n_cells];
    for (i, (a, b)) in original.records().iter().zip(transformed.records()).enumerate() {
        if a.d != b.d {
            return Err(Error::Parse { row: i, msg: "group changed between original and transformed".into() });
        }
        let y = a.y.ok_or(Error::MissingOutcome(i))?;
        let yh = b.y.ok_or(Error::MissingOutcome(i))?;
        per[schema.cell(a.d, a.x, y)].push(metric.get(schema.xy(a.x, y), schema.xy(b.x, yh)));
    }
    let exceed = |vals: &[f64]| -> Vec<Exceedance> {
        thresholds
            .iter()
            .map(|&t| Exceedance {
                threshold: t,
                rate: vals.iter().filter(|&&v| v > t).count() as f64 / vals.len().max(1) as f64,
            })
            .collect()
    };
    let all: Vec<f64> = per.iter().flatten().copied().collect();
    let cells = per
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(cell, v)| {
            let count = v.len();
            let mean = v.iter().sum::<f64>() / count as f64;
            let variance =
                if count > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64 } else { 0.0 };
            CellDistortion {
                cell,
                label: schema.cell_label(cell),
                count,
                mean,
                max: v.iter().copied().fold(0.0, f64::max),
                variance,
                exceedance: exceed(v),
            }
        })
        .collect();
    Ok(DistortionSummary {
        records: all.len(),
        mean: all.iter().sum::<f64>() / all.len() as f64,
        max: all.iter().copied().fold(0.0, f64::max),
        exceedance: exceed(&all),
        cells,
    })
}

/// Change of the positive outcome rate in one (d, x) cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDelta {
    pub d: usize,
    pub x: usize,
    pub group: String,
    pub features: String,
    pub count: usize,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

/// Default minimum cohort size for reporting.
pub const MIN_COHORT_COUNT: usize = 20;

/// `p(y_hat = 1 | x_hat = x, d) - p(y = 1 | x, d)` for cohorts with at least
/// `min_count` original records. `after` is a joint over `d * n_xy + xy(x_hat, y_hat)`.
pub fn cohort_deltas(original: &JointPmf, after: &[f64], n: usize, min_count: usize) -> Result<Vec<CohortDelta>> {
    let schema = original.schema();
    let nxy = schema.n_xy();
    if after.len() != schema.d_card() * nxy {
        return Err(Error::SupportMismatch(schema.d_card() * nxy, after.len()));
    }
    let mut out = Vec::new();
    for d in 0..schema.d_card() {
        for x in 0..schema.x_card() {
            let mass = original.at(d, x, 0) + original.at(d, x, 1);
            let count = (mass * n as f64).round() as usize;
            if count < min_count {
                continue;
            }
            let Some(before) = original.y_given_xd(d, x) else { continue };
            let a0 = after[d * nxy + schema.xy(x, 0)];
            let a1 = after[d * nxy + schema.xy(x, 1)];
            if a0 + a1 <= 0.0 {
                continue;
            }
            let after_rate = a1 / (a0 + a1);
            out.push(CohortDelta {
                d,
                x,
                group: schema.d_label(d),
                features: schema.x_label(x),
                count,
                before: before[1],
                after: after_rate,
                delta: after_rate - before[1],
            });
        }
    }
    Ok(out)
}

/// Empirical joint over `d * n_xy + xy(x, y)` of a labeled dataset.
pub fn empirical_joint(data: &Dataset) -> Result<Vec<f64>> {
    let s = data.schema();
    let mut out = vec![0.0; s.d_card() * s.n_xy()];
    for (i, r) in data.records().iter().enumerate() {
        out[r.d * s.n_xy() + s.xy(r.x, r.y.ok_or(Error::MissingOutcome(i))?)] += 1.0;
    }
    let n = data.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

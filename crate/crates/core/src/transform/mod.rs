//! Applying a fitted kernel to records: joint randomization of labeled training
//! data and feature-only randomization of new data.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{DistortionBudget, Level};
use crate::domain::{Dataset, JointPmf, Record, Schema};
use crate::error::{Error, Result};
use crate::optimizer::{Provenance, TransformKernel};

/// Master seed of the per-record random streams. Record `i` always draws from
/// stream `i`, so output does not depend on scheduling or batching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
}

impl SeedSpec {
    pub fn new(seed: u64) -> Self {
        SeedSpec { seed }
    }

    pub fn stream(&self, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Feature map for records without outcomes: `p(x_hat | d, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyMapper {
    schema: Schema,
    probs: Vec<f64>,
    provenance: Provenance,
    absent: Vec<(usize, usize)>,
}

impl ApplyMapper {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Row for `(d, x)` over `x_hat`.
    pub fn row(&self, d: usize, x: usize) -> &[f64] {
        let nx = self.schema.x_card();
        let r = d * nx + x;
        &self.probs[r * nx..(r + 1) * nx]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `(d, x)` pairs without training mass; they map to themselves.
    pub fn absent_rows(&self) -> &[(usize, usize)] {
        &self.absent
    }
}

/// Marginalizes the outcome out of the kernel:
/// `p(x_hat | d, x) = sum_y p(y | x, d) sum_y_hat k(x_hat, y_hat | d, x, y)`.
pub fn derive_apply_kernel(kernel: &TransformKernel, pmf: &JointPmf) -> Result<ApplyMapper> {
    let schema = pmf.schema();
    if kernel.schema() != schema {
        return Err(Error::SchemaMismatch("kernel and pmf use different schemas".into()));
    }
    let (nd, nx, ny) = (schema.d_card(), schema.x_card(), schema.y_card());
    let mut probs = vec![0.0; nd * nx * nx];
    let mut absent = Vec::new();
    for d in 0..nd {
        for x in 0..nx {
            let row = &mut probs[(d * nx + x) * nx..(d * nx + x + 1) * nx];
            let Some(py) = pmf.y_given_xd(d, x) else {
                log::warn!("no training mass for ({}, {}); mapping it to itself", schema.d_label(d), schema.x_label(x));
                row[x] = 1.0;
                absent.push((d, x));
                continue;
            };
            for (y, &w) in py.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let k = kernel.row(schema.cell(d, x, y));
                for (xh, r) in row.iter_mut().enumerate() {
                    *r += w * (0..ny).map(|yh| k[schema.xy(xh, yh)]).sum::<f64>();
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    Ok(ApplyMapper { schema: schema.clone(), probs, provenance: kernel.provenance().clone(), absent })
}

fn samplers<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<WeightedIndex<f64>> {
    rows.map(|r| WeightedIndex::new(r).expect("rows are valid distributions")).collect()
}

/// Draws `(x_hat, y_hat)` for every record from its kernel row. `d` is kept.
pub fn transform_train(data: &Dataset, kernel: &TransformKernel, seed: SeedSpec) -> Result<Dataset> {
    let schema = data.schema();
    if kernel.schema() != schema {
        return Err(Error::SchemaMismatch("kernel and data use different schemas".into()));
    }
    if let Some(i) = data.records().iter().position(|r| r.y.is_none()) {
        return Err(Error::MissingOutcome(i));
    }
    let rows = samplers((0..schema.n_cells()).map(|c| kernel.row(c)));
    let records = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let cell = schema.cell(r.d, r.x, r.y.unwrap_or(0));
            let out = rows[cell].sample(&mut seed.stream(i as u64));
            let (xh, yh) = schema.split_xy(out);
            Record::new(r.d, xh, yh)
        })
        .collect();
    Dataset::new(schema.clone(), records)
}

/// Draws `x_hat` for every record from its mapper row. Outcomes, if present, are dropped.
pub fn transform_apply(data: &Dataset, mapper: &ApplyMapper, seed: SeedSpec) -> Result<Dataset> {
    let schema = data.schema();
    if mapper.schema() != schema {
        return Err(Error::SchemaMismatch("mapper and data use different schemas".into()));
    }
    let nx = schema.x_card();
    let rows = samplers(mapper.probs.chunks(nx));
    let records = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, r)| Record::unlabeled(r.d, rows[r.d * nx + r.x].sample(&mut seed.stream(i as u64))))
        .collect();
    Dataset::new(schema.clone(), records)
}

/// Per-record distortion guarantee for feature-only records, indexed `d * n_x + x`.
/// `None` marks `(d, x)` without training mass, which map to themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ApplyBound {
    /// Bound on the expected distortion.
    Expected { bounds: Vec<Option<f64>> },
    /// Outcome-averaged exceedance budgets. These follow from averaging the
    /// per-outcome constraints and are an extension, not a fitted constraint.
    Thresholded { levels: Vec<Option<Vec<Level>>> },
}

/// Averages per-cell budgets over `p(y | x, d)`.
pub fn apply_distortion_bound(budget: &DistortionBudget, pmf: &JointPmf) -> Result<ApplyBound> {
    budget.validate()?;
    let schema = pmf.schema();
    let (nd, nx, ny) = (schema.d_card(), schema.x_card(), schema.y_card());
    let missing = |cell: usize| Error::MissingBudget(schema.cell_label(cell));
    match budget {
        DistortionBudget::Expected { .. } => {
            let mut bounds = Vec::with_capacity(nd * nx);
            for d in 0..nd {
                for x in 0..nx {
                    let Some(py) = pmf.y_given_xd(d, x) else {
                        bounds.push(None);
                        continue;
                    };
                    let mut c = 0.0;
                    for (y, &w) in py.iter().enumerate().take(ny) {
                        let cell = schema.cell(d, x, y);
                        if w > 0.0 {
                            c += w * budget.expected_for(cell).ok_or_else(|| missing(cell))?;
                        }
                    }
                    bounds.push(Some(c));
                }
            }
            Ok(ApplyBound::Expected { bounds })
        }
        DistortionBudget::Thresholded { .. } => {
            let mut out = Vec::with_capacity(nd * nx);
            for d in 0..nd {
                for x in 0..nx {
                    let Some(py) = pmf.y_given_xd(d, x) else {
                        out.push(None);
                        continue;
                    };
                    let mut avg: Option<Vec<Level>> = None;
                    for (y, &w) in py.iter().enumerate().take(ny) {
                        let cell = schema.cell(d, x, y);
                        if w == 0.0 {
                            continue;
                        }
                        let levels = budget.levels_for(cell).ok_or_else(|| missing(cell))?;
                        let acc = avg.get_or_insert_with(|| {
                            levels.iter().map(|l| Level { threshold: l.threshold, budget: 0.0 }).collect()
                        });
                        let same = acc.len() == levels.len()
                            && acc.iter().zip(levels).all(|(a, l)| a.threshold == l.threshold);
                        if !same {
                            return Err(Error::ModeMismatch(format!(
                                "thresholds differ across outcomes of ({}, {})",
                                schema.d_label(d),
                                schema.x_label(x)
                            )));
                        }
                        for (a, l) in acc.iter_mut().zip(levels) {
                            a.budget += w * l.budget;
                        }
                    }
                    out.push(avg);
                }
            }
            Ok(ApplyBound::Thresholded { levels: out })
        }
    }
}

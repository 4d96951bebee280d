use serde::{Deserialize, Serialize};

use crate::constraints::{ratio_distance, Epsilon};
use crate::domain::{Dataset, JointPmf};
use crate::error::{Error, Result};
use crate::optimizer::TransformKernel;

/// Joint of (D, Y) indexed `[d][y]`.
pub type GroupOutcome = Vec<[f64; 2]>;

/// `p(d, y_hat)` after pushing `pmf` through `kernel`.
pub fn pushforward_group_outcome(pmf: &JointPmf, kernel: &TransformKernel) -> GroupOutcome {
    let nxy = pmf.schema().n_xy();
    kernel
        .joint_with_groups(pmf)
        .chunks(nxy)
        .map(|c| {
            let mut dy = [0.0; 2];
            for (o, m) in c.iter().enumerate() {
                dy[o % 2] += m;
            }
            dy
        })
        .collect()
}

/// Empirical `p(d, y)` of a labeled dataset.
pub fn empirical_group_outcome(data: &Dataset) -> Result<GroupOutcome> {
    let mut dy = vec![[0.0; 2]; data.schema().d_card()];
    for (i, r) in data.records().iter().enumerate() {
        dy[r.d][r.y.ok_or(Error::MissingOutcome(i))?] += 1.0;
    }
    let n = data.len() as f64;
    dy.iter_mut().flatten().for_each(|v| *v /= n);
    Ok(dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub y: usize,
    pub d: usize,
    /// `p(y | d)`.
    pub rate: f64,
    pub target: f64,
    pub distance: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub y: usize,
    pub d1: usize,
    pub d2: usize,
    pub distance: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    pub target: [f64; 2],
    pub epsilon: f64,
    /// `p(y = 1 | d)` per group.
    pub positive_rate: Vec<f64>,
    pub target_rows: Vec<TargetEntry>,
    pub pairwise_rows: Vec<PairEntry>,
    pub max_target_distance: f64,
    pub max_pairwise_distance: f64,
}

impl DiscriminationReport {
    /// Every target distance is within its tolerance.
    pub fn within_target(&self) -> bool {
        self.target_rows.iter().all(|r| r.distance <= r.epsilon)
    }

    pub fn within_pairwise(&self) -> bool {
        self.pairwise_rows.iter().all(|r| r.distance <= r.epsilon)
    }
}

/// Evaluates the ratio distances of every group's outcome rate against the
/// target and against every other group.
pub fn audit_discrimination(joint: &[[f64; 2]], target: [f64; 2], epsilon: &Epsilon) -> Result<DiscriminationReport> {
    let mut conditional = Vec::with_capacity(joint.len());
    for (d, dy) in joint.iter().enumerate() {
        let total = dy[0] + dy[1];
        if !(total > 0.0) {
            return Err(Error::ZeroReference(format!("group {d} has no mass")));
        }
        conditional.push([dy[0] / total, dy[1] / total]);
    }
    let mut target_rows = Vec::new();
    let mut pairwise_rows = Vec::new();
    for y in 0..2 {
        for (d, c) in conditional.iter().enumerate() {
            target_rows.push(TargetEntry {
                y,
                d,
                rate: c[y],
                target: target[y],
                distance: ratio_distance(c[y], target[y])?,
                epsilon: epsilon.get(y, d, None, None),
            });
        }
        for d1 in 0..conditional.len() {
            for d2 in 0..conditional.len() {
                if d1 != d2 {
                    pairwise_rows.push(PairEntry {
                        y,
                        d1,
                        d2,
                        distance: ratio_distance(conditional[d1][y], conditional[d2][y])?,
                        epsilon: epsilon.get(y, d1, Some(d2), None),
                    });
                }
            }
        }
    }
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    Ok(DiscriminationReport {
        target,
        epsilon: epsilon.default,
        positive_rate: conditional.iter().map(|c| c[1]).collect(),
        max_target_distance: max(&mut target_rows.iter().map(|r| r.distance)),
        max_pairwise_distance: max(&mut pairwise_rows.iter().map(|r| r.distance)),
        target_rows,
        pairwise_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_groups_have_zero_distance() {
        let py = [0.3, 0.7];
        let joint: Vec<[f64; 2]> = [0.2, 0.5, 0.3].iter().map(|d| [d * py[0], d * py[1]]).collect();
        let r = audit_discrimination(&joint, py, &Epsilon::scalar(0.0)).unwrap();
        assert!(r.max_target_distance < 1e-15 && r.max_pairwise_distance < 1e-15);
        assert!(r.within_target());
        assert_eq!(r.target_rows.len(), 6);
        assert_eq!(r.pairwise_rows.len(), 12);
    }

    #[test]
    fn hand_computed_distances() {
        let joint = vec![[0.1, 0.4], [0.4, 0.1]];
        let r = audit_discrimination(&joint, [0.5, 0.5], &Epsilon::scalar(0.1)).unwrap();
        assert_eq!(r.positive_rate, vec![0.8, 0.2]);
        assert!((r.max_target_distance - 0.6).abs() < 1e-12);
        // 0.8 / 0.2 - 1
        assert!((r.max_pairwise_distance - 3.0).abs() < 1e-12);
        assert!(!r.within_target());
    }

    #[test]
    fn empty_group_is_rejected() {
        let joint = vec![[0.5, 0.5], [0.0, 0.0]];
        assert!(matches!(audit_discrimination(&joint, [0.5, 0.5], &Epsilon::scalar(0.1)), Err(Error::ZeroReference(_))));
        assert!(audit_discrimination(&[[0.5, 0.5]], [1.0, 0.0], &Epsilon::scalar(0.1)).is_err());
    }
}

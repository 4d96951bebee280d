use serde::{Deserialize, Serialize};

use crate::constraints::ratio_distance;
use crate::error::{Error, Result};

/// How well the group can be guessed from the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    /// Success probability of the best guess of D from Y.
    pub p_correct: f64,
    /// Success probability of always guessing the largest group.
    pub blind: f64,
    /// `p_correct / blind`.
    pub advantage: f64,
}

/// Best-guess advantage for a joint indexed `[d][y]`.
pub fn map_advantage(joint: &[Vec<f64>]) -> Result<AdvantageReport> {
    let ny = joint.first().map_or(0, Vec::len);
    if ny == 0 || joint.iter().any(|r| r.len() != ny) {
        return Err(Error::InvalidPmf("joint must be a non-empty rectangle".into()));
    }
    let total: f64 = joint.iter().flatten().sum();
    if joint.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf(format!("joint sums to {total}")));
    }
    let p_correct: f64 = (0..ny).map(|y| joint.iter().map(|r| r[y]).fold(0.0, f64::max)).sum();
    let blind = joint.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    Ok(AdvantageReport { p_correct, blind, advantage: p_correct / blind })
}

/// Outcome of checking that a large advantage implies a large outcome-rate distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationVerdict {
    pub advantage: f64,
    pub bound: f64,
    /// Every `p(y | d) <= (1 + eps) target(y)`.
    pub rates_within: bool,
    /// `(y, d, distance)` with `p(y | d) > (1 + eps) target(y)` and the largest distance.
    pub witness: Option<(usize, usize, f64)>,
    /// `rates_within` implies `advantage <= bound`.
    pub consistent: bool,
}

/// Checks the implication "all rates within `(1 + eps)` of the target, so the
/// advantage is at most `1 + eps`", reporting the offending `(y, d)` otherwise.
pub fn check_estimation_discrimination(
    report: &AdvantageReport,
    epsilon: f64,
    joint: &[Vec<f64>],
    target: &[f64],
) -> Result<EstimationVerdict> {
    let bound = 1.0 + epsilon;
    let mut witness: Option<(usize, usize, f64)> = None;
    for (d, row) in joint.iter().enumerate() {
        let pd: f64 = row.iter().sum();
        if pd <= 0.0 {
            continue;
        }
        for (y, &m) in row.iter().enumerate() {
            let rate = m / pd;
            // relative slack keeps rounding from producing spurious witnesses
            if rate > bound * target[y] * (1.0 + 1e-12) {
                let j = ratio_distance(rate, target[y])?;
                if witness.is_none_or(|w| j > w.2) {
                    witness = Some((y, d, j));
                }
            }
        }
    }
    let rates_within = witness.is_none();
    let consistent = !rates_within || report.advantage <= bound * (1.0 + 1e-12);
    Ok(EstimationVerdict { advantage: report.advantage, bound, rates_within, witness, consistent })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn brute_force(joint: &[Vec<f64>]) -> f64 {
        let (nd, ny) = (joint.len(), joint[0].len());
        let mut best: f64 = 0.0;
        for code in 0..nd.pow(ny as u32) {
            let mut c = code;
            let mut p = 0.0;
            for y in 0..ny {
                p += joint[c % nd][y];
                c /= nd;
            }
            best = best.max(p);
        }
        best
    }

    #[test]
    fn independent_and_deterministic() {
        let r = map_advantage(&[vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
        assert!((r.p_correct - 0.6).abs() < 1e-15 && (r.advantage - 1.0).abs() < 1e-15);
        let r = map_advantage(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!((r.p_correct, r.advantage), (1.0, 2.0));
    }

    #[test]
    fn hand_example() {
        let joint = [vec![0.4, 0.1], vec![0.2, 0.3]];
        let r = map_advantage(&joint).unwrap();
        assert!((r.p_correct - 0.7).abs() < 1e-15);
        assert!((r.advantage - 1.4).abs() < 1e-15);
        assert_eq!(r.p_correct, brute_force(&joint));
    }

    #[test]
    fn deterministic_groups_have_a_witness() {
        let joint = [vec![0.5, 0.0], vec![0.0, 0.5]];
        let r = map_advantage(&joint).unwrap();
        let v = check_estimation_discrimination(&r, 0.5, &joint, &[0.5, 0.5]).unwrap();
        assert!(!v.rates_within && v.consistent);
        assert_eq!(v.witness.unwrap().2, 1.0);
        let flat = [vec![0.25, 0.25], vec![0.25, 0.25]];
        let r = map_advantage(&flat).unwrap();
        let v = check_estimation_discrimination(&r, 0.0, &flat, &[0.5, 0.5]).unwrap();
        assert!(v.rates_within && v.consistent && r.advantage == 1.0);
    }

    fn joint_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(nd, ny)| {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, ny), nd).prop_filter_map("mass", |w| {
                let t: f64 = w.iter().flatten().sum();
                (t > 1e-3).then(|| w.iter().map(|r| r.iter().map(|v| v / t).collect()).collect())
            })
        })
    }

    proptest! {
        #[test]
        fn map_matches_enumeration(joint in joint_strategy()) {
            let r = map_advantage(&joint).unwrap();
            prop_assert_eq!(r.p_correct, brute_force(&joint));
            prop_assert!(r.advantage >= 1.0 - 1e-12);
        }

        #[test]
        fn implication_holds(joint in joint_strategy(), eps in 0.0f64..1.0) {
            let ny = joint[0].len();
            let mut target = vec![0.0; ny];
            for row in &joint {
                for (y, v) in row.iter().enumerate() {
                    target[y] += v;
                }
            }
            let r = map_advantage(&joint).unwrap();
            let v = check_estimation_discrimination(&r, eps, &joint, &target).unwrap();
            prop_assert!(v.consistent);
        }
    }
}

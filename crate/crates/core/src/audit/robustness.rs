use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative error above which the linearized drift is flagged.
pub const LINEARIZATION_FLAG: f64 = 0.01;

/// Finite-sample guarantees for a kernel fitted on `n` samples and applied to
/// the distribution they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBound {
    pub n: usize,
    pub beta: f64,
    /// Support size `|X| |Y| |D|`.
    pub m: usize,
    /// Smallest transformed `p(d, y_hat)`.
    pub c_m: f64,
    pub epsilon: f64,
    pub mu: f64,
    /// KL radius holding with probability `1 - beta`.
    pub tau: f64,
    /// Log-ratio half-width.
    pub h: f64,
    /// The ratio `q(y_hat | d) / target(y)` lies in `[ratio_low, ratio_high]`.
    pub ratio_low: f64,
    pub ratio_high: f64,
    /// Distance bound from the exact interval.
    pub epsilon_drift: f64,
    /// `eps + (1 + eps) h`, from `exp(h) ~ 1 + h`.
    pub epsilon_drift_linear: f64,
    pub linearization_error: f64,
    pub linearization_flagged: bool,
    /// Utility loss bound `mu + 4 sqrt(2 tau)`.
    pub mu_drift: f64,
    /// `sqrt(ln(n / beta) / n)`, the rate without constants.
    pub asymptotic_rate: f64,
    /// Largest `tau` for which the interval is proven; `None` when not evaluated.
    pub tau_limit: Option<f64>,
    pub valid: Option<bool>,
}

/// `(1/n) ln((1/beta) (e (n + m) / m)^m)`.
pub fn kl_radius(n: usize, beta: f64, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ((1.0 / beta).ln() + m * (1.0 + ((n + m) / m).ln())) / n
}

pub fn robustness_bounds(n: usize, beta: f64, m: usize, c_m: f64, epsilon: f64, mu: f64) -> Result<RobustnessBound> {
    if n == 0 || !(beta > 0.0 && beta < 1.0) || m < 2 || !(c_m > 0.0 && c_m <= 1.0) {
        return Err(Error::InvalidParams(format!("need n >= 1, 0 < beta < 1, m >= 2, 0 < c_m <= 1 (n={n}, beta={beta}, m={m}, c_m={c_m})")));
    }
    if !(epsilon >= 0.0 && mu >= 0.0) {
        return Err(Error::InvalidParams("epsilon and mu must be nonnegative".into()));
    }
    let tau = kl_radius(n, beta, m);
    let h = (3.0 * tau / c_m).sqrt();
    let ratio_low = (1.0 - epsilon).max(0.0) * (-h).exp();
    let ratio_high = (1.0 + epsilon) * h.exp();
    let epsilon_drift = (ratio_high - 1.0).max(1.0 - ratio_low);
    let epsilon_drift_linear = epsilon + (1.0 + epsilon) * h;
    let linearization_error = (epsilon_drift - epsilon_drift_linear).abs() / epsilon_drift.max(f64::MIN_POSITIVE);
    Ok(RobustnessBound {
        n,
        beta,
        m,
        c_m,
        epsilon,
        mu,
        tau,
        h,
        ratio_low,
        ratio_high,
        epsilon_drift,
        epsilon_drift_linear,
        linearization_error,
        linearization_flagged: linearization_error > LINEARIZATION_FLAG,
        mu_drift: mu + 4.0 * (2.0 * tau).sqrt(),
        asymptotic_rate: ((n as f64 / beta).ln() / n as f64).sqrt(),
        tau_limit: None,
        valid: None,
    })
}

/// Bounds with `c_m` and the validity limit taken from the transformed joint `[d][y]`.
pub fn robustness_from_joint(
    n: usize,
    beta: f64,
    m: usize,
    joint: &[[f64; 2]],
    epsilon: f64,
    mu: f64,
) -> Result<RobustnessBound> {
    let c_m = joint.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let mut b = robustness_bounds(n, beta, m, c_m, epsilon, mu)?;
    let mut limit = f64::INFINITY;
    for dy in joint {
        let pd = dy[0] + dy[1];
        for &v in dy {
            let c = v / pd;
            limit = limit.min(v * (1.0 - c) / (3.0 * (1.0 + c) * (1.0 + c)));
        }
    }
    b.tau_limit = Some(limit);
    b.valid = Some(b.tau <= limit);
    Ok(b)
}

/// `min p (1 - p) / (3 (1 + p)^2)` over a pmf.
pub fn lemma_tau_limit(p: &[f64]) -> f64 {
    p.iter().map(|&v| v * (1.0 - v) / (3.0 * (1.0 + v) * (1.0 + v))).fold(f64::INFINITY, f64::min)
}

/// Interval `[g1 exp(-g), g2 exp(g)]` with `g = sqrt(3 tau / p_m)`.
pub fn lemma_ratio_bounds(tau: f64, p_m: f64, gamma1: f64, gamma2: f64) -> Result<(f64, f64)> {
    if !(tau >= 0.0) || !(p_m > 0.0 && p_m <= 1.0) || !(gamma1 >= 0.0 && gamma1 <= gamma2) {
        return Err(Error::InvalidParams(format!("tau={tau}, p_m={p_m}, gammas=({gamma1}, {gamma2})")));
    }
    let g = (3.0 * tau / p_m).sqrt();
    Ok((gamma1 * (-g).exp(), gamma2 * g.exp()))
}

/// [`lemma_ratio_bounds`] for a pmf `p` and reference `r`, warning when `tau`
/// exceeds the range where the interval is proven.
pub fn lemma_ratio_bounds_for(p: &[f64], r: &[f64], tau: f64) -> Result<(f64, f64)> {
    if p.len() != r.len() || p.iter().chain(r).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParams("pmfs need the same positive support".into()));
    }
    let limit = lemma_tau_limit(p);
    if tau > limit {
        log::warn!("tau {tau:.3e} exceeds {limit:.3e}; the ratio interval is not guaranteed");
    }
    let ratios = p.iter().zip(r).map(|(a, b)| a / b);
    let g1 = ratios.clone().fold(f64::INFINITY, f64::min);
    let g2 = ratios.fold(0.0, f64::max);
    let p_m = p.iter().copied().fold(f64::INFINITY, f64::min);
    lemma_ratio_bounds(tau, p_m, g1, g2)
}

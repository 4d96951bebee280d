//! How far discrimination and utility guarantees can drift when a kernel
//! fitted on n samples meets the distribution the samples came from.
//!
//! ```text
//! cargo run --example robustness_bounds
//! ```

use fairprep::audit::{kl_radius, lemma_ratio_bounds_for, lemma_tau_limit, robustness_bounds, robustness_from_joint};

fn main() -> fairprep::Result<()> {
    let (beta, m, eps, mu) = (0.05, 12, 0.1, 0.02);
    println!("{:>9}  {:>10}  {:>8}  {:>9}  {:>9}  {:>9}  flagged", "n", "kl radius", "h", "eps drift", "linear", "mu drift");
    for n in [1_000, 10_000, 100_000, 1_000_000, 10_000_000] {
        let b = robustness_bounds(n, beta, m, 0.1, eps, mu)?;
        println!(
            "{n:>9}  {:>10.3e}  {:>8.4}  {:>9.4}  {:>9.4}  {:>9.4}  {}",
            b.tau, b.h, b.epsilon_drift, b.epsilon_drift_linear, b.mu_drift, b.linearization_flagged
        );
    }
    println!("kl radius for m=4: {:.3e}", kl_radius(50_000, beta, 4));

    // transformed (group, outcome) joint of a fitted kernel
    let joint = [[0.30, 0.20], [0.28, 0.22]];
    let b = robustness_from_joint(200_000, beta, m, &joint, eps, mu)?;
    println!(
        "from a fitted joint: smallest cell {:.2}, eps drift {:.4}, proven for radius up to {:.3e}: {:?}",
        b.c_m,
        b.epsilon_drift,
        b.tau_limit.unwrap_or(f64::NAN),
        b.valid
    );

    let p = [0.25, 0.35, 0.4];
    let r = [0.2, 0.4, 0.4];
    let tau = 0.5 * lemma_tau_limit(&p);
    let (lo, hi) = lemma_ratio_bounds_for(&p, &r, tau)?;
    println!("ratio interval at half the radius limit ({tau:.3e}): [{lo:.4}, {hi:.4}]");
    Ok(())
}

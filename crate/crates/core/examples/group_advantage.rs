//! How much better than a blind guess can someone infer the group from the
//! outcome? Small outcome-rate distances cap that advantage.
//!
//! ```text
//! cargo run --example group_advantage
//! ```

use fairprep::audit::{check_estimation_discrimination, map_advantage};

fn show(name: &str, joint: &[Vec<f64>], eps: f64) -> fairprep::Result<()> {
    let rep = map_advantage(joint)?;
    let ny = joint[0].len();
    let target: Vec<f64> = (0..ny).map(|y| joint.iter().map(|r| r[y]).sum()).collect();
    let v = check_estimation_discrimination(&rep, eps, joint, &target)?;
    println!(
        "{name}: best guess {:.3}, blind {:.3}, advantage {:.4}; rates within {eps}: {}, witness {:?}",
        rep.p_correct, rep.blind, rep.advantage, v.rates_within, v.witness
    );
    Ok(())
}

fn main() -> fairprep::Result<()> {
    // rows are groups, columns outcomes
    show("independent", &[vec![0.3, 0.2], vec![0.3, 0.2]], 0.05)?;
    show("mild", &[vec![0.28, 0.22], vec![0.30, 0.20]], 0.1)?;
    show("strong", &[vec![0.35, 0.15], vec![0.10, 0.40]], 0.1)?;
    show("outcome reveals group", &[vec![0.5, 0.0], vec![0.0, 0.5]], 0.1)?;
    show("three groups", &[vec![0.2, 0.1, 0.05], vec![0.1, 0.2, 0.05], vec![0.1, 0.1, 0.1]], 0.2)?;
    Ok(())
}

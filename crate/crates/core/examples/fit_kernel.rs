//! Fit a randomized transform that brings each group's approval rate within
//! 10% of the overall rate while capping the expected per-record distortion.
//! The two groups trade mass so the pooled (score, approved) distribution
//! barely moves.
//!
//! ```text
//! cargo run --example fit_kernel
//! ```

use fairprep::constraints::{
    AttributePenalty, AttributeRule, Combiner, DiscriminationMode, DiscriminationSpec, DistortionBudget,
    DistortionMetric,
};
use fairprep::domain::{Alphabet, JointPmf, Role, Schema, Variable};
use fairprep::optimizer::{solve, Objective, ProblemSpec, SolverSettings};

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("group", &["A", "B"], false)?, Role::D),
        Variable::new(Alphabet::new("score", &["low", "mid", "high"], true)?, Role::X),
        Variable::new(Alphabet::new("approved", &["no", "yes"], false)?, Role::Y),
    ])?;
    // cells run (group, score, approved) with approved fastest
    let pmf = JointPmf::from_weights(
        schema.clone(),
        vec![12.0, 3.0, 8.0, 7.0, 3.0, 9.0, 16.0, 2.0, 10.0, 5.0, 5.0, 5.0],
    )?;

    let metric = DistortionMetric::per_attribute(
        Combiner::Sum,
        vec![
            AttributePenalty { variable: "score".into(), rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, 4.0], up: None } },
            AttributePenalty { variable: "approved".into(), rule: AttributeRule::Table { penalties: vec![vec![0.0, 1.0], vec![1.0, 0.0]] } },
        ],
    );
    let spec = ProblemSpec {
        discrimination: DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
        metric,
        budget: DistortionBudget::expected(0.5),
        objective: Objective::Kl,
    };
    let problem = spec.assemble(&pmf)?;
    println!(
        "{} kernel entries, {} free after pinning, {} constraints",
        problem.n_variables(),
        problem.n_free_variables(),
        problem.n_constraints()
    );

    let sol = solve(&problem, &SolverSettings::default())?;
    println!("status {}, KL loss {:.3e}, residual {:.1e}", sol.status, sol.objective, sol.residual);

    let target = pmf.p_y()[1];
    let q = sol.kernel.joint_with_groups(&pmf);
    for d in 0..schema.d_card() {
        let row = &q[d * schema.n_xy()..(d + 1) * schema.n_xy()];
        let yes: f64 = (0..schema.x_card()).map(|x| row[schema.xy(x, 1)]).sum();
        let total: f64 = row.iter().sum();
        println!(
            "group {}: approval {:.3} -> {:.3} (target {target:.3})",
            schema.d_label(d),
            pmf.y_given_d(d).unwrap()[1],
            yes / total
        );
    }

    println!("rows that move mass:");
    for cell in 0..schema.n_cells() {
        let (_, x, y) = schema.split_cell(cell);
        let stay = sol.kernel.prob(cell, schema.xy(x, y));
        if stay < 1.0 - 1e-9 {
            let moves: Vec<String> = (0..schema.n_xy())
                .filter(|&o| sol.kernel.prob(cell, o) > 1e-9)
                .map(|o| {
                    let (xh, yh) = schema.split_xy(o);
                    format!("{}/{} {:.3}", schema.x_label(xh), schema.y_label(yh), sol.kernel.prob(cell, o))
                })
                .collect();
            println!("  {}: {}", schema.cell_label(cell), moves.join(", "));
        }
    }
    Ok(())
}

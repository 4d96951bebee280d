//! Fit a kernel whose transformed outcome depends on the transformed features
//! only, so a downstream model that never sees the group still inherits the
//! guarantees. Compares the two solution strategies.
//!
//! ```text
//! cargo run --example suppressed_outcome
//! ```

use fairprep::constraints::{
    AttributePenalty, AttributeRule, Combiner, DiscriminationMode, DiscriminationSpec, DistortionBudget,
    DistortionMetric,
};
use fairprep::domain::{Alphabet, JointPmf, Role, Schema, Variable};
use fairprep::optimizer::{feature_divergence, solve, sof_solve, Objective, ProblemSpec, SofStrategy, SolverSettings};

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("group", &["A", "B"], false)?, Role::D),
        Variable::new(Alphabet::new("score", &["low", "mid", "high"], true)?, Role::X),
        Variable::new(Alphabet::new("approved", &["no", "yes"], false)?, Role::Y),
    ])?;
    let pmf = JointPmf::from_weights(schema.clone(), vec![6.0, 3.0, 4.0, 5.0, 2.0, 7.0, 8.0, 2.0, 6.0, 3.0, 4.0, 4.0])?;
    let spec = ProblemSpec {
        discrimination: DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.15).with_target([0.65, 0.35]),
        metric: DistortionMetric::per_attribute(
            Combiner::Sum,
            vec![
                AttributePenalty { variable: "score".into(), rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, 2.0], up: None } },
                AttributePenalty {
                    variable: "approved".into(),
                    rule: AttributeRule::Table { penalties: vec![vec![0.0, 1.0], vec![1.0, 0.0]] },
                },
            ],
        ),
        budget: DistortionBudget::expected(1.0),
        objective: Objective::Kl,
    };
    let problem = spec.assemble(&pmf)?;
    let settings = SolverSettings::default();
    let full = solve(&problem, &settings)?;
    println!("unrestricted kernel: {} with loss {:.5}", full.status, full.objective);

    for strategy in [SofStrategy::FixConditional, SofStrategy::Alternating] {
        let r = sof_solve(&problem, strategy, &settings, 50)?;
        println!(
            "{strategy:?}: {} with loss {:.5} after {} outer steps (feature-marginal floor {:.5})",
            r.solution.status, r.solution.objective, r.outer_iterations, r.lower_bound
        );
        println!("  loss per step: {:?}", r.history.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>());
        println!("  feature divergence of the kernel: {:.5}", feature_divergence(&problem, &r.solution.kernel));
        for xh in 0..schema.x_card() {
            println!("  p(approved | score={}) = {:.3}", schema.x_label(xh), r.conditional[xh * 2 + 1]);
        }
    }
    Ok(())
}

//! Trade utility against the discrimination tolerance: solve over a grid of
//! epsilons for a tight and a loose distortion budget. The target approval
//! rate (35%) sits below the pooled rate, so meeting it costs utility.
//!
//! ```text
//! cargo run --example epsilon_sweep
//! ```

use fairprep::constraints::{
    AttributePenalty, AttributeRule, Combiner, DiscriminationMode, DiscriminationSpec, DistortionBudget,
    DistortionMetric,
};
use fairprep::domain::{Alphabet, JointPmf, Role, Schema, Variable};
use fairprep::optimizer::{sweep_epsilon, Objective, ProblemSpec, SolveStatus, SolverSettings};
use fairprep::pipeline::parse_grid;

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("group", &["A", "B"], false)?, Role::D),
        Variable::new(Alphabet::new("score", &["low", "mid", "high"], true)?, Role::X),
        Variable::new(Alphabet::new("approved", &["no", "yes"], false)?, Role::Y),
    ])?;
    let pmf = JointPmf::from_weights(schema.clone(), vec![5.0, 5.0, 4.0, 6.0, 3.0, 7.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0])?;
    let metric = DistortionMetric::per_attribute(
        Combiner::Sum,
        vec![
            AttributePenalty { variable: "score".into(), rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, 2.0], up: None } },
            AttributePenalty { variable: "approved".into(), rule: AttributeRule::Table { penalties: vec![vec![0.0, 1.0], vec![1.0, 0.0]] } },
        ],
    );
    let grid = parse_grid("0:0.05:0.6")?;
    for c in [0.1, 0.5] {
        let template = ProblemSpec {
            discrimination: DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.0).with_target([0.65, 0.35]),
            metric: metric.clone(),
            budget: DistortionBudget::expected(c),
            objective: Objective::Kl,
        };
        let r = sweep_epsilon(&pmf, &template, &grid, &SolverSettings::default())?;
        println!("budget {c}: monotone {}, infeasible up to {:?}, zero loss from {:?}", r.monotone, r.infeasible_below, r.zero_from);
        for p in &r.points {
            let bar = match p.status {
                SolveStatus::Optimal => "#".repeat((p.objective * 400.0).round() as usize),
                _ => "x".into(),
            };
            println!("  eps {:>4.2}  {:<10}  {:.5}  {bar}", p.epsilon, p.status.to_string(), p.objective);
        }
    }
    Ok(())
}

//! Build distortion metrics three ways, compile them to a cost matrix, and
//! turn budgets into linear constraints on the kernel.
//!
//! ```text
//! cargo run --example distortion_metrics
//! ```

use fairprep::constraints::{
    build_discrimination_constraints, build_distortion_constraints, AttributePenalty, AttributeRule, Combiner,
    Condition, DiscriminationMode, DiscriminationSpec, DistortionBudget, DistortionMetric, Level, Rule, FORBIDDEN,
};
use fairprep::domain::{Alphabet, JointPmf, Role, Schema, Variable};
use fairprep::optimizer::TransformKernel;

fn print_matrix(schema: &Schema, name: &str, metric: &DistortionMetric) -> fairprep::Result<()> {
    let m = metric.compile(schema)?;
    println!("{name}");
    for from in 0..m.n_xy() {
        let (x, y) = schema.split_xy(from);
        let row: Vec<String> = m
            .row(from)
            .iter()
            .map(|&v| if v >= FORBIDDEN { "   -".into() } else { format!("{v:4.1}") })
            .collect();
        println!("  {:>5}/{}  {}", schema.x_label(x), schema.y_label(y), row.join(" "));
    }
    Ok(())
}

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("sex", &["F", "M"], false)?, Role::D),
        Variable::new(Alphabet::new("age", &["<25", "25-45", ">45"], true)?, Role::X),
        Variable::new(Alphabet::new("label", &["0", "1"], false)?, Role::Y),
    ])?;

    // squared steps: one age band costs 1, two bands are not allowed; 0 -> 1 is not allowed
    let squares = DistortionMetric::per_attribute(
        Combiner::SumOfSquares,
        vec![
            AttributePenalty { variable: "age".into(), rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, FORBIDDEN], up: None } },
            AttributePenalty {
                variable: "label".into(),
                rule: AttributeRule::Table { penalties: vec![vec![0.0, FORBIDDEN], vec![2.0, 0.0]] },
            },
        ],
    );
    print_matrix(&schema, "sum of squares", &squares)?;

    // asymmetric: moving to an older band costs more than moving down
    let asym = DistortionMetric::per_attribute(
        Combiner::Sum,
        vec![
            AttributePenalty {
                variable: "age".into(),
                rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, 3.0], up: Some(vec![0.0, 2.0, 5.0]) },
            },
            AttributePenalty { variable: "label".into(), rule: AttributeRule::Table { penalties: vec![vec![0.0, 1.0], vec![1.0, 0.0]] } },
        ],
    );
    print_matrix(&schema, "asymmetric sum", &asym)?;

    // rules, first match wins
    let rules = DistortionMetric::rule_table(
        vec![
            Rule { when: vec![Condition::AbsDelta { variable: "age".into(), min: Some(2), max: None }], value: 3.0 },
            Rule { when: vec![Condition::Delta { variable: "label".into(), min: None, max: Some(-1) }], value: 1.0 },
            Rule { when: vec![Condition::AbsDelta { variable: "age".into(), min: Some(1), max: Some(1) }], value: 2.0 },
        ],
        0.0,
    );
    print_matrix(&schema, "rule table", &rules)?;

    let pmf = JointPmf::from_weights(schema.clone(), vec![3.0, 1.0, 4.0, 2.0, 2.0, 1.0, 2.0, 2.0, 3.0, 3.0, 1.0, 2.0])?;
    let expected = build_distortion_constraints(&squares.compile(&schema)?, &DistortionBudget::expected(0.5), &pmf)?;
    let thresholded = build_distortion_constraints(
        &rules.compile(&schema)?,
        &DistortionBudget::thresholded(vec![Level { threshold: 0.9, budget: 0.1 }, Level { threshold: 1.9, budget: 0.05 }]),
        &pmf,
    )?;
    let disc = build_discrimination_constraints(&DiscriminationSpec::new(DiscriminationMode::PairwiseDistance, 0.1), &pmf)?;
    println!(
        "constraints: {} expected-distortion, {} thresholded, {} pairwise discrimination",
        expected.len(),
        thresholded.len(),
        disc.len()
    );
    let identity = TransformKernel::identity(&schema);
    let (v, at) = disc.max_violation(identity.probs());
    println!("the identity kernel violates discrimination by {v:.4} ({:?})", at.map(|i| disc.constraints[i].label));
    Ok(())
}

//! Audit a transform two ways: exactly, by pushing the data distribution
//! through the kernel, and empirically, by comparing records before and after.
//!
//! ```text
//! cargo run --example audit_report
//! ```

use fairprep::audit::{audit_datasets, audit_kernel, AuditOptions};
use fairprep::constraints::{
    AttributePenalty, AttributeRule, Combiner, DiscriminationMode, DiscriminationSpec, DistortionBudget,
    DistortionMetric,
};
use fairprep::domain::{Alphabet, Dataset, JointPmf, Record, Role, Schema, Variable};
use fairprep::optimizer::{solve, Objective, ProblemSpec, SolverSettings};
use fairprep::transform::{transform_train, SeedSpec};

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("group", &["A", "B"], false)?, Role::D),
        Variable::new(Alphabet::new("score", &["low", "mid", "high"], true)?, Role::X),
        Variable::new(Alphabet::new("approved", &["no", "yes"], false)?, Role::Y),
    ])?;
    // a deterministic dataset: counts per (group, score, approved) cell
    let counts = [300, 200, 150, 250, 80, 220, 420, 80, 250, 120, 120, 80];
    let records = counts
        .iter()
        .enumerate()
        .flat_map(|(cell, &n)| {
            let (d, x, y) = schema.split_cell(cell);
            std::iter::repeat_n(Record::new(d, x, y), n)
        })
        .collect();
    let data = Dataset::new(schema.clone(), records)?;
    let pmf = JointPmf::estimate_empirical(&data)?;

    let spec = ProblemSpec {
        discrimination: DiscriminationSpec::new(DiscriminationMode::TargetDistance, 0.1),
        metric: DistortionMetric::per_attribute(
            Combiner::SumOfSquares,
            vec![
                AttributePenalty { variable: "score".into(), rule: AttributeRule::Ordinal { steps: vec![0.0, 1.0, 2.0], up: None } },
                AttributePenalty {
                    variable: "approved".into(),
                    rule: AttributeRule::Table { penalties: vec![vec![0.0, 1.0], vec![1.0, 0.0]] },
                },
            ],
        ),
        budget: DistortionBudget::expected(0.6),
        objective: Objective::Kl,
    };
    let kernel = solve(&spec.assemble(&pmf)?, &SolverSettings::default())?.kernel;
    let opts = AuditOptions { thresholds: vec![0.5, 1.5, 4.5], ..AuditOptions::default() };

    println!("== exact pushforward");
    let exact = audit_kernel(&pmf, &kernel, &spec, &opts)?;
    print!("{}", exact.render_text());

    println!("\n== sampled records");
    let transformed = transform_train(&data, &kernel, SeedSpec::new(1))?;
    let sampled = audit_datasets(&data, &transformed, &spec, &opts)?;
    print!("{}", sampled.render_text());
    let d = sampled.distortion.as_ref().expect("record-level audit has distortion");
    let worst = d.cells.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).expect("non-empty");
    println!("most distorted input cell: {} (mean {:.3}, variance {:.3})", worst.label, worst.mean, worst.variance);
    Ok(())
}

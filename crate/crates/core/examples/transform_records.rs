//! Randomize individual records with a fitted kernel: labeled training
//! records in train mode, unlabeled records through the outcome-free mapper
//! in apply mode. Every record draws from its own seeded stream.
//!
//! ```text
//! cargo run --example transform_records
//! ```

use fairprep::constraints::{
    AttributePenalty, AttributeRule, Combiner, DiscriminationMode, DiscriminationSpec, DistortionBudget,
    DistortionMetric,
};
use fairprep::domain::{Alphabet, Dataset, JointPmf, Record, Role, Schema, Variable};
use fairprep::optimizer::{solve, Objective, ProblemSpec, SolverSettings};
use fairprep::transform::{apply_distortion_bound, derive_apply_kernel, transform_apply, transform_train, SeedSpec};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn approval_rates(data: &Dataset) -> Vec<String> {
    let s = data.schema();
    (0..s.d_card())
        .map(|d| {
            let rows: Vec<&Record> = data.records().iter().filter(|r| r.d == d).collect();
            format!("{:.3}", rows.iter().filter(|r| r.y == Some(1)).count() as f64 / rows.len() as f64)
        })
        .collect()
}

fn main() -> fairprep::Result<()> {
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("group", &["A", "B"], false)?, Role::D),
        Variable::new(Alphabet::new("score", &["low", "mid", "high"], true)?, Role::X),
        Variable::new(Alphabet::new("approved", &["no", "yes"], false)?, Role::Y),
    ])?;
    let truth = JointPmf::from_weights(schema.clone(), vec![5.0, 5.0, 4.0, 6.0, 3.0, 7.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0])?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cells = WeightedIndex::new(truth.mass()).expect("valid pmf");
    let records = (0..20_000)
        .map(|_| {
            let (d, x, y) = schema.split_cell(cells.sample(&mut rng));
            Record::new(d, x, y)
        })
        .collect();
    let data = Dataset::new(schema.clone(), records)?;
    let pmf = JointPmf::estimate_empirical(&data)?;

    let spec = ProblemSpec {
        discrimination: DiscriminationSpec::new(DiscriminationMode::PairwiseDistance, 0.1),
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
        budget: DistortionBudget::expected(0.4),
        objective: Objective::Kl,
    };
    let kernel = solve(&spec.assemble(&pmf)?, &SolverSettings::default())?.kernel;

    let out = transform_train(&data, &kernel, SeedSpec::new(7))?;
    let again = transform_train(&data, &kernel, SeedSpec::new(7))?;
    let changed = data.records().iter().zip(out.records()).filter(|(a, b)| a != b).count();
    println!("approval by group: {:?} -> {:?}", approval_rates(&data), approval_rates(&out));
    println!("{changed} of {} records changed; same seed reproduces: {}", data.len(), out.records() == again.records());

    let mapper = derive_apply_kernel(&kernel, &pmf)?;
    for d in 0..schema.d_card() {
        for x in 0..schema.x_card() {
            println!("  apply row {} {}: {:?}", schema.d_label(d), schema.x_label(x), mapper.row(d, x).iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
        }
    }
    let fresh = Dataset::new(schema.clone(), vec![Record::unlabeled(0, 2), Record::unlabeled(1, 0), Record::unlabeled(1, 1)])?;
    let applied = transform_apply(&fresh, &mapper, SeedSpec::new(7))?;
    for (a, b) in fresh.records().iter().zip(applied.records()) {
        println!("  {} {} -> {}", schema.d_label(a.d), schema.x_label(a.x), schema.x_label(b.x));
    }
    println!("per-record distortion guarantee in apply mode: {:?}", apply_distortion_bound(&spec.budget, &pmf)?);
    Ok(())
}

#![allow(dead_code, clippy::needless_range_loop)]

use fairprep::constraints::{AttributePenalty, AttributeRule, Combiner, DistortionMetric};
use fairprep::domain::{Alphabet, JointPmf, Role, Schema, Variable};
use rand::Rng;

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn var(name: &str, cats: &[String], ordinal: bool, role: Role) -> Variable {
    let refs: Vec<&str> = cats.iter().map(String::as_str).collect();
    Variable::new(Alphabet::new(name, &refs, ordinal).unwrap(), role)
}

/// One group variable, one ordinal feature per entry of `x_cards`, binary outcome.
pub fn schema(nd: usize, x_cards: &[usize]) -> Schema {
    let mut vars = vec![var("G", &labels("g", nd), false, Role::D)];
    for (i, &n) in x_cards.iter().enumerate() {
        vars.push(var(&format!("F{i}"), &labels(&format!("f{i}_"), n), true, Role::X));
    }
    vars.push(var("Y", &["0".to_string(), "1".to_string()], false, Role::Y));
    Schema::new(vars).unwrap()
}

/// Strictly positive random pmf.
pub fn random_pmf<R: Rng>(rng: &mut R, schema: &Schema) -> JointPmf {
    let w: Vec<f64> = (0..schema.n_cells()).map(|_| rng.gen_range(0.05..1.0)).collect();
    JointPmf::from_weights(schema.clone(), w).unwrap()
}

/// Feature steps cost `steps[|delta|]` each, an outcome flip costs `flip`.
pub fn additive_metric(schema: &Schema, steps: &[f64], flip: f64) -> DistortionMetric {
    let mut attributes: Vec<AttributePenalty> = schema
        .x_vars()
        .iter()
        .map(|v| AttributePenalty {
            variable: v.name().to_string(),
            rule: AttributeRule::Ordinal { steps: steps.to_vec(), up: None },
        })
        .collect();
    attributes.push(AttributePenalty {
        variable: "Y".into(),
        rule: AttributeRule::Table { penalties: vec![vec![0.0, flip], vec![flip, 0.0]] },
    });
    DistortionMetric::per_attribute(Combiner::Sum, attributes)
}

/// The cost `additive_metric` assigns, recomputed from category digits.
pub fn additive_cost(schema: &Schema, steps: &[f64], flip: f64, from: (usize, usize), to: (usize, usize)) -> f64 {
    let a = schema.x_digits(from.0);
    let b = schema.x_digits(to.0);
    let step = |k: usize| if k == 0 { 0.0 } else { steps[k.min(steps.len() - 1)] };
    let xs: f64 = a.iter().zip(&b).map(|(u, v)| step(u.abs_diff(*v))).sum();
    xs + if from.1 == to.1 { 0.0 } else { flip }
}

/// `[d][y]` joint of the transformed outcome, summed by hand from the kernel.
pub fn transformed_dy(pmf: &JointPmf, kernel: &fairprep::optimizer::TransformKernel) -> Vec<[f64; 2]> {
    let s = pmf.schema();
    let mut out = vec![[0.0; 2]; s.d_card()];
    for d in 0..s.d_card() {
        for x in 0..s.x_card() {
            for y in 0..2 {
                let p = pmf.at(d, x, y);
                for xh in 0..s.x_card() {
                    for yh in 0..2 {
                        out[d][yh] += p * kernel.prob(s.cell(d, x, y), s.xy(xh, yh));
                    }
                }
            }
        }
    }
    out
}

pub fn rates(dy: &[[f64; 2]]) -> Vec<[f64; 2]> {
    dy.iter().map(|r| [r[0] / (r[0] + r[1]), r[1] / (r[0] + r[1])]).collect()
}

/// Largest `|rate / target - 1|` over groups and outcomes.
pub fn max_target_j(dy: &[[f64; 2]], target: [f64; 2]) -> f64 {
    rates(dy).iter().flat_map(|r| (0..2).map(move |y| (r[y] / target[y] - 1.0).abs())).fold(0.0, f64::max)
}

/// Largest `|rate_a / rate_b - 1|` over ordered group pairs and outcomes.
pub fn max_pairwise_j(dy: &[[f64; 2]]) -> f64 {
    let r = rates(dy);
    let mut m: f64 = 0.0;
    for a in &r {
        for b in &r {
            for y in 0..2 {
                m = m.max((a[y] / b[y] - 1.0).abs());
            }
        }
    }
    m
}

/// Two groups, three ordered feature levels; group 0 has the higher positive rate.
pub fn discriminatory_pmf() -> JointPmf {
    let s = schema(2, &[3]);
    let pos = [[0.5, 0.6, 0.7], [0.2, 0.3, 0.4]];
    let mut mass = vec![0.0; s.n_cells()];
    for d in 0..2 {
        for x in 0..3 {
            mass[s.cell(d, x, 1)] = pos[d][x] / 6.0;
            mass[s.cell(d, x, 0)] = (1.0 - pos[d][x]) / 6.0;
        }
    }
    JointPmf::from_mass(s, mass).unwrap()
}

/// `n` records drawn cell by cell from `pmf`.
pub fn sample_dataset<R: Rng>(rng: &mut R, pmf: &JointPmf, n: usize) -> fairprep::domain::Dataset {
    use rand::distributions::{Distribution, WeightedIndex};
    let s = pmf.schema();
    let w = WeightedIndex::new(pmf.mass()).unwrap();
    let recs = (0..n)
        .map(|_| {
            let (d, x, y) = s.split_cell(w.sample(rng));
            fairprep::domain::Record::new(d, x, y)
        })
        .collect();
    fairprep::domain::Dataset::new(s.clone(), recs).unwrap()
}

/// Pipeline configuration over the schema of [`discriminatory_pmf`].
pub const SYNTHETIC_TOML: &str = r#"
name = "synthetic"
seed = 11
objective = "kl"

[input]

[[variables]]
name = "G"
categories = ["g0", "g1"]
role = "D"

[[variables]]
name = "F0"
categories = ["f0_0", "f0_1", "f0_2"]
ordinal = true
role = "X"

[[variables]]
name = "Y"
categories = ["0", "1"]
role = "Y"

[discrimination]
mode = "target_distance"
epsilon = 0.1

[distortion.metric]
combiner = "sum"
attributes = [
    { variable = "F0", rule = { kind = "ordinal", steps = [0.0, 1.0, 2.0] } },
    { variable = "Y", rule = { kind = "table", penalties = [[0.0, 1.0], [1.0, 0.0]] } },
]

[distortion.budget]
mode = "expected"
default = 0.3

[audit]
beta = 0.05
thresholds = [0.5, 1.5]
min_cohort_count = 20
"#;

pub fn synthetic_config() -> fairprep::pipeline::PipelineConfig {
    fairprep::pipeline::PipelineConfig::from_toml(SYNTHETIC_TOML).unwrap()
}

/// Writes `data` as CSV and returns the path.
pub fn write_csv(data: &fairprep::domain::Dataset, path: &std::path::Path) {
    let f = std::fs::File::create(path).unwrap();
    data.write_delimited(std::io::BufWriter::new(f), b',', false).unwrap();
}

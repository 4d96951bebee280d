//! Drive the whole pipeline from a TOML configuration: fit, transform, audit
//! and sweep, with every output tagged by the configuration fingerprint.
//!
//! ```text
//! cargo run --example config_pipeline
//! ```

use fairprep::domain::{Dataset, Record};
use fairprep::pipeline::{self, AuditInput, Mode, PipelineConfig};

const CONFIG: &str = r#"
name = "loans"
seed = 42
objective = "kl"

[input]
path = "loans.csv"

[[variables]]
name = "group"
categories = ["A", "B"]
role = "D"

[[variables]]
name = "score"
categories = ["low", "mid", "high"]
ordinal = true
role = "X"

[[variables]]
name = "approved"
categories = ["no", "yes"]
role = "Y"

[discrimination]
mode = "target_distance"
epsilon = 0.1
target = [0.65, 0.35]

[distortion.metric]
combiner = "sum"
attributes = [
    { variable = "score", rule = { kind = "ordinal", steps = [0.0, 1.0, 2.0] } },
    { variable = "approved", rule = { kind = "table", penalties = [[0.0, 1.0], [1.0, 0.0]] } },
]

[distortion.budget]
mode = "expected"
default = 0.4

[audit]
beta = 0.05
thresholds = [0.5, 1.5]
min_cohort_count = 20
"#;

fn main() -> fairprep::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = PipelineConfig::from_toml(CONFIG)?;
    println!("configuration `{}`, fingerprint {}", cfg.name, &cfg.fingerprint()[..16]);

    // write a dataset and point the configuration at it
    let schema = cfg.schema()?;
    let counts = [300, 200, 150, 250, 80, 220, 420, 80, 250, 120, 120, 80];
    let records = counts
        .iter()
        .enumerate()
        .flat_map(|(cell, &n)| {
            let (d, x, y) = schema.split_cell(cell);
            std::iter::repeat_n(Record::new(d, x, y), n)
        })
        .collect();
    let data_path = dir.path().join("loans.csv");
    Dataset::new(schema, records)?.write_delimited(std::fs::File::create(&data_path)?, b',', false)?;
    cfg.input.path = Some(data_path);
    let data = cfg.training_data()?;

    let out = dir.path().join("out");
    let (report, _) = pipeline::cmd_fit(&cfg, &data, &out)?;
    println!("fit: {} (loss {:.5}, {} iterations)", report.status, report.objective, report.iterations);
    let kernel = out.join(pipeline::KERNEL_FILE);

    let transformed = pipeline::cmd_transform(&cfg, &kernel, &data, None, Mode::Train, cfg.seed, false, &out)?;
    let first_line = std::fs::read_to_string(&transformed)?.lines().next().unwrap_or_default().to_string();
    println!("transformed file starts with `{}...`", &first_line[..28.min(first_line.len())]);

    let audit = pipeline::cmd_audit(&cfg, &data, AuditInput::Transformed(&transformed), false, &out)?;
    println!("audited max distance to target: {:.4}", audit.after.max_target_distance);

    // a kernel is tied to the configuration that produced it
    let mut edited = cfg.clone();
    edited.distortion.budget = fairprep::constraints::DistortionBudget::expected(0.8);
    match pipeline::load_kernel(&edited, &kernel, false) {
        Err(e) => println!("edited configuration rejects the kernel: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }

    let sweep = pipeline::cmd_sweep(&cfg, &data, &pipeline::parse_grid("0:0.1:0.5")?, &out)?;
    for p in &sweep.points {
        println!("  eps {:.1}: {} {:.5}", p.epsilon, p.status, p.objective);
    }
    let mut files: Vec<String> = std::fs::read_dir(&out)?.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    files.sort();
    println!("outputs: {}", files.join(", "));
    Ok(())
}

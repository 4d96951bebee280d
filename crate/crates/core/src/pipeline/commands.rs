use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::audit::{audit_datasets, audit_kernel, AuditReport};
use crate::domain::{read_delimited, Dataset, IngestOptions, JointPmf};
use crate::error::{Error, Result};
use crate::optimizer::{
    sof_solve, solve, sweep_epsilon, Provenance, SolveStatus, SweepResult, TransformKernel,
};
use crate::transform::{derive_apply_kernel, transform_apply, transform_train, SeedSpec};

pub const KERNEL_FILE: &str = "kernel.csv";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const TRANSFORMED_FILE: &str = "transformed.csv";
pub const AUDIT_TEXT_FILE: &str = "audit.txt";
pub const AUDIT_JSON_FILE: &str = "audit.json";
pub const COHORT_FILE: &str = "cohorts.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";

const FINGERPRINT_PREFIX: &str = "# fingerprint=";

/// Process exit code for an error: 2 infeasible, 3 configuration, 4 input/output.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Parse { .. } | Error::EmptyDataset => 4,
        _ => 3,
    }
}

/// Machine-readable description of a failed command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDocument {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorDocument {
    pub fn new(err: &Error) -> Self {
        let dbg = format!("{err:?}");
        let kind = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
        ErrorDocument { error: kind, message: err.to_string(), exit_code: exit_code(err) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full kernel on labeled records.
    Train,
    /// Feature-only mapper on records that may lack outcomes.
    Apply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressInfo {
    pub history: Vec<f64>,
    pub lower_bound: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: String,
    pub fingerprint: String,
    pub records: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub residual: f64,
    pub gap: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_total_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppress: Option<SuppressInfo>,
    /// Written only for optimal solutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<PathBuf>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn empirical_pmf(data: &Dataset) -> Result<JointPmf> {
    JointPmf::estimate_empirical(data)
}

/// Solves for the kernel on `data` and writes the kernel and a fit report to `out_dir`.
/// The report is returned whatever the solver status.
pub fn cmd_fit(cfg: &PipelineConfig, data: &Dataset, out_dir: &Path) -> Result<(FitReport, Option<TransformKernel>)> {
    fs::create_dir_all(out_dir)?;
    let pmf = empirical_pmf(data)?;
    let problem = cfg.problem_spec().assemble(&pmf)?;
    let (solution, suppress) = match cfg.suppress {
        None => (solve(&problem, &cfg.solver)?, None),
        Some(s) => {
            let sof = sof_solve(&problem, s.strategy, &cfg.solver, s.max_outer)?;
            let info =
                SuppressInfo { history: sof.history, lower_bound: sof.lower_bound, outer_iterations: sof.outer_iterations };
            (sof.solution, Some(info))
        }
    };
    let fingerprint = cfg.fingerprint();
    let mut report = FitReport {
        config: cfg.name.clone(),
        fingerprint: fingerprint.clone(),
        records: data.len(),
        status: solution.status,
        objective: solution.objective,
        residual: solution.residual,
        gap: solution.gap,
        iterations: solution.iterations,
        min_total_violation: solution.min_total_violation,
        violated: solution.violated.as_ref().map(|v| format!("{:?}", v.label)),
        warnings: solution.warnings.clone(),
        suppress,
        kernel_file: None,
    };
    let kernel = if solution.status == SolveStatus::Optimal {
        let prov = Provenance { fingerprint, ..solution.kernel.provenance().clone() };
        let kernel = solution.kernel.with_provenance(prov);
        let path = out_dir.join(KERNEL_FILE);
        kernel.write_csv(BufWriter::new(File::create(&path)?))?;
        report.kernel_file = Some(path);
        Some(kernel)
    } else {
        None
    };
    write_json(&out_dir.join(FIT_REPORT_FILE), &report)?;
    Ok((report, kernel))
}

fn check_fingerprint(cfg: &PipelineConfig, found: &str, allow_mismatch: bool) -> Result<()> {
    let expected = cfg.fingerprint();
    if found == expected {
        return Ok(());
    }
    if allow_mismatch {
        log::warn!("artifact fingerprint {found} differs from configuration {expected}; continuing as requested");
        return Ok(());
    }
    Err(Error::ProvenanceMismatch { expected, found: found.to_string() })
}

/// Reads a kernel file and checks its fingerprint against the configuration.
pub fn load_kernel(cfg: &PipelineConfig, path: &Path, allow_mismatch: bool) -> Result<TransformKernel> {
    let kernel = TransformKernel::read_csv(BufReader::new(File::open(path)?), &cfg.schema()?)?;
    check_fingerprint(cfg, &kernel.provenance().fingerprint, allow_mismatch)?;
    Ok(kernel)
}

/// Writes records as category labels after a fingerprint comment line.
pub fn write_transformed(cfg: &PipelineConfig, data: &Dataset, seed: u64, mode: Mode, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FINGERPRINT_PREFIX}{} seed={seed} mode={}", cfg.fingerprint(), match mode {
        Mode::Train => "train",
        Mode::Apply => "apply",
    })?;
    data.write_delimited(&mut w, cfg.input.ingest.delimiter as u8, false)?;
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_transformed`], returning the records and the
/// embedded fingerprint.
pub fn read_transformed(cfg: &PipelineConfig, path: &Path) -> Result<(Dataset, String)> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let fingerprint = first
        .trim()
        .strip_prefix(FINGERPRINT_PREFIX)
        .and_then(|r| r.split_whitespace().next())
        .unwrap_or("")
        .to_string();
    let schema = cfg.schema()?;
    let opts = IngestOptions { delimiter: cfg.input.ingest.delimiter, ..IngestOptions::default() };
    let raw = read_delimited(BufReader::new(File::open(path)?), &schema.without_quantizers(), &opts)?;
    Ok((Dataset::new(schema, raw.records().to_vec())?, fingerprint))
}

/// Transforms `data` with the kernel at `kernel_path` and writes the result.
/// Apply mode marginalizes the outcome out of the kernel using `training`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_transform(
    cfg: &PipelineConfig,
    kernel_path: &Path,
    data: &Dataset,
    training: Option<&Dataset>,
    mode: Mode,
    seed: u64,
    allow_mismatch: bool,
    out_dir: &Path,
) -> Result<PathBuf> {
    let kernel = load_kernel(cfg, kernel_path, allow_mismatch)?;
    let out = match mode {
        Mode::Train => transform_train(data, &kernel, SeedSpec::new(seed))?,
        Mode::Apply => {
            let training = training.ok_or_else(|| Error::Config("apply mode needs the training data".into()))?;
            let mapper = derive_apply_kernel(&kernel, &empirical_pmf(training)?)?;
            transform_apply(data, &mapper, SeedSpec::new(seed))?
        }
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(TRANSFORMED_FILE);
    write_transformed(cfg, &out, seed, mode, &path)?;
    Ok(path)
}

/// What to compare the original data against.
#[derive(Debug, Clone, Copy)]
pub enum AuditInput<'a> {
    /// Exact pushforward through a kernel file.
    Kernel(&'a Path),
    /// A file written by the transform command.
    Transformed(&'a Path),
}

/// Audits and writes a text report, a JSON report and the per-cohort table.
pub fn cmd_audit(
    cfg: &PipelineConfig,
    original: &Dataset,
    input: AuditInput<'_>,
    allow_mismatch: bool,
    out_dir: &Path,
) -> Result<AuditReport> {
    let spec = cfg.problem_spec();
    let mut report = match input {
        AuditInput::Kernel(path) => {
            let kernel = load_kernel(cfg, path, allow_mismatch)?;
            audit_kernel(&empirical_pmf(original)?, &kernel, &spec, &cfg.audit)?
        }
        AuditInput::Transformed(path) => {
            let (transformed, fp) = read_transformed(cfg, path)?;
            check_fingerprint(cfg, &fp, allow_mismatch)?;
            audit_datasets(original, &transformed, &spec, &cfg.audit)?
        }
    };
    report.fingerprint = Some(cfg.fingerprint());
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(AUDIT_TEXT_FILE), format!("{FINGERPRINT_PREFIX}{}\n{}", cfg.fingerprint(), report.render_text()))?;
    write_json(&out_dir.join(AUDIT_JSON_FILE), &report)?;
    let mut w = BufWriter::new(File::create(out_dir.join(COHORT_FILE))?);
    writeln!(w, "{FINGERPRINT_PREFIX}{}", cfg.fingerprint())?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["group", "features", "count", "before", "after", "delta"])?;
    for c in &report.cohorts {
        wr.write_record([
            c.group.clone(),
            c.features.clone(),
            c.count.to_string(),
            format!("{:.6}", c.before),
            format!("{:.6}", c.after),
            format!("{:.6}", c.delta),
        ])?;
    }
    wr.flush()?;
    Ok(report)
}

/// Parses `a,b,c` or `start:step:stop` (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse epsilon grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // rounding keeps accumulated floating-point noise out of the labels
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

/// Solves over an epsilon grid and writes the table.
pub fn cmd_sweep(cfg: &PipelineConfig, data: &Dataset, grid: &[f64], out_dir: &Path) -> Result<SweepResult> {
    let pmf = empirical_pmf(data)?;
    let result = sweep_epsilon(&pmf, &cfg.problem_spec(), grid, &cfg.solver)?;
    fs::create_dir_all(out_dir)?;
    let mut w = BufWriter::new(File::create(out_dir.join(SWEEP_FILE))?);
    writeln!(w, "{FINGERPRINT_PREFIX}{}", cfg.fingerprint())?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epsilon", "status", "objective", "residual"])?;
    for p in &result.points {
        wr.write_record([p.epsilon.to_string(), p.status.to_string(), format!("{:.9e}", p.objective), format!("{:.3e}", p.residual)])?;
    }
    wr.flush()?;
    write_json(&out_dir.join(SWEEP_JSON_FILE), &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1, 0.2,0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        let g = parse_grid("0:0.25:1").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 1.0).abs() < 1e-12);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 3);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 4);
        let doc = ErrorDocument::new(&Error::ProvenanceMismatch { expected: "a".into(), found: "b".into() });
        assert_eq!((doc.error.as_str(), doc.exit_code), ("ProvenanceMismatch", 3));
    }
}

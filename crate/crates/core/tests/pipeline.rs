mod common;

use std::path::Path;

use fairprep::constraints::{DistortionBudget, Epsilon};
use fairprep::domain::Dataset;
use fairprep::optimizer::SolveStatus;
use fairprep::pipeline::{self, AuditInput, Mode, PipelineConfig};
use fairprep::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn data(n: usize, seed: u64) -> Dataset {
    sample_dataset(&mut ChaCha8Rng::seed_from_u64(seed), &discriminatory_pmf(), n)
}

/// A configuration whose only feasible kernel is the identity.
fn frozen() -> PipelineConfig {
    let mut cfg = synthetic_config();
    cfg.discrimination = cfg.discrimination.with_epsilon(Epsilon::scalar(5.0));
    cfg.distortion.budget = DistortionBudget::expected(0.0);
    cfg
}

fn fit(cfg: &PipelineConfig, data: &Dataset, dir: &Path) -> std::path::PathBuf {
    let (report, kernel) = pipeline::cmd_fit(cfg, data, dir).unwrap();
    assert_eq!(report.status, SolveStatus::Optimal);
    assert!(kernel.is_some());
    dir.join(pipeline::KERNEL_FILE)
}

#[test]
fn identity_kernel_reproduces_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, d) = (frozen(), data(2_000, 1));
    let kernel = fit(&cfg, &d, dir.path());
    let out = pipeline::cmd_transform(&cfg, &kernel, &d, None, Mode::Train, 3, false, dir.path()).unwrap();
    let (back, fp) = pipeline::read_transformed(&cfg, &out).unwrap();
    assert_eq!(fp, cfg.fingerprint());
    assert_eq!(back.records(), d.records());

    let report = pipeline::cmd_audit(&cfg, &d, AuditInput::Transformed(&out), false, dir.path()).unwrap();
    assert!(!report.cohorts.is_empty());
    assert!(report.cohorts.iter().all(|c| c.delta == 0.0));
    assert_eq!(report.distortion.as_ref().unwrap().max, 0.0);
    for f in [pipeline::AUDIT_TEXT_FILE, pipeline::AUDIT_JSON_FILE, pipeline::COHORT_FILE] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.contains(&cfg.fingerprint()), "{f}");
    }
}

#[test]
fn fitted_kernel_meets_the_tolerance_in_an_analytic_audit() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, d) = (synthetic_config(), data(5_000, 2));
    let kernel = fit(&cfg, &d, dir.path());
    let report = pipeline::cmd_audit(&cfg, &d, AuditInput::Kernel(&kernel), false, dir.path()).unwrap();
    assert!(report.before.max_target_distance > 0.1);
    assert!(report.after.max_target_distance <= 0.1 + 1e-6);
    assert!(report.robustness.is_some());
}

#[test]
fn apply_mode_needs_no_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, d) = (synthetic_config(), data(3_000, 4));
    let kernel = fit(&cfg, &d, dir.path());
    let csv = dir.path().join("unlabeled.csv");
    write_csv(&d.without_outcomes(), &csv);
    let unlabeled = cfg.read_data(&csv).unwrap();
    assert!(!unlabeled.is_labeled());

    let out = pipeline::cmd_transform(&cfg, &kernel, &unlabeled, Some(&d), Mode::Apply, 9, false, dir.path()).unwrap();
    let (back, _) = pipeline::read_transformed(&cfg, &out).unwrap();
    assert_eq!(back.len(), unlabeled.len());
    assert!(back.records().iter().zip(unlabeled.records()).all(|(a, b)| a.d == b.d && a.y.is_none()));

    let train = pipeline::cmd_transform(&cfg, &kernel, &unlabeled, None, Mode::Train, 9, false, dir.path());
    assert!(matches!(train, Err(Error::MissingOutcome(0))));
    let no_training = pipeline::cmd_transform(&cfg, &kernel, &unlabeled, None, Mode::Apply, 9, false, dir.path());
    assert!(matches!(no_training, Err(Error::Config(_))));
}

#[test]
fn provenance_is_checked_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, d) = (synthetic_config(), data(2_000, 5));
    let kernel = fit(&cfg, &d, dir.path());
    let mut other = cfg.clone();
    other.discrimination = other.discrimination.with_epsilon(Epsilon::scalar(0.2));
    assert!(matches!(pipeline::load_kernel(&other, &kernel, false), Err(Error::ProvenanceMismatch { .. })));
    assert!(pipeline::load_kernel(&other, &kernel, true).is_ok());

    // seeds and output locations do not change the fingerprint
    let mut reseeded = cfg.clone();
    reseeded.seed = 1234;
    assert!(pipeline::load_kernel(&reseeded, &kernel, false).is_ok());

    let out = pipeline::cmd_transform(&cfg, &kernel, &d, None, Mode::Train, 1, false, dir.path()).unwrap();
    let res = pipeline::cmd_audit(&other, &d, AuditInput::Transformed(&out), false, dir.path());
    assert!(matches!(res, Err(Error::ProvenanceMismatch { .. })));
}

#[test]
fn infeasible_fit_writes_a_report_but_no_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config();
    cfg.discrimination = cfg.discrimination.with_epsilon(Epsilon::scalar(0.0));
    cfg.distortion.budget = DistortionBudget::expected(0.01);
    let (report, kernel) = pipeline::cmd_fit(&cfg, &data(1_000, 6), dir.path()).unwrap();
    assert_eq!(report.status, SolveStatus::Infeasible);
    assert!(kernel.is_none());
    assert!(report.violated.is_some());
    assert!(dir.path().join(pipeline::FIT_REPORT_FILE).exists());
    assert!(!dir.path().join(pipeline::KERNEL_FILE).exists());
}

#[test]
fn sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config();
    let grid = pipeline::parse_grid("0:0.1:0.4").unwrap();
    let r = pipeline::cmd_sweep(&cfg, &data(2_000, 7), &grid, dir.path()).unwrap();
    assert_eq!(r.points.len(), 5);
    assert!(r.monotone);
    let csv = std::fs::read_to_string(dir.path().join(pipeline::SWEEP_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(dir.path().join(pipeline::SWEEP_JSON_FILE).exists());
}

#[test]
fn configuration_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let cfg = synthetic_config();
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(PipelineConfig::load(&path).unwrap(), cfg);
    assert!(matches!(PipelineConfig::load(&dir.path().join("missing.toml")), Err(Error::Io(_))));
}

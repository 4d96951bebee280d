use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::AuditOptions;
use crate::constraints::{DiscriminationSpec, DistortionBudget, DistortionMetric};
use crate::domain::{read_delimited, Dataset, IngestOptions, JointPmf, Schema, Variable};
use crate::error::{Error, Result};
use crate::optimizer::{Objective, ProblemSpec, SofStrategy, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    /// Training data; relative paths resolve against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub ingest: IngestOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionConfig {
    pub metric: DistortionMetric,
    pub budget: DistortionBudget,
}

/// Fit with the transformed outcome depending on the transformed features only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressConfig {
    pub strategy: SofStrategy,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
}

fn default_max_outer() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir() }
    }
}

fn default_name() -> String {
    "custom".into()
}

/// Everything a pipeline run needs, stored as one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub objective: Objective,
    pub input: InputConfig,
    pub variables: Vec<Variable>,
    pub discrimination: DiscriminationSpec,
    pub distortion: DistortionConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppress: Option<SuppressConfig>,
    #[serde(default)]
    pub audit: AuditOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

/// The parts of a configuration that determine the fitted kernel.
#[derive(Serialize)]
struct FingerprintView<'a> {
    objective: &'a Objective,
    ingest: &'a IngestOptions,
    variables: &'a [Variable],
    discrimination: &'a DiscriminationSpec,
    distortion: &'a DistortionConfig,
    solver: &'a SolverSettings,
    suppress: &'a Option<SuppressConfig>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn schema(&self) -> Result<Schema> {
        Schema::new(self.variables.clone())
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            discrimination: self.discrimination.clone(),
            metric: self.distortion.metric.clone(),
            budget: self.distortion.budget.clone(),
            objective: self.objective,
        }
    }

    /// SHA-256 over the kernel-determining settings. Seed, paths and audit
    /// options do not contribute.
    pub fn fingerprint(&self) -> String {
        let view = FingerprintView {
            objective: &self.objective,
            ingest: &self.input.ingest,
            variables: &self.variables,
            discrimination: &self.discrimination,
            distortion: &self.distortion,
            solver: &self.solver,
            suppress: &self.suppress,
        };
        let bytes = serde_json::to_vec(&view).expect("configuration serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks every part that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        let schema = self.schema()?;
        if schema.y_card() != 2 {
            return Err(Error::InvalidSchema("the outcome must be binary".into()));
        }
        // a uniform pmf carries the schema into checks that expect one
        let uniform = JointPmf::from_weights(schema.clone(), vec![1.0; schema.n_cells()])?;
        self.discrimination.validate(&uniform)?;
        self.distortion.metric.compile(&schema)?;
        self.distortion.budget.validate()?;
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) || s.max_iters == 0 || !(s.tie_break >= 0.0) {
            return Err(Error::InvalidParams(format!("bad solver settings {s:?}")));
        }
        if self.suppress.is_some_and(|s| s.max_outer == 0) {
            return Err(Error::InvalidParams("suppress.max_outer must be positive".into()));
        }
        if !(self.audit.beta > 0.0 && self.audit.beta < 1.0) {
            return Err(Error::InvalidParams("audit.beta must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Reads a data file with this configuration's schema and ingestion options.
    pub fn read_data(&self, path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        read_delimited(std::io::BufReader::new(file), &self.schema()?, &self.input.ingest)
    }

    /// The configured training data.
    pub fn training_data(&self) -> Result<Dataset> {
        let path = self.input.path.as_ref().ok_or_else(|| Error::Config("input.path is not set".into()))?;
        self.read_data(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::presets;

    fn small() -> &'static str {
        r#"
objective = "l1"
seed = 7

[input]
delimiter = ";"

[[variables]]
name = "G"
categories = ["a", "b"]
role = "D"

[[variables]]
name = "S"
categories = ["lo", "mid", "hi"]
ordinal = true
role = "X"

[[variables]]
name = "Y"
categories = ["0", "1"]
role = "Y"

[discrimination]
mode = "target_distance"
epsilon = 0.2

[distortion.metric]
combiner = "sum"
attributes = [
    { variable = "S", rule = { kind = "ordinal", steps = [0.0, 1.0, 10000.0] } },
    { variable = "Y", rule = { kind = "table", penalties = [[0.0, 1.0], [1.0, 0.0]] } },
]

[distortion.budget]
mode = "expected"
default = 0.5
per_cell = { 3 = 0.25 }
"#
    }

    #[test]
    fn parses_and_round_trips() {
        let cfg = PipelineConfig::from_toml(small()).unwrap();
        assert_eq!(cfg.input.ingest.delimiter, ';');
        assert_eq!(cfg.discrimination.epsilon.default, 0.2);
        assert_eq!(cfg.distortion.budget.expected_for(3), Some(0.25));
        let text = cfg.to_toml().unwrap();
        let back = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.fingerprint(), cfg.fingerprint());
    }

    #[test]
    fn presets_round_trip() {
        for name in presets::NAMES {
            let cfg = presets::preset(name).unwrap();
            let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn fingerprint_tracks_kernel_settings_only() {
        let cfg = PipelineConfig::from_toml(small()).unwrap();
        let mut other = cfg.clone();
        other.seed = 99;
        other.output.dir = PathBuf::from("elsewhere");
        other.audit.beta = 0.1;
        assert_eq!(other.fingerprint(), cfg.fingerprint());
        other.discrimination.epsilon.default = 0.3;
        assert_ne!(other.fingerprint(), cfg.fingerprint());
        assert_eq!(cfg.fingerprint().len(), 64);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        let bad_metric = small().replace("[0.0, 1.0], [1.0, 0.0]", "[1.0, 1.0], [1.0, 0.0]");
        assert!(PipelineConfig::from_toml(&bad_metric).is_err());
        let bad_var = small().replace(r#"variable = "S""#, r#"variable = "Q""#);
        assert!(matches!(PipelineConfig::from_toml(&bad_var), Err(Error::UnknownVariable(_))));
        assert!(matches!(PipelineConfig::from_toml("objective = 3"), Err(Error::Config(_))));
        let neg = small().replace("epsilon = 0.2", "epsilon = -0.2");
        assert!(PipelineConfig::from_toml(&neg).is_err());
        let full = small().replace("epsilon = 0.2", "epsilon = { default = 0.2, overrides = [{ y = 1, d = 0, value = 0.1 }] }");
        assert_eq!(PipelineConfig::from_toml(&full).unwrap().discrimination.epsilon.get(1, 0, None, None), 0.1);
    }
}

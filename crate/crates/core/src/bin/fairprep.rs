use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairprep::optimizer::SolveStatus;
use fairprep::pipeline::{self, presets, AuditInput, ErrorDocument, Mode, PipelineConfig};
use fairprep::{Error, Result};

#[derive(Parser)]
#[command(name = "fairprep", version, about = "Fit, apply and audit discrimination-controlling data transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Train,
    Apply,
}

#[derive(clap::Args)]
struct Common {
    /// Pipeline configuration (TOML) or a preset name
    #[arg(long)]
    config: String,
    /// Output directory; defaults to the configured one
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Data file; defaults to the configured input path
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the transform kernel
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Randomize records with a fitted kernel
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        mode: CliMode,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        allow_provenance_mismatch: bool,
    },
    /// Report discrimination, utility, distortion and robustness
    Audit {
        #[command(flatten)]
        common: Common,
        /// Audit the exact pushforward through this kernel
        #[arg(long, conflicts_with = "transformed", required_unless_present = "transformed")]
        kernel: Option<PathBuf>,
        /// Audit a file written by `transform`
        #[arg(long)]
        transformed: Option<PathBuf>,
        #[arg(long)]
        allow_provenance_mismatch: bool,
    },
    /// Solve over a grid of discrimination tolerances
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `a,b,c` or `start:step:stop`
        #[arg(long)]
        eps_grid: String,
    },
    /// List presets, or print one as TOML
    Presets { name: Option<String> },
    /// Check a configuration without solving
    Validate {
        #[arg(long)]
        config: String,
    },
}

fn load_config(spec: &str) -> Result<PipelineConfig> {
    match presets::preset(spec) {
        Some(cfg) => Ok(cfg),
        None => PipelineConfig::load(Path::new(spec)),
    }
}

fn setup(common: &Common) -> Result<(PipelineConfig, PathBuf)> {
    let mut cfg = load_config(&common.config)?;
    if let Some(d) = &common.data {
        cfg.input.path = Some(d.clone());
    }
    let out = common.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { common } => {
            let (cfg, out) = setup(&common)?;
            let (report, _) = pipeline::cmd_fit(&cfg, &cfg.training_data()?, &out)?;
            print_json(&report);
            match report.status {
                SolveStatus::Optimal => Ok(()),
                s => Err(Error::Infeasible(format!("solver finished with status {s}"))),
            }
        }
        Command::Transform { common, kernel, mode, seed_override, allow_provenance_mismatch } => {
            let (cfg, out) = setup(&common)?;
            let data = cfg.training_data()?;
            let mode = match mode {
                CliMode::Train => Mode::Train,
                CliMode::Apply => Mode::Apply,
            };
            // the mapper is derived from the training data, which may differ from --data
            let training = match (mode, common.data.is_some()) {
                (Mode::Apply, true) => Some(load_config(&common.config)?.training_data()?),
                (Mode::Apply, false) => Some(data.clone()),
                _ => None,
            };
            let seed = seed_override.unwrap_or(cfg.seed);
            let path = pipeline::cmd_transform(
                &cfg,
                &kernel,
                &data,
                training.as_ref(),
                mode,
                seed,
                allow_provenance_mismatch,
                &out,
            )?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Audit { common, kernel, transformed, allow_provenance_mismatch } => {
            let (cfg, out) = setup(&common)?;
            let input = match (&kernel, &transformed) {
                (Some(k), _) => AuditInput::Kernel(k),
                (None, Some(t)) => AuditInput::Transformed(t),
                (None, None) => return Err(Error::Config("pass --kernel or --transformed".into())),
            };
            let report = pipeline::cmd_audit(&cfg, &cfg.training_data()?, input, allow_provenance_mismatch, &out)?;
            print!("{}", report.render_text());
            Ok(())
        }
        Command::Sweep { common, eps_grid } => {
            let (cfg, out) = setup(&common)?;
            let grid = pipeline::parse_grid(&eps_grid)?;
            let result = pipeline::cmd_sweep(&cfg, &cfg.training_data()?, &grid, &out)?;
            println!("epsilon,status,objective");
            for p in &result.points {
                println!("{},{},{:.6e}", p.epsilon, p.status, p.objective);
            }
            Ok(())
        }
        Command::Presets { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(n) } => {
            let text = presets::preset_text(&n).ok_or_else(|| Error::Config(format!("unknown preset `{n}`")))?;
            print!("{text}");
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let mut summary = serde_json::json!({ "valid": true, "name": cfg.name, "fingerprint": cfg.fingerprint() });
            if cfg.input.path.is_some() {
                summary["records"] = cfg.training_data()?.len().into();
            }
            print_json(&summary);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = ErrorDocument::new(&e);
            eprintln!("{}", serde_json::to_string(&doc).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(doc.exit_code as u8)
        }
    }
}

//! Configuration-driven batch commands: fit, transform, audit and sweep.

mod commands;
mod config;
pub mod presets;

pub use commands::{
    cmd_audit, cmd_fit, cmd_sweep, cmd_transform, exit_code, load_kernel, parse_grid, read_transformed,
    write_transformed, AuditInput, ErrorDocument, FitReport, Mode, SuppressInfo, AUDIT_JSON_FILE, AUDIT_TEXT_FILE,
    COHORT_FILE, FIT_REPORT_FILE, KERNEL_FILE, SWEEP_FILE, SWEEP_JSON_FILE, TRANSFORMED_FILE,
};
pub use config::{DistortionConfig, InputConfig, OutputConfig, PipelineConfig, SuppressConfig};

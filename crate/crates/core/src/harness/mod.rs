//! Experiment runner: configuration, the end-to-end commands and their
//! CSV and text outputs.

mod commands;
mod config;
mod output;

pub use commands::{
    cmd_euler_study, cmd_exact, cmd_optimize_q, cmd_parareal, exact_rows, format_report,
    run_pipeline, ErrorReportRow, PipelineOutput,
};
pub use config::{
    parse_config, CalibrationConfig, ConfigBuilder, ExperimentConfig, Mode, ReferenceKind,
    StudyConfig, KEYS, PRESETS,
};
pub use output::fmt_f64;

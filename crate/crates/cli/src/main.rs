use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pita_core::harness::{self, ConfigBuilder, ExperimentConfig, KEYS};
use pita_core::{ErrorClass, PitaError};

#[derive(Parser)]
#[command(
    name = "pita",
    version,
    about = "Semi-explicit Parareal with epsilon extrapolation"
)]
#[command(after_long_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact solution at the coarse instants (exact.csv)
    Exact(Common),
    /// Explicit Euler subdivision study (psi_<delta>.csv, omega_err.csv)
    EulerStudy(Common),
    /// Parareal, calibration and extrapolation (omega_err_para.csv, solution.csv, report.txt)
    Parareal(Common),
    /// Calibration of q on the first slice (calibration.txt, objective_scan.csv)
    OptimizeQ(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file with dotted keys, applied over the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: paper-sigma
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    threads: Option<usize>,
    /// Annealing seed (key `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (key `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key, e.g. --set parareal.K=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn keys_help() -> String {
    let mut s = String::from("Config keys (default in brackets, none means required):\n");
    for (key, default, meaning) in KEYS {
        let default = if default.is_empty() { "none" } else { default };
        s.push_str(&format!("  {key:<30} {meaning} [{default}]\n"));
    }
    s.push_str("\nExit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.");
    s
}

fn load(common: &Common) -> Result<ExperimentConfig, PitaError> {
    let mut builder = ConfigBuilder::new();
    if let Some(name) = &common.preset {
        builder.preset(name)?;
    }
    if let Some(path) = &common.config {
        builder.merge_file(path)?;
    }
    for assignment in &common.overrides {
        builder.assign(assignment)?;
    }
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| PitaError::Config {
            key: "seed".into(),
            message: "too large".into(),
        })?;
        builder.set("seed", seed);
    }
    if let Some(out) = &common.out {
        builder.set("out", out.display().to_string());
    }
    builder.build()
}

type Runner = fn(&ExperimentConfig) -> pita_core::Result<Vec<PathBuf>>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, PitaError> {
    let (common, cmd): (_, Runner) = match &cli.command {
        Command::Exact(c) => (c, harness::cmd_exact),
        Command::EulerStudy(c) => (c, harness::cmd_euler_study),
        Command::Parareal(c) => (c, harness::cmd_parareal),
        Command::OptimizeQ(c) => (c, harness::cmd_optimize_q),
    };
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| PitaError::Config {
                key: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    let cfg = load(common)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Io => 4,
            })
        }
    }
}

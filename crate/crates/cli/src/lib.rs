//! Command-line frontend: `odometry`, `ground`, `synth` and `eval`.
//!
//! Every command reads a [`RunConfig`] (TOML file, `--set key=value`
//! overrides, then dedicated flags) and writes plain files. Exit codes are
//! 0 on success, 1 for usage errors, 2 for data errors and 3 for numerical
//! failures.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gloam::pipeline::GroundMethod;

pub use config::{Overrides, RunConfig};

/// Scan rate assumed when an input directory has no `times.txt`.
pub const DEFAULT_RATE_HZ: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<gloam::Error> for CliError {
    fn from(e: gloam::Error) -> Self {
        use gloam::Error as E;
        match e {
            E::DegeneratePlane(_) | E::InsufficientConstraints { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gloam", version, about = "Ground-aware lidar odometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Run config file (TOML).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `pipeline.segment.connect_angle_deg=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sensor config file; the VLP-16 model is used without one.
    #[arg(long)]
    pub sensor: Option<PathBuf>,
    /// Ground extractor: clustered, lego or gpf.
    #[arg(long)]
    pub method: Option<GroundMethod>,
}

impl CommonArgs {
    fn overrides(&self, input: Option<PathBuf>, output: Option<PathBuf>) -> Overrides {
        Overrides {
            config: self.config.clone(),
            set: self.set.clone(),
            seed: self.seed,
            sensor: self.sensor.clone(),
            input,
            output,
            method: self.method,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline over a directory of scans.
    Odometry {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory of `.bin` or `.pcd` scans, read in filename order.
        #[arg(long, short = 'i')]
        input: Option<PathBuf>,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Run one ground extractor on one scan.
    Ground {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        scan: PathBuf,
        /// Per-point truth CSV; defaults to `truth/<stem>.csv` beside the scan.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Directory for the mask image and `ground_metrics.csv`.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Canned scene name or a scene TOML file.
        #[arg(long)]
        scene: String,
        /// `straight:N[:STEP]`, `loop:N` or a TUM file of vehicle poses.
        #[arg(long)]
        waypoints: String,
        /// Range noise standard deviation in meters.
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Drift of an estimated trajectory against ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "run")]
        run_id: String,
        #[arg(long, default_value = "clustered")]
        method: String,
        /// Also write a metrics CSV row here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command,
/// writing its report to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Odometry {
            common,
            input,
            output,
        } => {
            let config = RunConfig::resolve(&common.overrides(input, output))?;
            let summary = commands::odometry(&config)?;
            writeln!(
                out,
                "{} scans, {} fallbacks, {} map warnings, {:.1} ms mean per scan",
                summary.scans, summary.fallbacks, summary.map_warnings, summary.mean_ms
            )
            .map_err(io_err)
        }
        Command::Ground {
            common,
            scan,
            truth,
            output,
        } => {
            let config = RunConfig::resolve(&common.overrides(None, output))?;
            let row = commands::ground(&config, &scan, truth.as_deref())?;
            writeln!(out, "{}\n{row}", commands::GROUND_CSV_HEADER).map_err(io_err)
        }
        Command::Synth {
            common,
            scene,
            waypoints,
            noise,
            output,
        } => {
            let config = RunConfig::resolve(&common.overrides(None, output))?;
            let n = commands::synth(&config, &scene, &waypoints, noise)?;
            writeln!(out, "wrote {n} scans").map_err(io_err)
        }
        Command::Eval {
            estimate,
            truth,
            run_id,
            method,
            csv,
        } => {
            let report = commands::eval(&estimate, &truth, &run_id, &method, csv.as_deref())?;
            write!(out, "{report}").map_err(io_err)
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write report: {e}"))
}

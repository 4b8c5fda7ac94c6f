use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weldsense::io::FormatError;
use weldsense::Exec;

mod analyze;
mod calibrate;
mod config;
mod obs;
mod phase;
mod reconstruct;
mod simulate;

/// Calibration, reconstruction and weld-profile analytics for laser and
/// fringe sensors.
#[derive(Debug, Parser)]
#[command(name = "weldsense", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// JSON file with command settings; merged over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw (required by `simulate`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Tolerances {
    /// Largest accepted gap between intersecting rays (mm).
    #[arg(long = "tol-gap", global = true, default_value_t = 1.0)]
    pub gap: f64,
    /// Misalignment threshold on shoulder asymmetry (mm).
    #[arg(long = "tol-asym", global = true, default_value_t = 1.0)]
    pub asym: f64,
    /// Displacement threshold on baseline offset (mm).
    #[arg(long = "tol-disp", global = true, default_value_t = 0.5)]
    pub disp: f64,
    /// Height-mutation threshold between frames (mm).
    #[arg(long = "tol-jump", global = true, default_value_t = 0.5)]
    pub jump: f64,
    /// Pool height tolerance for penetration classification (mm).
    #[arg(long = "tol-h", global = true, default_value_t = 0.2)]
    pub h: f64,
    /// Pool width tolerance for penetration classification (mm).
    #[arg(long = "tol-w", global = true, default_value_t = 0.5)]
    pub w: f64,
    /// Minimum fringe modulation for a valid phase pixel.
    #[arg(long = "tol-mod", global = true, default_value_t = weldsense::fringe::DEFAULT_MODULATION_EPS)]
    pub modulation: f64,
}

impl Tolerances {
    fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("tol-gap", self.gap),
            ("tol-asym", self.asym),
            ("tol-disp", self.disp),
            ("tol-jump", self.jump),
            ("tol-h", self.h),
            ("tol-w", self.w),
            ("tol-mod", self.modulation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scene to observations, ground truth and metadata.
    Simulate(simulate::SimulateArgs),
    /// Calibrate a diffuse or specular sensor from observations.
    Calibrate(calibrate::CalibrateArgs),
    /// Reconstruct a point cloud from observations and a calibration.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Detect bead defects in laser profiles.
    Analyze(analyze::AnalyzeArgs),
    /// Retrieve (and optionally unwrap) fringe phase from images.
    Phase(phase::PhaseArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or files: exit code 2.
    Usage(String),
    Format(FormatError),
    /// Numerical or precondition failure: exit code 3.
    Numeric(weldsense::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Format(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Format(e) => write!(f, "{e}"),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Format(e)
    }
}

impl From<weldsense::Error> for CliError {
    fn from(e: weldsense::Error) -> Self {
        CliError::Numeric(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub struct Context {
    pub global: Global,
    pub exec: Exec,
}

fn setup(global: Global) -> CliResult<Context> {
    global.tol.validate()?;
    let exec = match global.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(1) => Exec::Sequential,
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            Exec::default()
        }
        None => Exec::default(),
    };
    Ok(Context { global, exec })
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = setup(cli.global)?;
    match cli.command {
        Command::Simulate(a) => simulate::run(&ctx, a),
        Command::Calibrate(a) => calibrate::run(&ctx, a),
        Command::Reconstruct(a) => reconstruct::run(&ctx, a),
        Command::Analyze(a) => analyze::run(&ctx, a),
        Command::Phase(a) => phase::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

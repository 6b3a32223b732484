use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "diffeoraptor", version, about = "Diffeomorphic volumetric registration")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register a moving volume onto a fixed volume.
    Register(RegisterArgs),
    /// Compare label maps.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Histogram of log10 det J for a displacement field.
    Jacobian(JacobianArgs),
    /// Write a synthetic volume and its label map.
    Phantom(PhantomArgs),
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    #[arg(long)]
    pub fixed: PathBuf,
    #[arg(long)]
    pub moving: PathBuf,
    /// raptor or ssd; overrides the config file.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out_warped: PathBuf,
    /// Inverse-map displacement as a 3-component NIfTI in mm.
    #[arg(long)]
    pub out_field: PathBuf,
    /// Energy trace as CSV.
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    /// Run summary as JSON; printed to standard output when omitted.
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Setting overrides such as `step_size=0.1`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum EvaluateCommand {
    /// Dice overlap of one label; prints `label,dice,voxels_a,voxels_b`.
    Dice(DiceArgs),
}

#[derive(Args, Debug)]
pub struct DiceArgs {
    #[arg(long)]
    pub labels_a: PathBuf,
    #[arg(long)]
    pub labels_b: PathBuf,
    #[arg(long)]
    pub label: u32,
    /// Print a header line before the row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct JacobianArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub bin_width: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// sphere, checker or ramp.
    #[arg(long)]
    pub kind: String,
    /// `N` or `NX,NY,NZ`.
    #[arg(long)]
    pub dims: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_labels: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Sphere radius in voxels.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Checker period in voxels.
    #[arg(long)]
    pub period: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Register(a) => commands::register(&a),
        Command::Evaluate(EvaluateCommand::Dice(a)) => commands::dice(&a),
        Command::Jacobian(a) => commands::jacobian(&a),
        Command::Phantom(a) => commands::phantom(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

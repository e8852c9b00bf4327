use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trajectory_core::Algorithm;

#[derive(Debug, Parser)]
#[command(
    name = "trajrecon",
    version,
    about = "Reconstruct bus trajectories from GPS heartbeat data",
    after_help = "Set TRAJ_LOG (error, warn, info, debug, trace) to control logging."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Snap heartbeats onto the route and write the matched table.
    Match(RunArgs),
    /// Write the cleaned time/distance series.
    Frame(RunArgs),
    /// Fit one trajectory and write uniformly sampled x, v, a.
    Reconstruct(RunArgs),
    /// Fit trajectories and write the JSON validation report.
    Evaluate(RunArgs),
    /// Evaluate a fitted trajectory at chosen times.
    Sample(SampleArgs),
    /// Run every stage and write all artifacts to --out.
    Pipeline(RunArgs),
    /// Generate a synthetic trip with ground truth.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeartbeatFormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Heartbeat CSV or JSON-lines file; repeat for several files.
    #[arg(long, value_name = "PATH")]
    pub heartbeats: Vec<PathBuf>,
    /// Heartbeat format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub heartbeat_format: Option<HeartbeatFormatArg>,
    /// Route pattern GeoJSON.
    #[arg(long, value_name = "PATH")]
    pub route: Option<PathBuf>,
    /// AVL door events CSV.
    #[arg(long, value_name = "PATH")]
    pub avl: Option<PathBuf>,
    /// lseg, pchip, locreg or locreg-pchip.
    #[arg(long, value_name = "NAME")]
    pub algorithm: Option<Algorithm>,
    /// Output sample rate for trajectory tables.
    #[arg(long, value_name = "HZ")]
    pub sample_hz: Option<f64>,
    #[arg(long, value_name = "M")]
    pub max_offset_m: Option<f64>,
    #[arg(long, value_name = "N")]
    pub lookahead_segments: Option<usize>,
    /// LOCREG neighbourhood size.
    #[arg(long, value_name = "K")]
    pub bandwidth_points: Option<usize>,
    /// LOCREG polynomial degree (0 to 3).
    #[arg(long, value_name = "D")]
    pub degree: Option<usize>,
    /// Stop-speed thresholds in mph, comma separated.
    #[arg(long, value_name = "MPH", value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Acceleration sampling rate for plausibility checks.
    #[arg(long, value_name = "HZ")]
    pub accel_hz: Option<f64>,
    /// Output file (or directory for `pipeline`); stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Trips processed concurrently by `pipeline`.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Trip to process when the input holds several.
    #[arg(long, value_name = "ID")]
    pub trip: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Seconds into the trip, comma separated.
    #[arg(long, value_name = "T", value_delimiter = ',', required = true)]
    pub at: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Simulation spec JSON; the standard trip when omitted.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    #[arg(long, visible_alias = "out", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Overrides the seed in the simulation file.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

//! `replaykey`: ingest interaction logs, find key frames, evaluate them
//! against ground truth, simulate viewers, or run the HTTP service.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 no peaks found.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "replaykey", version, about = "Key frame detection from viewer replay interactions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load an event log into a store, dropping duplicate event ids.
    Ingest(IngestArgs),
    /// Compute ranked key frames and the thumbnail for one video.
    Analyze(AnalyzeArgs),
    /// Compare detected peaks against ground-truth segments.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic event log for a ground truth.
    Simulate(SimulateArgs),
    /// Run the HTTP ingestion and analysis service.
    Serve(ServeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Event log (.jsonl).
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Register every video in the log with this duration.
    #[arg(long)]
    pub duration: Option<u32>,
    /// Genre used with --duration: lecture, howto or other.
    #[arg(long, requires = "duration")]
    pub genre: Option<replaykey_core::Genre>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub video: String,
    /// Smoothing window in seconds (default: from the video genre).
    #[arg(long)]
    pub window: Option<u32>,
    /// Peaks must exceed this smoothed value.
    #[arg(long, default_value_t = 0.0)]
    pub min_peak: f64,
    #[arg(long)]
    pub max_peaks: Option<usize>,
    /// Look-back from each peak for its candidate window, seconds.
    #[arg(long, default_value_t = replaykey_core::peaks::DEFAULT_CANDIDATE_WINDOW_S)]
    pub candidate_window: u32,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Video to evaluate (default: the truth file's video_id).
    #[arg(long)]
    pub video: Option<String>,
    /// Ground-truth segments file (.json).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = replaykey_core::eval::DEFAULT_TOLERANCE_S)]
    pub tolerance: u32,
    #[arg(long)]
    pub window: Option<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub min_peak: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = replaykey_core::sim::DEFAULT_COHORT)]
    pub users: u32,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Mean replays per user and segment.
    #[arg(long, default_value_t = 2.0)]
    pub replay_rate: f64,
    /// Standard deviation of seek landing noise, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub seek_noise: f64,
    /// Mean forward skips per user and segment.
    #[arg(long, default_value_t = 3.0)]
    pub forward_rate: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "REPLAYKEY_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "REPLAYKEY_STORE")]
    pub store: PathBuf,
    /// Allow cross-origin requests (for the browser player).
    #[arg(long)]
    pub cors: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;

use replaykey_core::analysis::{self, AnalysisError, AnalysisParams};
use replaykey_core::event::{load_log_reader, serialize_event, LoadMode, VideoMeta};
use replaykey_core::eval::GroundTruth;
use replaykey_core::sim::{simulate_sessions, SimulationConfig};
use replaykey_service::{EventStore, ServeConfig};
use thiserror::Error;

use crate::{AnalyzeArgs, Command, EvaluateArgs, Format, IngestArgs, ServeArgs, SimulateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NoPeaks(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::NoPeaks(_) => 3,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(data)
        }
    }
}

fn open_store(path: &Path) -> Result<EventStore, CliError> {
    EventStore::open(path).map_err(|e| data(format!("store {}: {e}", path.display())))
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(args) => ingest(args),
        Command::Analyze(args) => analyze(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Simulate(args) => simulate(args),
        Command::Serve(args) => serve(args),
    }
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let file = File::open(&args.log).map_err(|e| data(format!("{}: {e}", args.log.display())))?;
    let mode = if args.lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let loaded = load_log_reader(BufReader::new(file), mode).map_err(|e| data(format!("{}: {e}", args.log.display())))?;
    let store = open_store(&args.store)?;

    if let Some(duration_s) = args.duration {
        let ids: BTreeSet<&str> = loaded.events.iter().map(|e| e.video_id.as_str()).collect();
        for id in ids {
            let meta = VideoMeta { video_id: id.to_string(), duration_s, genre: args.genre, title: None };
            store.register_video(&meta).map_err(data)?;
        }
    }
    let outcome = store.append_events(&loaded.events).map_err(data)?;
    let summary = serde_json::json!({
        "accepted": outcome.accepted,
        "duplicates": outcome.duplicates + loaded.duplicates,
        "skipped": loaded.skipped,
    });
    write_output(args.out.as_deref(), &format!("{summary}\n"))
}

fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let store = open_store(&args.store)?;
    // A video the store has never seen simply has no interaction data yet.
    let snapshot = store.snapshot(&args.video).ok_or_else(|| {
        CliError::NoPeaks(format!("no interaction data for {:?}: collect viewer interactions first", args.video))
    })?;
    let meta = snapshot.meta.ok_or_else(|| {
        data(format!("video {:?} has no registered duration; ingest with --duration", args.video))
    })?;
    let params = AnalysisParams {
        window_s: args.window,
        min_value: args.min_peak,
        max_peaks: args.max_peaks,
        candidate_window_s: args.candidate_window,
    };
    let result = match analysis::analyze_keyframes(&snapshot.events, &meta, &params) {
        Ok(r) => r,
        Err(e) if e.is_no_peaks() => {
            return Err(CliError::NoPeaks(format!(
                "no replay peaks for {:?}: collect more viewer interactions (thumbnail falls back to 0s)",
                args.video
            )))
        }
        Err(e) => return Err(analysis_error(e)),
    };
    let text = match args.output.format {
        Format::Json => analysis::keyframes_json(&meta.video_id, &result),
        Format::Table => analysis::keyframes_table(&meta.video_id, &result),
    };
    write_output(args.output.out.as_deref(), &text)
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Series(replaykey_core::series::SeriesError::BadWindow { .. }) => CliError::Usage(e.to_string()),
        other => data(other),
    }
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut truth = GroundTruth::load(&args.truth).map_err(data)?;
    if args.tolerance < 1 {
        return Err(CliError::Usage("--tolerance must be at least 1".into()));
    }
    if let Some(video) = args.video {
        truth.video_id = video;
    }
    let store = open_store(&args.store)?;
    let snapshot = store.snapshot(&truth.video_id);
    let (meta, events) = match snapshot {
        Some(s) => (s.meta, s.events),
        None => (None, Vec::new()),
    };
    let report = analysis::evaluate_events(&events, &truth, meta.as_ref(), args.window, args.tolerance, args.min_peak)
        .map_err(analysis_error)?;
    let text = match args.output.format {
        Format::Json => analysis::report_json(&report),
        Format::Table => report.to_table(),
    };
    write_output(args.output.out.as_deref(), &text)
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let truth = GroundTruth::load(&args.truth).map_err(data)?;
    let config = SimulationConfig {
        n_users: args.users,
        replays_per_segment_mean: args.replay_rate,
        seek_noise_sigma_s: args.seek_noise,
        forward_skip_rate: args.forward_rate,
        ..SimulationConfig::for_truth(&truth, args.users, args.seed)
    };
    let events = simulate_sessions(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut text = String::new();
    for e in &events {
        text.push_str(&serialize_event(e));
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(data)?;
    let config = ServeConfig { addr: args.addr, store_root: args.store, cors: args.cors };
    runtime
        .block_on(replaykey_service::serve(config, |bound| {
            println!("listening on http://{bound}");
            let _ = io::stdout().flush();
        }))
        .map_err(data)
}

//! End-to-end pipelines over stored events. The CLI and the HTTP service both
//! render through here so their bodies are identical.

use serde::Serialize;
use thiserror::Error;

use crate::eval::{self, EvalError, EvaluationReport, GroundTruth};
use crate::event::{InteractionEvent, VideoMeta};
use crate::peaks::{self, KeyframeResult, PeakError, DEFAULT_CANDIDATE_WINDOW_S};
use crate::series::{self, ActivitySeries, SeriesError};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Peaks(#[from] PeakError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("truth duration {truth}s differs from registered duration {registered}s for {video_id}")]
    DurationMismatch { video_id: String, truth: u32, registered: u32 },
}

impl AnalysisError {
    pub fn is_no_peaks(&self) -> bool {
        matches!(self, AnalysisError::Peaks(PeakError::NoPeaks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    /// Smoothing width; the video's genre default when unset.
    pub window_s: Option<u32>,
    /// Peaks must exceed this value.
    pub min_value: f64,
    /// Keep only the top N ranked peaks.
    pub max_peaks: Option<usize>,
    pub candidate_window_s: u32,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams { window_s: None, min_value: 0.0, max_peaks: None, candidate_window_s: DEFAULT_CANDIDATE_WINDOW_S }
    }
}

/// Raw series, or smoothed with the explicit window or the genre default.
pub fn interest_series(
    events: &[InteractionEvent],
    meta: &VideoMeta,
    window_s: Option<u32>,
) -> Result<ActivitySeries, AnalysisError> {
    let raw = series::build_replay_series(events, meta)?;
    // Genre defaults shrink to fit very short videos; explicit windows do not.
    let window = window_s.unwrap_or_else(|| meta.default_window_s().min(raw.len() as u32));
    Ok(series::smooth(&raw, window)?)
}

pub fn analyze_keyframes(
    events: &[InteractionEvent],
    meta: &VideoMeta,
    params: &AnalysisParams,
) -> Result<KeyframeResult, AnalysisError> {
    let smoothed = interest_series(events, meta, params.window_s)?;
    let found = peaks::find_peaks(&smoothed, params.min_value)?;
    let mut ranked = peaks::rank_peaks(&found);
    if let Some(n) = params.max_peaks {
        ranked.truncate(n);
    }
    Ok(peaks::keyframe_windows(&ranked, params.candidate_window_s)?)
}

#[derive(Serialize)]
struct PeakExport {
    time_s: u32,
    value: f64,
    rank: u32,
    window: [u32; 2],
}

#[derive(Serialize)]
struct KeyframeExport<'a> {
    video_id: &'a str,
    thumbnail_time_s: u32,
    peaks: Vec<PeakExport>,
}

/// JSON export of a key frame result, pretty-printed with a trailing newline.
pub fn keyframes_json(video_id: &str, result: &KeyframeResult) -> String {
    let export = KeyframeExport {
        video_id,
        thumbnail_time_s: result.thumbnail_time_s,
        peaks: result
            .peaks
            .iter()
            .zip(&result.windows)
            .map(|(p, w)| PeakExport { time_s: p.time_s, value: p.value, rank: p.rank, window: [w.start_s, w.end_s] })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&export).expect("export is serializable");
    s.push('\n');
    s
}

/// Plain-text key frame listing.
pub fn keyframes_table(video_id: &str, result: &KeyframeResult) -> String {
    let mut out = format!("{video_id}: thumbnail at {}s\nrank  time_s  value  window\n", result.thumbnail_time_s);
    for (p, w) in result.peaks.iter().zip(&result.windows) {
        out.push_str(&format!(
            "{:>4}  {:>6}  {:>5}  [{}, {}]\n",
            p.rank,
            p.time_s,
            eval::format_value(p.value),
            w.start_s,
            w.end_s
        ));
    }
    out
}

/// Evaluates stored events against a ground truth. The truth supplies the
/// duration; a registered meta, when given, must agree with it and supplies
/// the genre default window.
pub fn evaluate_events(
    events: &[InteractionEvent],
    truth: &GroundTruth,
    meta: Option<&VideoMeta>,
    window_s: Option<u32>,
    tolerance_s: u32,
    min_value: f64,
) -> Result<EvaluationReport, AnalysisError> {
    truth.validate()?;
    let meta = match meta {
        Some(m) if m.duration_s != truth.duration_s => {
            return Err(AnalysisError::DurationMismatch {
                video_id: truth.video_id.clone(),
                truth: truth.duration_s,
                registered: m.duration_s,
            })
        }
        Some(m) => m.clone(),
        None => VideoMeta::new(truth.video_id.clone(), truth.duration_s),
    };
    let smoothed = interest_series(events, &meta, window_s)?;
    Ok(eval::evaluate(&smoothed, &truth.segments, tolerance_s, min_value)?)
}

/// Pretty JSON report with a trailing newline.
pub fn report_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report is serializable");
    s.push('\n');
    s
}

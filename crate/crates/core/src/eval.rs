//! Ground-truth segments, the pulse series, peak-to-segment matching and the
//! distance report.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::peaks::{self, Peak, PeakError};
use crate::series::{ActivitySeries, SeriesKind};

/// Default match tolerance in seconds.
pub const DEFAULT_TOLERANCE_S: u32 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("segment {label} [{start_s}, {end_s}) does not fit a {duration_s}s video")]
    SegmentOutOfRange { label: String, start_s: u32, end_s: u32, duration_s: u32 },
    #[error("segments {first} and {second} overlap")]
    OverlappingSegments { first: String, second: String },
    #[error("segments are not sorted by start ({label})")]
    UnsortedSegments { label: String },
    #[error("duration_s must be at least 1")]
    BadDuration,
    #[error("tolerance_s must be at least 1")]
    BadTolerance,
    #[error("invalid ground truth file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Peaks(#[from] PeakError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticSegment {
    pub label: String,
    pub start_s: u32,
    /// Exclusive.
    pub end_s: u32,
}

impl SemanticSegment {
    pub fn new(label: impl Into<String>, start_s: u32, end_s: u32) -> Self {
        SemanticSegment { label: label.into(), start_s, end_s }
    }
}

/// Ground-truth file contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub video_id: String,
    pub duration_s: u32,
    pub segments: Vec<SemanticSegment>,
}

impl GroundTruth {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let truth: GroundTruth = serde_json::from_str(text).map_err(|e| EvalError::Malformed(e.to_string()))?;
        truth.validate()?;
        Ok(truth)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Segments must fit the video, be sorted by start and not overlap.
    pub fn validate(&self) -> Result<(), EvalError> {
        validate_segments(&self.segments, self.duration_s)
    }
}

pub fn validate_segments(segments: &[SemanticSegment], duration_s: u32) -> Result<(), EvalError> {
    if duration_s < 1 {
        return Err(EvalError::BadDuration);
    }
    for s in segments {
        if s.start_s >= s.end_s || s.end_s > duration_s {
            return Err(EvalError::SegmentOutOfRange {
                label: s.label.clone(),
                start_s: s.start_s,
                end_s: s.end_s,
                duration_s,
            });
        }
    }
    for pair in segments.windows(2) {
        if pair[1].start_s < pair[0].start_s {
            return Err(EvalError::UnsortedSegments { label: pair[1].label.clone() });
        }
        if pair[1].start_s < pair[0].end_s {
            return Err(EvalError::OverlappingSegments { first: pair[0].label.clone(), second: pair[1].label.clone() });
        }
    }
    Ok(())
}

/// 0/1 series marking `start_s <= t < end_s` of every segment.
pub fn build_pulse_series(
    video_id: &str,
    segments: &[SemanticSegment],
    duration_s: u32,
) -> Result<ActivitySeries, EvalError> {
    let mut sorted = segments.to_vec();
    sorted.sort_by_key(|s| s.start_s);
    validate_segments(&sorted, duration_s)?;
    let mut cells = vec![0.0; duration_s as usize];
    for s in &sorted {
        cells[s.start_s as usize..s.end_s as usize].fill(1.0);
    }
    Ok(ActivitySeries::from_cells(video_id, SeriesKind::Pulse, cells, None).expect("pulse cells are valid"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub start_s: u32,
    pub peak_time_s: Option<u32>,
    /// `peak_time_s - start_s`; negative when the peak precedes the segment.
    pub signed_distance_s: Option<i64>,
    pub peak_value: Option<f64>,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub video_id: String,
    pub rows: Vec<ReportRow>,
    pub detected: usize,
    pub detection_rate: f64,
    pub thumbnail_time_s: u32,
    /// Set when no peak existed and the thumbnail fell back to time 0.
    pub thumbnail_fallback: bool,
    pub tolerance_s: u32,
    pub smoothing_window_s: Option<u32>,
}

/// Pairs peaks to segments one-to-one, nearest first.
///
/// All (segment, peak) pairs are visited by increasing `|peak - start|`, then
/// segment order, then peak order; a pair is taken when neither side is used
/// yet. A segment is detected when its distance is strictly below
/// `tolerance_s`. Rows follow segment order.
pub fn match_peaks(peaks: &[Peak], segments: &[SemanticSegment], tolerance_s: u32) -> Vec<ReportRow> {
    let mut pairs: Vec<(u64, usize, usize)> = Vec::with_capacity(peaks.len() * segments.len());
    for (si, s) in segments.iter().enumerate() {
        for (pi, p) in peaks.iter().enumerate() {
            pairs.push(((i64::from(p.time_s) - i64::from(s.start_s)).unsigned_abs(), si, pi));
        }
    }
    pairs.sort_unstable();

    let mut seg_match: Vec<Option<usize>> = vec![None; segments.len()];
    let mut peak_used = vec![false; peaks.len()];
    let mut remaining = segments.len().min(peaks.len());
    for (_, si, pi) in pairs {
        if remaining == 0 {
            break;
        }
        if seg_match[si].is_none() && !peak_used[pi] {
            seg_match[si] = Some(pi);
            peak_used[pi] = true;
            remaining -= 1;
        }
    }

    segments
        .iter()
        .zip(seg_match)
        .map(|(s, m)| match m {
            Some(pi) => {
                let p = peaks[pi];
                let d = i64::from(p.time_s) - i64::from(s.start_s);
                ReportRow {
                    label: s.label.clone(),
                    start_s: s.start_s,
                    peak_time_s: Some(p.time_s),
                    signed_distance_s: Some(d),
                    peak_value: Some(p.value),
                    detected: d.unsigned_abs() < u64::from(tolerance_s),
                }
            }
            None => ReportRow {
                label: s.label.clone(),
                start_s: s.start_s,
                peak_time_s: None,
                signed_distance_s: None,
                peak_value: None,
                detected: false,
            },
        })
        .collect()
}

/// Fraction of rows detected; 0 when there are no rows.
pub fn detection_rate(rows: &[ReportRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.detected).count() as f64 / rows.len() as f64
}

/// Finds, ranks and matches peaks of a smoothed series against the segments.
pub fn evaluate(
    series: &ActivitySeries,
    segments: &[SemanticSegment],
    tolerance_s: u32,
    min_value: f64,
) -> Result<EvaluationReport, EvalError> {
    if tolerance_s < 1 {
        return Err(EvalError::BadTolerance);
    }
    validate_segments(segments, series.len() as u32)?;
    let found = peaks::find_peaks(series, min_value)?;
    let ranked = peaks::rank_peaks(&found);
    let (thumbnail_time_s, thumbnail_fallback) = match peaks::select_thumbnail(&ranked) {
        Ok(p) => (p.time_s, false),
        Err(PeakError::NoPeaks) => (0, true),
        Err(e) => return Err(e.into()),
    };
    let rows = match_peaks(&found, segments, tolerance_s);
    let detected = rows.iter().filter(|r| r.detected).count();
    Ok(EvaluationReport {
        video_id: series.video_id().to_string(),
        detection_rate: detection_rate(&rows),
        detected,
        rows,
        thumbnail_time_s,
        thumbnail_fallback,
        tolerance_s,
        smoothing_window_s: series.smoothing_window_s(),
    })
}

/// Peak values print as integers when whole, else with up to two decimals.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl EvaluationReport {
    /// Aligned text table; each matched cell reads `distance (start) [peak value]`.
    pub fn to_table(&self) -> String {
        let cells: Vec<(String, String, &str)> = self
            .rows
            .iter()
            .map(|r| {
                let cell = match (r.signed_distance_s, r.peak_value) {
                    (Some(d), Some(v)) => format!("{d} ({}) [{}]", r.start_s, format_value(v)),
                    _ => format!("- ({}) [-]", r.start_s),
                };
                (r.label.clone(), cell, if r.detected { "yes" } else { "no" })
            })
            .collect();
        let label_w = cells.iter().map(|c| c.0.len()).chain(["Segment".len()]).max().unwrap_or(0);
        let cell_w = cells.iter().map(|c| c.1.len()).chain([self.video_id.len()]).max().unwrap_or(0);

        let mut out = String::new();
        let _ = writeln!(out, "{:<label_w$}  {:>cell_w$}  detected", "Segment", self.video_id);
        for (label, cell, det) in &cells {
            let _ = writeln!(out, "{label:<label_w$}  {cell:>cell_w$}  {det}");
        }
        let _ = writeln!(
            out,
            "detection rate {}/{} = {:.1}% (tolerance {}s)",
            self.detected,
            self.rows.len(),
            self.detection_rate * 100.0,
            self.tolerance_s
        );
        let _ = writeln!(
            out,
            "thumbnail {}s{}",
            self.thumbnail_time_s,
            if self.thumbnail_fallback { " (fallback: no peaks)" } else { "" }
        );
        out
    }
}

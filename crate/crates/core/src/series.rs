//! Per-second activity series: the raw replay count array and its smoothed
//! moving average (the user interest function).

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Action, InteractionEvent, VideoMeta};

/// Seconds rewound by one replay press.
pub const REPLAY_SPAN_S: u32 = 30;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("event {event_id} belongs to video {found:?}, expected {expected:?}")]
    VideoMismatch { event_id: String, expected: String, found: String },
    #[error("event {event_id} cue time {cue_time_s}s is past the video end ({duration_s}s)")]
    CueOutOfRange { event_id: String, cue_time_s: f64, duration_s: u32 },
    #[error("smoothing window {window_s}s invalid for a series of {len} cells")]
    BadWindow { window_s: u32, len: usize },
    #[error("only raw series can be smoothed, got {0}")]
    WrongKind(SeriesKind),
    #[error("series cells must be finite and non-negative (cell {index} = {value})")]
    NegativeCell { index: usize, value: f64 },
    #[error("series must have at least one cell")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    /// Integer replay counts.
    Raw,
    Smoothed,
    /// 0/1 ground-truth segment indicator.
    Pulse,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::Raw => "raw",
            SeriesKind::Smoothed => "smoothed",
            SeriesKind::Pulse => "pulse",
        })
    }
}

/// One value per video second; index `t` covers `[t, t+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySeries {
    video_id: String,
    kind: SeriesKind,
    cells: Vec<f64>,
    smoothing_window_s: Option<u32>,
}

impl ActivitySeries {
    /// Wraps precomputed cells. `window_s` is kept only for smoothed series.
    pub fn from_cells(
        video_id: impl Into<String>,
        kind: SeriesKind,
        cells: Vec<f64>,
        window_s: Option<u32>,
    ) -> Result<Self, SeriesError> {
        if cells.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some((index, &value)) = cells.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(SeriesError::NegativeCell { index, value });
        }
        let smoothing_window_s = if kind == SeriesKind::Smoothed { window_s } else { None };
        Ok(ActivitySeries { video_id: video_id.into(), kind, cells, smoothing_window_s })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn smoothing_window_s(&self) -> Option<u32> {
        self.smoothing_window_s
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Two-column `t<TAB>value` export headed by `# video_id kind window`.
    pub fn to_tsv(&self) -> String {
        let window = self.smoothing_window_s.map_or_else(|| "-".to_string(), |w| w.to_string());
        let mut out = format!("# {} {} {}\n", self.video_id, self.kind, window);
        for (t, v) in self.cells.iter().enumerate() {
            let _ = writeln!(out, "{t}\t{v}");
        }
        out
    }
}

/// Builds the raw replay series: every `SeekBack30` at cue `t` adds one to
/// cells `max(0, floor(t) - 30) .. floor(t)`. Other actions add nothing.
pub fn build_replay_series(events: &[InteractionEvent], meta: &VideoMeta) -> Result<ActivitySeries, SeriesError> {
    let k = meta.duration_s as usize;
    if k == 0 {
        return Err(SeriesError::Empty);
    }
    // Difference array: +1 at span start, -1 at span end.
    let mut delta = vec![0i64; k + 1];
    for ev in events {
        if ev.video_id != meta.video_id {
            return Err(SeriesError::VideoMismatch {
                event_id: ev.event_id.clone(),
                expected: meta.video_id.clone(),
                found: ev.video_id.clone(),
            });
        }
        let cue = ev.cue_time_s.floor();
        if cue > f64::from(meta.duration_s) {
            return Err(SeriesError::CueOutOfRange {
                event_id: ev.event_id.clone(),
                cue_time_s: ev.cue_time_s,
                duration_s: meta.duration_s,
            });
        }
        if ev.action != Action::SeekBack30 {
            continue;
        }
        let end = cue as usize;
        let start = end.saturating_sub(REPLAY_SPAN_S as usize);
        if end > start {
            delta[start] += 1;
            delta[end] -= 1;
        }
    }
    let mut running = 0i64;
    let cells = delta[..k]
        .iter()
        .map(|d| {
            running += d;
            running as f64
        })
        .collect();
    Ok(ActivitySeries { video_id: meta.video_id.clone(), kind: SeriesKind::Raw, cells, smoothing_window_s: None })
}

/// Centered moving average with truncated edges. Cell `t` averages input
/// indices `t - floor(w/2) ..= t + ceil(w/2) - 1` that fall inside the series.
pub fn smooth(series: &ActivitySeries, window_s: u32) -> Result<ActivitySeries, SeriesError> {
    if series.kind == SeriesKind::Smoothed {
        return Err(SeriesError::WrongKind(series.kind));
    }
    let k = series.cells.len();
    let w = window_s as usize;
    if w < 1 || w > k {
        return Err(SeriesError::BadWindow { window_s, len: k });
    }
    // Prefix sums of integer counts stay exact in f64, so equal windows give
    // bit-identical means and plateaus stay flat.
    let mut prefix = Vec::with_capacity(k + 1);
    prefix.push(0.0);
    for &v in &series.cells {
        prefix.push(prefix.last().unwrap() + v);
    }
    let back = w / 2;
    let ahead = w - back; // ceil(w/2)
    let cells = (0..k)
        .map(|t| {
            let lo = t.saturating_sub(back);
            let hi = (t + ahead).min(k); // exclusive
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    Ok(ActivitySeries {
        video_id: series.video_id.clone(),
        kind: SeriesKind::Smoothed,
        cells,
        smoothing_window_s: Some(window_s),
    })
}

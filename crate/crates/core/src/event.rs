//! Interaction events, video metadata and the line-oriented event log codec.
//!
//! Each log record is one flat JSON object per line:
//!
//! ```text
//! {"v":"1","event_id":"e1","video_id":"lec-a","user_id":"u1","session_id":"s1","action":"seek_back_30","cue_time_s":45.0,"wall_time":"2024-03-01T10:00:00Z"}
//! ```
//!
//! Unknown keys are ignored on read. Records are always written with the key
//! order above so that re-serialization is byte-stable.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version carried in every record.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("failed to read log: {0}")]
    Io(String),
}

/// A player control press.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "play")]
    Play,
    #[serde(rename = "pause")]
    Pause,
    /// Rewind 30 seconds. The only action that feeds the interest series.
    #[serde(rename = "seek_back_30")]
    SeekBack30,
    #[serde(rename = "seek_fwd_30")]
    SeekFwd30,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Play, Action::Pause, Action::SeekBack30, Action::SeekFwd30];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Play => "play",
            Action::Pause => "pause",
            Action::SeekBack30 => "seek_back_30",
            Action::SeekFwd30 => "seek_fwd_30",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| EventError::MalformedRecord(format!("unknown action {s:?}")))
    }
}

/// One logged viewer action at a video cue time.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub event_id: String,
    pub video_id: String,
    pub user_id: String,
    pub session_id: String,
    pub action: Action,
    /// Player position in seconds when the action fired. May be fractional.
    pub cue_time_s: f64,
    pub wall_time: DateTime<Utc>,
}

/// Wire form of an event; field order here is the canonical key order.
#[derive(Serialize, Deserialize)]
struct EventRecord {
    v: String,
    event_id: String,
    video_id: String,
    user_id: String,
    session_id: String,
    action: String,
    cue_time_s: f64,
    wall_time: String,
}

impl TryFrom<EventRecord> for InteractionEvent {
    type Error = EventError;

    fn try_from(r: EventRecord) -> Result<Self, Self::Error> {
        if r.v != SCHEMA_VERSION {
            return Err(EventError::MalformedRecord(format!("unsupported schema version {:?}", r.v)));
        }
        if r.event_id.is_empty() {
            return Err(EventError::MalformedRecord("empty event_id".into()));
        }
        if !r.cue_time_s.is_finite() || r.cue_time_s < 0.0 {
            return Err(EventError::MalformedRecord(format!("negative cue_time_s {}", r.cue_time_s)));
        }
        let action = r.action.parse()?;
        let wall_time = DateTime::parse_from_rfc3339(&r.wall_time)
            .map_err(|e| EventError::MalformedRecord(format!("bad wall_time {:?}: {e}", r.wall_time)))?
            .with_timezone(&Utc);
        Ok(InteractionEvent {
            event_id: r.event_id,
            video_id: r.video_id,
            user_id: r.user_id,
            session_id: r.session_id,
            action,
            cue_time_s: r.cue_time_s,
            wall_time,
        })
    }
}

impl From<&InteractionEvent> for EventRecord {
    fn from(e: &InteractionEvent) -> Self {
        EventRecord {
            v: SCHEMA_VERSION.to_string(),
            event_id: e.event_id.clone(),
            video_id: e.video_id.clone(),
            user_id: e.user_id.clone(),
            session_id: e.session_id.clone(),
            action: e.action.as_str().to_string(),
            cue_time_s: e.cue_time_s,
            wall_time: e.wall_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        }
    }
}

/// Parses one event-log record.
pub fn parse_event_line(line: &str) -> Result<InteractionEvent, EventError> {
    let record: EventRecord =
        serde_json::from_str(line.trim()).map_err(|e| EventError::MalformedRecord(e.to_string()))?;
    record.try_into()
}

/// Parses an already-decoded JSON value (one element of an HTTP batch).
pub fn parse_event_value(value: serde_json::Value) -> Result<InteractionEvent, EventError> {
    let record: EventRecord =
        serde_json::from_value(value).map_err(|e| EventError::MalformedRecord(e.to_string()))?;
    record.try_into()
}

/// Emits the canonical single-line record, without a trailing newline.
pub fn serialize_event(e: &InteractionEvent) -> String {
    serde_json::to_string(&EventRecord::from(e)).expect("event record is always serializable")
}

/// How [`load_log`] treats bad lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Fail on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and count them.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedLog {
    /// Unique events in first-occurrence order.
    pub events: Vec<InteractionEvent>,
    pub duplicates: usize,
    /// Malformed lines skipped (lenient mode only).
    pub skipped: usize,
}

/// Loads a sequence of log lines, dropping blank lines and repeated event ids
/// (first occurrence wins). Line numbers in errors are 1-based.
pub fn load_log<I, S>(lines: I, mode: LoadMode) -> Result<LoadedLog, EventError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = LoadedLog::default();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        match parse_event_line(line) {
            Ok(ev) => {
                if seen.insert(ev.event_id.clone()) {
                    out.events.push(ev);
                } else {
                    out.duplicates += 1;
                }
            }
            Err(err) => match mode {
                LoadMode::Strict => {
                    let reason = match err {
                        EventError::MalformedRecord(r) => r,
                        other => other.to_string(),
                    };
                    return Err(EventError::MalformedLine { line: idx + 1, reason });
                }
                LoadMode::Lenient => out.skipped += 1,
            },
        }
    }
    Ok(out)
}

/// [`load_log`] over a buffered reader.
pub fn load_log_reader<R: BufRead>(reader: R, mode: LoadMode) -> Result<LoadedLog, EventError> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>().map_err(|e| EventError::Io(e.to_string()))?;
    load_log(lines, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Lecture,
    #[serde(rename = "howto")]
    HowTo,
    Other,
}

impl Genre {
    /// Default moving-average width in seconds for this kind of video.
    pub fn default_window_s(self) -> u32 {
        match self {
            Genre::Lecture => 60,
            Genre::HowTo => 45,
            Genre::Other => 60,
        }
    }
}

impl FromStr for Genre {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lecture" => Ok(Genre::Lecture),
            "howto" | "how-to" => Ok(Genre::HowTo),
            "other" => Ok(Genre::Other),
            _ => Err(format!("unknown genre {s:?} (expected lecture, howto or other)")),
        }
    }
}

/// Used when a video carries no genre.
pub const DEFAULT_WINDOW_S: u32 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    /// Video length in whole seconds; one series cell per second.
    pub duration_s: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<Genre>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl VideoMeta {
    pub fn new(video_id: impl Into<String>, duration_s: u32) -> Self {
        VideoMeta { video_id: video_id.into(), duration_s, genre: None, title: None }
    }

    pub fn with_genre(mut self, genre: Genre) -> Self {
        self.genre = Some(genre);
        self
    }

    pub fn validate(&self) -> Result<(), EventError> {
        if self.duration_s < 1 {
            return Err(EventError::MalformedRecord("duration_s must be at least 1".into()));
        }
        Ok(())
    }

    pub fn default_window_s(&self) -> u32 {
        self.genre.map_or(DEFAULT_WINDOW_S, Genre::default_window_s)
    }
}

//! Key frame detection from aggregated viewer replays.
//!
//! Viewers who rewind 30 seconds re-watch what they found worth a second
//! look. Summing those rewound spans per video second gives a replay series;
//! its moving average is the interest curve, and its local maxima are the key
//! frames. The highest one is the thumbnail.
//!
//! - [`event`]: interaction events and the JSON-lines log codec
//! - [`series`]: replay series construction and smoothing
//! - [`peaks`]: peak finding, ranking, thumbnail and candidate windows
//! - [`eval`]: ground-truth segments and distance reports
//! - [`sim`]: seeded synthetic viewers
//! - [`analysis`]: the composed pipelines

pub mod analysis;
pub mod eval;
pub mod event;
pub mod peaks;
pub mod series;
pub mod sim;

pub use analysis::{analyze_keyframes, evaluate_events, AnalysisError, AnalysisParams};
pub use eval::{EvaluationReport, GroundTruth, SemanticSegment};
pub use event::{Action, Genre, InteractionEvent, LoadMode, VideoMeta};
pub use peaks::{KeyframeResult, Peak, RankedPeak};
pub use series::{ActivitySeries, SeriesKind};
pub use sim::SimulationConfig;

//! Seeded synthetic viewers that hunt for known segments.
//!
//! For each user and segment the generator emits a `play` at 0, a Poisson
//! number of forward skips that lead up to a noisy landing point inside the
//! segment, and a Poisson number of replays cued around `start + 30` so the
//! rewound span covers the segment start. All randomness comes from one
//! ChaCha8 stream seeded with `seed`, consumed in a fixed order.

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{validate_segments, GroundTruth, SemanticSegment};
use crate::event::{Action, InteractionEvent};
use crate::series::REPLAY_SPAN_S;

/// Default number of simulated viewers.
pub const DEFAULT_COHORT: u32 = 23;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("bad simulation config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub video_id: String,
    pub duration_s: u32,
    pub segments: Vec<SemanticSegment>,
    pub n_users: u32,
    /// Poisson mean of replays per user and segment.
    pub replays_per_segment_mean: f64,
    /// Standard deviation of landing and replay cue noise, seconds.
    pub seek_noise_sigma_s: f64,
    /// Poisson mean of forward skips per user and segment.
    pub forward_skip_rate: f64,
    pub seed: u64,
}

impl SimulationConfig {
    /// Default behavior parameters for a ground truth.
    pub fn for_truth(truth: &GroundTruth, n_users: u32, seed: u64) -> Self {
        SimulationConfig {
            video_id: truth.video_id.clone(),
            duration_s: truth.duration_s,
            segments: truth.segments.clone(),
            n_users,
            replays_per_segment_mean: 2.0,
            seek_noise_sigma_s: 10.0,
            forward_skip_rate: 3.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("replays_per_segment_mean", self.replays_per_segment_mean),
            ("seek_noise_sigma_s", self.seek_noise_sigma_s),
            ("forward_skip_rate", self.forward_skip_rate),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::BadConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        validate_segments(&self.segments, self.duration_s).map_err(|e| SimError::BadConfig(e.to_string()))
    }
}

fn wall_clock_base() -> DateTime<Utc> {
    DateTime::from_timestamp(1_704_099_600, 0).expect("valid timestamp") // 2024-01-01T09:00:00Z
}

/// Poisson draw that treats a zero mean as "never".
fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("mean validated positive and finite");
    d.sample(rng) as u64
}

fn millis(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Generates the interaction log for `config`. Same config, same log.
pub fn simulate_sessions(config: &SimulationConfig) -> Result<Vec<InteractionEvent>, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.seek_noise_sigma_s).expect("sigma validated");
    let duration = f64::from(config.duration_s);
    let clamp = |x: f64| millis(x.clamp(0.0, duration));
    let base = wall_clock_base();

    let mut events = Vec::new();
    for user in 0..config.n_users {
        let user_id = format!("user-{user:04}");
        let session_id = format!("sim-{:016x}-u{user:04}", config.seed);
        for (seg_idx, seg) in config.segments.iter().enumerate() {
            let mut counter = 0u32;
            let mut push = |action: Action, cue: f64| {
                let offset = i64::from(user) * 3600 + seg_idx as i64 * 300 + i64::from(counter);
                events.push(InteractionEvent {
                    event_id: format!("sim-{:016x}-u{user:04}-g{seg_idx:03}-{counter:04}", config.seed),
                    video_id: config.video_id.clone(),
                    user_id: user_id.clone(),
                    session_id: session_id.clone(),
                    action,
                    cue_time_s: cue,
                    wall_time: base + Duration::seconds(offset),
                });
                counter += 1;
            };

            push(Action::Play, 0.0);

            let interior = rng.random_range(f64::from(seg.start_s)..f64::from(seg.end_s));
            let landing = (interior + noise.sample(&mut rng)).clamp(0.0, duration);
            let skips = poisson_count(&mut rng, config.forward_skip_rate);
            for j in 0..skips {
                let cue = landing - f64::from(REPLAY_SPAN_S) * (skips - j) as f64;
                push(Action::SeekFwd30, clamp(cue));
            }

            let replays = poisson_count(&mut rng, config.replays_per_segment_mean);
            let anchor = f64::from(seg.start_s) + f64::from(REPLAY_SPAN_S);
            for _ in 0..replays {
                push(Action::SeekBack30, clamp(anchor + noise.sample(&mut rng)));
            }
        }
    }
    Ok(events)
}

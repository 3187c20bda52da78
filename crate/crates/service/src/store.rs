//! Append-only, per-video event store.
//!
//! Layout under the root directory:
//!
//! ```text
//! <root>/<video_id>/meta.json      registered VideoMeta
//! <root>/<video_id>/events.jsonl   event log, one record per line
//! ```
//!
//! Appends are written and `fsync`ed before they are acknowledged. On open
//! every log is replayed through the log loader, so duplicates collapse and a
//! torn final line left by a crash is dropped.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use replaykey_core::event::{load_log_reader, serialize_event, InteractionEvent, LoadMode, VideoMeta};
use thiserror::Error;

const META_FILE: &str = "meta.json";
const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    StorageFailure(#[from] io::Error),
    #[error("invalid video id {0:?}: use 1-128 characters from [A-Za-z0-9._-], not starting with '.'")]
    InvalidVideoId(String),
    #[error("video {video_id} already registered with duration {existing}s")]
    Conflict { video_id: String, existing: u32 },
    #[error("event {event_id} cue {cue_time_s}s is past the end of {video_id} ({duration_s}s)")]
    CueOutOfRange { event_id: String, video_id: String, cue_time_s: f64, duration_s: u32 },
    #[error("invalid video meta: {0}")]
    InvalidMeta(String),
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Created,
    Unchanged,
    /// Same duration, different genre or title.
    Updated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AppendOutcome {
    pub accepted: usize,
    pub duplicates: usize,
}

/// Read-only view of one video taken at a single instant.
#[derive(Debug, Clone)]
pub struct VideoSnapshot {
    pub meta: Option<VideoMeta>,
    pub events: Vec<InteractionEvent>,
}

#[derive(Default)]
struct VideoLog {
    meta: RwLock<Option<VideoMeta>>,
    events: RwLock<Vec<InteractionEvent>>,
    /// Held for the whole write+flush; one writer per video.
    writer: Mutex<Option<File>>,
}

pub struct EventStore {
    root: PathBuf,
    videos: RwLock<BTreeMap<String, Arc<VideoLog>>>,
    ids: Mutex<HashSet<String>>,
}

pub fn validate_video_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidVideoId(id.to_string()))
    }
}

/// Cuts a trailing partial record so later appends start on a fresh line.
fn trim_torn_tail(path: &Path) -> io::Result<()> {
    let mut file = OpenOptions::new().read(true).write(true).open(path)?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.is_empty() || buf.ends_with(b"\n") {
        return Ok(());
    }
    let keep = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    tracing::warn!(path = %path.display(), dropped = buf.len() - keep, "dropping torn record at end of log");
    file.set_len(keep as u64)?;
    file.sync_all()
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

impl EventStore {
    /// Opens or creates a store, replaying every log found under `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut names: Vec<String> = fs::read_dir(&root)?
            .filter_map(Result::ok)
            .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| validate_video_id(n).is_ok())
            .collect();
        names.sort();

        let mut ids = HashSet::new();
        let mut videos = BTreeMap::new();
        for name in names {
            let dir = root.join(&name);
            let log = VideoLog::default();

            let meta_path = dir.join(META_FILE);
            if meta_path.exists() {
                let text = fs::read_to_string(&meta_path)?;
                let meta: VideoMeta = serde_json::from_str(&text)
                    .map_err(|e| StoreError::Corrupt { path: meta_path.clone(), reason: e.to_string() })?;
                *log.meta.write().unwrap() = Some(meta);
            }

            let log_path = dir.join(LOG_FILE);
            if log_path.exists() {
                trim_torn_tail(&log_path)?;
                let loaded = load_log_reader(BufReader::new(File::open(&log_path)?), LoadMode::Lenient)
                    .map_err(|e| StoreError::Corrupt { path: log_path.clone(), reason: e.to_string() })?;
                if loaded.skipped > 0 {
                    tracing::warn!(video = %name, skipped = loaded.skipped, "skipped malformed log lines");
                }
                let events: Vec<_> = loaded
                    .events
                    .into_iter()
                    .filter(|e| e.video_id == name && ids.insert(e.event_id.clone()))
                    .collect();
                *log.events.write().unwrap() = events;
            }
            videos.insert(name, Arc::new(log));
        }
        Ok(EventStore { root, videos: RwLock::new(videos), ids: Mutex::new(ids) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn video(&self, id: &str) -> Option<Arc<VideoLog>> {
        self.videos.read().unwrap().get(id).cloned()
    }

    fn video_or_create(&self, id: &str) -> Result<Arc<VideoLog>, StoreError> {
        if let Some(v) = self.video(id) {
            return Ok(v);
        }
        validate_video_id(id)?;
        let mut videos = self.videos.write().unwrap();
        if let Some(v) = videos.get(id) {
            return Ok(v.clone());
        }
        fs::create_dir_all(self.root.join(id))?;
        sync_dir(&self.root)?;
        let v = Arc::new(VideoLog::default());
        videos.insert(id.to_string(), v.clone());
        Ok(v)
    }

    /// Registers or re-registers a video. A different duration is a conflict,
    /// as is a duration shorter than an already stored cue time.
    pub fn register_video(&self, meta: &VideoMeta) -> Result<Registration, StoreError> {
        validate_video_id(&meta.video_id)?;
        meta.validate().map_err(|e| StoreError::InvalidMeta(e.to_string()))?;
        let video = self.video_or_create(&meta.video_id)?;
        // Serialize with appends so the cue-range check below stays true.
        let _writer = video.writer.lock().unwrap();
        let mut current = video.meta.write().unwrap();
        match current.as_ref() {
            Some(existing) if existing == meta => return Ok(Registration::Unchanged),
            Some(existing) if existing.duration_s != meta.duration_s => {
                return Err(StoreError::Conflict { video_id: meta.video_id.clone(), existing: existing.duration_s })
            }
            Some(_) => {}
            None => {
                if let Some(e) = video.events.read().unwrap().iter().find(|e| e.cue_time_s.floor() > f64::from(meta.duration_s)) {
                    return Err(StoreError::CueOutOfRange {
                        event_id: e.event_id.clone(),
                        video_id: meta.video_id.clone(),
                        cue_time_s: e.cue_time_s,
                        duration_s: meta.duration_s,
                    });
                }
            }
        }
        let created = current.is_none();
        let dir = self.root.join(&meta.video_id);
        let tmp = dir.join("meta.json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(serde_json::to_string_pretty(meta).expect("meta serializes").as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join(META_FILE))?;
        sync_dir(&dir)?;
        *current = Some(meta.clone());
        Ok(if created { Registration::Created } else { Registration::Updated })
    }

    /// Appends new events, skipping ids already stored (or repeated within the
    /// batch). Returns once every accepted record is flushed to disk.
    pub fn append_events(&self, events: &[InteractionEvent]) -> Result<AppendOutcome, StoreError> {
        let mut groups: BTreeMap<&str, Vec<&InteractionEvent>> = BTreeMap::new();
        for e in events {
            validate_video_id(&e.video_id)?;
            groups.entry(e.video_id.as_str()).or_default().push(e);
        }
        // Reject the whole batch before writing anything if a cue is out of range.
        for (id, group) in &groups {
            if let Some(video) = self.video(id) {
                if let Some(meta) = video.meta.read().unwrap().as_ref() {
                    check_cues(meta, group)?;
                }
            }
        }

        let mut outcome = AppendOutcome::default();
        for (id, group) in groups {
            let video = self.video_or_create(id)?;
            let mut writer = video.writer.lock().unwrap();
            if let Some(meta) = video.meta.read().unwrap().as_ref() {
                check_cues(meta, &group)?;
            }

            let fresh: Vec<&InteractionEvent> = {
                let mut ids = self.ids.lock().unwrap();
                group.into_iter().filter(|e| ids.insert(e.event_id.clone())).collect()
            };
            outcome.duplicates += events.iter().filter(|e| e.video_id == id).count() - fresh.len();
            if fresh.is_empty() {
                continue;
            }

            let mut buf = String::new();
            for e in &fresh {
                buf.push_str(&serialize_event(e));
                buf.push('\n');
            }
            if let Err(err) = self.write_durably(id, &mut writer, buf.as_bytes()) {
                let mut ids = self.ids.lock().unwrap();
                for e in &fresh {
                    ids.remove(&e.event_id);
                }
                return Err(err.into());
            }
            outcome.accepted += fresh.len();
            video.events.write().unwrap().extend(fresh.into_iter().cloned());
        }
        Ok(outcome)
    }

    fn write_durably(&self, id: &str, writer: &mut Option<File>, bytes: &[u8]) -> io::Result<()> {
        if writer.is_none() {
            let path = self.root.join(id).join(LOG_FILE);
            let existed = path.exists();
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            if !existed {
                sync_dir(&self.root.join(id))?;
            }
            *writer = Some(file);
        }
        let file = writer.as_mut().expect("writer opened above");
        let start = file.seek(SeekFrom::End(0))?;
        let result = file.write_all(bytes).and_then(|_| file.sync_data());
        if result.is_err() {
            // Best effort: do not leave a half-written batch behind.
            let _ = file.set_len(start);
            *writer = None;
        }
        result
    }

    pub fn meta(&self, id: &str) -> Option<VideoMeta> {
        self.video(id).and_then(|v| v.meta.read().unwrap().clone())
    }

    pub fn snapshot(&self, id: &str) -> Option<VideoSnapshot> {
        let v = self.video(id)?;
        let meta = v.meta.read().unwrap().clone();
        let events = v.events.read().unwrap().clone();
        Some(VideoSnapshot { meta, events })
    }

    /// Ids of videos with a log or a registration.
    pub fn video_ids(&self) -> Vec<String> {
        self.videos.read().unwrap().keys().cloned().collect()
    }

    pub fn registered_count(&self) -> usize {
        self.videos.read().unwrap().values().filter(|v| v.meta.read().unwrap().is_some()).count()
    }

    pub fn event_count(&self) -> usize {
        self.videos.read().unwrap().values().map(|v| v.events.read().unwrap().len()).sum()
    }
}

fn check_cues(meta: &VideoMeta, events: &[&InteractionEvent]) -> Result<(), StoreError> {
    match events.iter().find(|e| e.cue_time_s.floor() > f64::from(meta.duration_s)) {
        Some(e) => Err(StoreError::CueOutOfRange {
            event_id: e.event_id.clone(),
            video_id: meta.video_id.clone(),
            cue_time_s: e.cue_time_s,
            duration_s: meta.duration_s,
        }),
        None => Ok(()),
    }
}

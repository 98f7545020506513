//! Flat-file persistence for telemetry datasets.
//!
//! A dataset is one JSON manifest plus seven UTF-8 CSV files, one per event
//! kind. Column orders are normative:
//!
//! | file         | columns                          |
//! |--------------|----------------------------------|
//! | calls.csv    | subject,start_epoch_s,duration_min |
//! | apps.csv     | subject,epoch_s,task_id          |
//! | gps.csv      | subject,epoch_s,lat,lon          |
//! | audio.csv    | subject,epoch_s,class            |
//! | activity.csv | subject,epoch_s,class            |
//! | locks.csv    | subject,epoch_s                  |
//! | ema.csv      | subject,epoch_s,topic,value      |
//!
//! The ema `topic` column is one of `stress|mood|sleep|happy|sad`. Numeric
//! fields always use a `.` decimal separator. Lines starting with `#` are
//! ignored on read; writers use them to stamp a config hash.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::ContentHasher;
use crate::telemetry::{
    validate_event, EmaTopic, EventKind, StudyWindow, SubjectId, TelemetryEvent,
};

/// Relative paths of the seven event files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub calls: PathBuf,
    pub apps: PathBuf,
    pub gps: PathBuf,
    pub audio: PathBuf,
    pub activity: PathBuf,
    pub locks: PathBuf,
    pub ema: PathBuf,
}

impl DatasetFiles {
    /// Conventional file names inside a dataset directory.
    pub fn standard() -> Self {
        Self {
            calls: "calls.csv".into(),
            apps: "apps.csv".into(),
            gps: "gps.csv".into(),
            audio: "audio.csv".into(),
            activity: "activity.csv".into(),
            locks: "locks.csv".into(),
            ema: "ema.csv".into(),
        }
    }

    pub fn for_kind(&self, kind: EventKind) -> &Path {
        match kind {
            EventKind::Call => &self.calls,
            EventKind::App => &self.apps,
            EventKind::Gps => &self.gps,
            EventKind::Audio => &self.audio,
            EventKind::Activity => &self.activity,
            EventKind::Lock => &self.locks,
            EventKind::Ema => &self.ema,
        }
    }
}

/// The dataset manifest: study window, subject roster, and file paths
/// (relative to the manifest's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub study_start: DateTime<Utc>,
    pub study_end: DateTime<Utc>,
    pub subjects: Vec<SubjectId>,
    pub files: DatasetFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DatasetManifest {
    pub fn window(&self) -> StudyWindow {
        StudyWindow::new(self.study_start.timestamp(), self.study_end.timestamp())
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.study_end <= self.study_start {
            return Err(IngestError::InvalidManifest("study_end must be after study_start".into()));
        }
        if self.subjects.is_empty() {
            return Err(IngestError::InvalidManifest("subject list is empty".into()));
        }
        let distinct: BTreeSet<_> = self.subjects.iter().collect();
        if distinct.len() != self.subjects.len() {
            return Err(IngestError::InvalidManifest("duplicate subject ids".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let manifest: Self =
            serde_json::from_str(&text).map_err(|e| IngestError::Json { path: path.into(), source: e })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| IngestError::io(path, e))
    }
}

/// One rejected row, with enough context to find it in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowViolation {
    pub kind: EventKind,
    /// 1-based data row index (header and comment lines not counted).
    pub row: usize,
    pub message: String,
}

impl std::fmt::Display for RowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} row {}: {}", self.kind.name(), self.row, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("parse error in {kind} file, row {row}: {message}", kind = kind.name())]
    Parse { kind: EventKind, row: usize, message: String },
    #[error("{} invalid row(s): {}", .0.len(), format_violations(.0))]
    Validation(Vec<RowViolation>),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.into(), source }
    }
}

fn format_violations(violations: &[RowViolation]) -> String {
    const SHOWN: usize = 8;
    let mut parts: Vec<String> = violations.iter().take(SHOWN).map(|v| v.to_string()).collect();
    if violations.len() > SHOWN {
        parts.push(format!("... and {} more", violations.len() - SHOWN));
    }
    parts.join("; ")
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, IngestError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| IngestError::io(path, std::io::Error::other(e)))
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    kind: EventKind,
    row: usize,
) -> Result<T, IngestError> {
    let raw = record
        .get(idx)
        .ok_or_else(|| IngestError::Parse { kind, row, message: format!("missing column {name}") })?;
    raw.trim().parse().map_err(|_| IngestError::Parse {
        kind,
        row,
        message: format!("bad {name} value {raw:?}"),
    })
}

fn expect_width(
    record: &csv::StringRecord,
    width: usize,
    kind: EventKind,
    row: usize,
) -> Result<(), IngestError> {
    if record.len() != width {
        return Err(IngestError::Parse {
            kind,
            row,
            message: format!("expected {width} columns, found {}", record.len()),
        });
    }
    Ok(())
}

fn parse_file(path: &Path, kind: EventKind) -> Result<Vec<TelemetryEvent>, IngestError> {
    let mut rdr = reader(path)?;
    let mut events = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| IngestError::Parse { kind, row, message: e.to_string() })?;
        let event = match kind {
            EventKind::Call => {
                expect_width(&record, 3, kind, row)?;
                TelemetryEvent::Call {
                    subject: SubjectId(parse_field(&record, 0, "subject", kind, row)?),
                    start_time: parse_field(&record, 1, "start_epoch_s", kind, row)?,
                    duration_min: parse_field(&record, 2, "duration_min", kind, row)?,
                }
            }
            EventKind::App => {
                expect_width(&record, 3, kind, row)?;
                TelemetryEvent::AppTask {
                    subject: SubjectId(parse_field(&record, 0, "subject", kind, row)?),
                    time: parse_field(&record, 1, "epoch_s", kind, row)?,
                    task_id: record.get(2).unwrap_or_default().to_string(),
                }
            }
            EventKind::Gps => {
                expect_width(&record, 4, kind, row)?;
                TelemetryEvent::GpsFix {
                    subject: SubjectId(parse_field(&record, 0, "subject", kind, row)?),
                    time: parse_field(&record, 1, "epoch_s", kind, row)?,
                    lat: parse_field(&record, 2, "lat", kind, row)?,
                    lon: parse_field(&record, 3, "lon", kind, row)?,
                }
            }
            EventKind::Audio | EventKind::Activity => {
                expect_width(&record, 3, kind, row)?;
                let subject = SubjectId(parse_field(&record, 0, "subject", kind, row)?);
                let time = parse_field(&record, 1, "epoch_s", kind, row)?;
                let class: u8 = parse_field(&record, 2, "class", kind, row)?;
                if kind == EventKind::Audio {
                    TelemetryEvent::AudioInf { subject, time, class }
                } else {
                    TelemetryEvent::ActivityInf { subject, time, class }
                }
            }
            EventKind::Lock => {
                expect_width(&record, 2, kind, row)?;
                TelemetryEvent::LockEvent {
                    subject: SubjectId(parse_field(&record, 0, "subject", kind, row)?),
                    time: parse_field(&record, 1, "epoch_s", kind, row)?,
                }
            }
            EventKind::Ema => {
                expect_width(&record, 4, kind, row)?;
                let topic_raw = record.get(2).unwrap_or_default();
                let topic = EmaTopic::from_keyword(topic_raw.trim()).ok_or_else(|| {
                    IngestError::Parse { kind, row, message: format!("unknown topic {topic_raw:?}") }
                })?;
                TelemetryEvent::EmaResponse {
                    subject: SubjectId(parse_field(&record, 0, "subject", kind, row)?),
                    time: parse_field(&record, 1, "epoch_s", kind, row)?,
                    topic,
                    value: parse_field(&record, 3, "value", kind, row)?,
                }
            }
        };
        events.push(event);
    }
    Ok(events)
}

/// Loads, validates, and canonically orders a whole dataset.
///
/// Every row must parse and every event must pass [`validate_event`]
/// (out-of-window events are an error, not silently dropped; silent drops
/// would corrupt the dense-grid sample count). Returned events are stably
/// sorted by (subject, time), kinds tie-breaking in file order.
pub fn load_dataset(
    manifest: &DatasetManifest,
    base_dir: &Path,
) -> Result<Vec<TelemetryEvent>, IngestError> {
    manifest.validate()?;
    let window = manifest.window();
    let roster: BTreeSet<SubjectId> = manifest.subjects.iter().copied().collect();

    let mut all = Vec::new();
    let mut violations = Vec::new();
    for kind in EventKind::ALL {
        let path = base_dir.join(manifest.files.for_kind(kind));
        let events = parse_file(&path, kind)?;
        for (i, event) in events.into_iter().enumerate() {
            let row = i + 1;
            if !roster.contains(&event.subject()) {
                violations.push(RowViolation {
                    kind,
                    row,
                    message: format!("subject {} not in manifest", event.subject()),
                });
            }
            for violation in validate_event(&event, &window) {
                violations.push(RowViolation { kind, row, message: violation.to_string() });
            }
            all.push(event);
        }
    }
    if !violations.is_empty() {
        return Err(IngestError::Validation(violations));
    }
    all.sort_by_key(|e| (e.subject(), e.time()));
    Ok(all)
}

fn open_event_writer(path: &Path, config_hash: Option<&str>) -> Result<fs::File, IngestError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| IngestError::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| IngestError::io(path, e))?;
    if let Some(hash) = config_hash {
        writeln!(file, "# config_hash={hash}").map_err(|e| IngestError::io(path, e))?;
    }
    Ok(file)
}

fn trim_float(x: f64) -> String {
    // shortest round-trippable decimal form, locale-independent
    format!("{x}")
}

/// Writes a dataset to the manifest's files under `base_dir`, preserving
/// the input order of events within each kind.
///
/// Loading a written dataset reproduces a canonically ordered input exactly
/// (`load_dataset . write_dataset = id` on canonical data).
pub fn write_dataset(
    events: &[TelemetryEvent],
    manifest: &DatasetManifest,
    base_dir: &Path,
) -> Result<(), IngestError> {
    manifest.validate()?;
    let hash = manifest.config_hash.as_deref();
    for kind in EventKind::ALL {
        let path = base_dir.join(manifest.files.for_kind(kind));
        let file = open_event_writer(&path, hash)?;
        let mut w = csv::Writer::from_writer(file);
        let header: &[&str] = match kind {
            EventKind::Call => &["subject", "start_epoch_s", "duration_min"],
            EventKind::App => &["subject", "epoch_s", "task_id"],
            EventKind::Gps => &["subject", "epoch_s", "lat", "lon"],
            EventKind::Audio | EventKind::Activity => &["subject", "epoch_s", "class"],
            EventKind::Lock => &["subject", "epoch_s"],
            EventKind::Ema => &["subject", "epoch_s", "topic", "value"],
        };
        w.write_record(header).map_err(|e| IngestError::io(&path, std::io::Error::other(e)))?;
        for event in events.iter().filter(|e| e.kind() == kind) {
            let record: Vec<String> = match event {
                TelemetryEvent::Call { subject, start_time, duration_min } => {
                    vec![subject.to_string(), start_time.to_string(), trim_float(*duration_min)]
                }
                TelemetryEvent::AppTask { subject, time, task_id } => {
                    vec![subject.to_string(), time.to_string(), task_id.clone()]
                }
                TelemetryEvent::GpsFix { subject, time, lat, lon } => {
                    vec![subject.to_string(), time.to_string(), trim_float(*lat), trim_float(*lon)]
                }
                TelemetryEvent::AudioInf { subject, time, class }
                | TelemetryEvent::ActivityInf { subject, time, class } => {
                    vec![subject.to_string(), time.to_string(), class.to_string()]
                }
                TelemetryEvent::LockEvent { subject, time } => {
                    vec![subject.to_string(), time.to_string()]
                }
                TelemetryEvent::EmaResponse { subject, time, topic, value } => {
                    vec![
                        subject.to_string(),
                        time.to_string(),
                        topic.keyword().to_string(),
                        trim_float(*value),
                    ]
                }
            };
            w.write_record(&record).map_err(|e| IngestError::io(&path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| IngestError::io(&path, e))?;
    }
    Ok(())
}

/// Content hash over the manifest window/subjects and all seven event
/// files, used by downstream stages to detect stale inputs.
pub fn dataset_content_hash(
    manifest: &DatasetManifest,
    base_dir: &Path,
) -> Result<String, IngestError> {
    let mut hasher = ContentHasher::new();
    hasher.update(manifest.study_start.timestamp().to_string().as_bytes());
    hasher.update(manifest.study_end.timestamp().to_string().as_bytes());
    for s in &manifest.subjects {
        hasher.update(&s.0.to_le_bytes());
    }
    for kind in EventKind::ALL {
        let path = base_dir.join(manifest.files.for_kind(kind));
        let bytes = fs::read(&path).map_err(|e| IngestError::io(&path, e))?;
        hasher.update(&bytes);
    }
    Ok(hasher.finish())
}

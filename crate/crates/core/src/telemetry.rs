//! Shared domain types for the pipeline: subjects, the hourly grid, raw
//! telemetry events, EMA topics, and per-hour samples.
//!
//! Everything here is an immutable value type; validation is total and
//! returns violation lists instead of failing.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifies one study participant. Unique within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub u32);

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One cell of the dense (subject x hour) grid.
///
/// `hour_index` counts whole hours since the study window start; it is the
/// same timeline for every subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourKey {
    pub subject: SubjectId,
    pub hour_index: u32,
}

impl HourKey {
    pub fn new(subject: SubjectId, hour_index: u32) -> Self {
        Self { subject, hour_index }
    }
}

/// The study observation window, in UTC epoch seconds.
///
/// Hour bucketing is `floor((t - start) / 3600)`; an event is in-window when
/// `start <= t < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start_epoch_s: i64,
    pub end_epoch_s: i64,
}

impl StudyWindow {
    pub fn new(start_epoch_s: i64, end_epoch_s: i64) -> Self {
        assert!(end_epoch_s > start_epoch_s, "study window must be non-empty");
        Self { start_epoch_s, end_epoch_s }
    }

    /// Number of hour buckets on the grid (a partial trailing hour still
    /// gets a bucket so every in-window event maps onto the grid).
    pub fn grid_hours(&self) -> u32 {
        let span = self.end_epoch_s - self.start_epoch_s;
        span.div_euclid(3600) as u32 + if span.rem_euclid(3600) > 0 { 1 } else { 0 }
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start_epoch_s && t < self.end_epoch_s
    }

    /// Hour bucket of an in-window timestamp.
    pub fn hour_index(&self, t: i64) -> Option<u32> {
        if self.contains(t) {
            Some(((t - self.start_epoch_s) / 3600) as u32)
        } else {
            None
        }
    }

    /// UTC calendar day (days since the Unix epoch) of an hour bucket.
    pub fn day_of_hour(&self, hour_index: u32) -> i64 {
        (self.start_epoch_s + i64::from(hour_index) * 3600).div_euclid(86_400)
    }
}

/// The five self-report topics and their valid raw ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmaTopic {
    Stress,
    CurrentMood,
    SleepQuality,
    Happiness,
    Sadness,
}

impl EmaTopic {
    pub const ALL: [EmaTopic; 5] = [
        EmaTopic::Stress,
        EmaTopic::CurrentMood,
        EmaTopic::SleepQuality,
        EmaTopic::Happiness,
        EmaTopic::Sadness,
    ];

    /// Inclusive (min, max) of valid raw responses for this topic.
    pub fn range(&self) -> (f64, f64) {
        match self {
            EmaTopic::Stress => (1.0, 5.0),
            EmaTopic::CurrentMood => (1.0, 3.0),
            EmaTopic::SleepQuality => (1.0, 4.0),
            EmaTopic::Happiness => (1.0, 4.0),
            EmaTopic::Sadness => (1.0, 4.0),
        }
    }

    pub fn in_range(&self, value: f64) -> bool {
        let (lo, hi) = self.range();
        value >= lo && value <= hi
    }

    /// Keyword used in the flat-file formats.
    pub fn keyword(&self) -> &'static str {
        match self {
            EmaTopic::Stress => "stress",
            EmaTopic::CurrentMood => "mood",
            EmaTopic::SleepQuality => "sleep",
            EmaTopic::Happiness => "happy",
            EmaTopic::Sadness => "sad",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "stress" => Some(EmaTopic::Stress),
            "mood" => Some(EmaTopic::CurrentMood),
            "sleep" => Some(EmaTopic::SleepQuality),
            "happy" => Some(EmaTopic::Happiness),
            "sad" => Some(EmaTopic::Sadness),
            _ => None,
        }
    }
}

impl fmt::Display for EmaTopic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A raw timestamped record, one variant per collected event kind.
///
/// Class codes are kept as plain integers rather than enums so that
/// out-of-range input can be represented and reported by validation.
#[derive(Debug, Clone, PartialEq)]
pub enum TelemetryEvent {
    Call { subject: SubjectId, start_time: i64, duration_min: f64 },
    AppTask { subject: SubjectId, time: i64, task_id: String },
    GpsFix { subject: SubjectId, time: i64, lat: f64, lon: f64 },
    AudioInf { subject: SubjectId, time: i64, class: u8 },
    ActivityInf { subject: SubjectId, time: i64, class: u8 },
    LockEvent { subject: SubjectId, time: i64 },
    EmaResponse { subject: SubjectId, time: i64, topic: EmaTopic, value: f64 },
}

impl TelemetryEvent {
    pub fn subject(&self) -> SubjectId {
        match *self {
            TelemetryEvent::Call { subject, .. }
            | TelemetryEvent::AppTask { subject, .. }
            | TelemetryEvent::GpsFix { subject, .. }
            | TelemetryEvent::AudioInf { subject, .. }
            | TelemetryEvent::ActivityInf { subject, .. }
            | TelemetryEvent::LockEvent { subject, .. }
            | TelemetryEvent::EmaResponse { subject, .. } => subject,
        }
    }

    /// Timestamp used for hour bucketing. Calls bucket by start time.
    pub fn time(&self) -> i64 {
        match *self {
            TelemetryEvent::Call { start_time, .. } => start_time,
            TelemetryEvent::AppTask { time, .. }
            | TelemetryEvent::GpsFix { time, .. }
            | TelemetryEvent::AudioInf { time, .. }
            | TelemetryEvent::ActivityInf { time, .. }
            | TelemetryEvent::LockEvent { time, .. }
            | TelemetryEvent::EmaResponse { time, .. } => time,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            TelemetryEvent::Call { .. } => EventKind::Call,
            TelemetryEvent::AppTask { .. } => EventKind::App,
            TelemetryEvent::GpsFix { .. } => EventKind::Gps,
            TelemetryEvent::AudioInf { .. } => EventKind::Audio,
            TelemetryEvent::ActivityInf { .. } => EventKind::Activity,
            TelemetryEvent::LockEvent { .. } => EventKind::Lock,
            TelemetryEvent::EmaResponse { .. } => EventKind::Ema,
        }
    }
}

/// The seven event kinds, in canonical (file) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Call,
    App,
    Gps,
    Audio,
    Activity,
    Lock,
    Ema,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::Call,
        EventKind::App,
        EventKind::Gps,
        EventKind::Audio,
        EventKind::Activity,
        EventKind::Lock,
        EventKind::Ema,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Call => "calls",
            EventKind::App => "apps",
            EventKind::Gps => "gps",
            EventKind::Audio => "audio",
            EventKind::Activity => "activity",
            EventKind::Lock => "locks",
            EventKind::Ema => "ema",
        }
    }
}

/// One invariant breach found by [`validate_event`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    OutOfWindow,
    ClassOutOfRange,
    NegativeDuration,
    LatitudeOutOfRange,
    LongitudeOutOfRange,
    EmaValueOutOfRange,
    NonFiniteNumber,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::OutOfWindow => "timestamp outside the study window",
            Violation::ClassOutOfRange => "class out of range",
            Violation::NegativeDuration => "negative duration",
            Violation::LatitudeOutOfRange => "latitude out of range",
            Violation::LongitudeOutOfRange => "longitude out of range",
            Violation::EmaValueOutOfRange => "EMA value out of topic range",
            Violation::NonFiniteNumber => "non-finite numeric field",
        };
        f.write_str(s)
    }
}

/// Checks every declared invariant of an event against the study window.
///
/// Total: returns the full list of violations, empty when the event is
/// valid. Anomalously long calls are legal; only negative durations are not.
pub fn validate_event(event: &TelemetryEvent, window: &StudyWindow) -> Vec<Violation> {
    let mut violations = Vec::new();
    if !window.contains(event.time()) {
        violations.push(Violation::OutOfWindow);
    }
    match *event {
        TelemetryEvent::Call { duration_min, .. } => {
            if !duration_min.is_finite() {
                violations.push(Violation::NonFiniteNumber);
            } else if duration_min < 0.0 {
                violations.push(Violation::NegativeDuration);
            }
        }
        TelemetryEvent::GpsFix { lat, lon, .. } => {
            if !lat.is_finite() || !lon.is_finite() {
                violations.push(Violation::NonFiniteNumber);
            } else {
                if !(-90.0..=90.0).contains(&lat) {
                    violations.push(Violation::LatitudeOutOfRange);
                }
                if !(-180.0..=180.0).contains(&lon) {
                    violations.push(Violation::LongitudeOutOfRange);
                }
            }
        }
        TelemetryEvent::AudioInf { class, .. } | TelemetryEvent::ActivityInf { class, .. } => {
            if class > 3 {
                violations.push(Violation::ClassOutOfRange);
            }
        }
        TelemetryEvent::EmaResponse { topic, value, .. } => {
            if !value.is_finite() {
                violations.push(Violation::NonFiniteNumber);
            } else if !topic.in_range(value) {
                violations.push(Violation::EmaValueOutOfRange);
            }
        }
        TelemetryEvent::AppTask { .. } | TelemetryEvent::LockEvent { .. } => {}
    }
    violations
}

/// Per-hour feature components for one grid cell, before vocabulary
/// encoding. `audio_code`/`activity_code` are -1 when the hour had no
/// inferences and 4 when the mode was ambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct HourSample {
    pub key: HourKey,
    pub call_minutes: f64,
    pub app_token: String,
    pub gps_token: String,
    pub audio_code: i8,
    pub activity_code: i8,
    pub lock_count: u32,
    /// Hourly-averaged EMA values, absent topics omitted.
    pub ema: BTreeMap<EmaTopic, f64>,
}

/// Mood flags for one sample. Deliberately independent booleans: the
/// labeling rules overlap, so a sample can be several moods at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MoodLabels {
    pub happy: bool,
    pub upset: bool,
    pub stressed: bool,
}

impl MoodLabels {
    pub fn none(&self) -> bool {
        !self.happy && !self.upset && !self.stressed
    }

    pub fn get(&self, mood: Mood) -> bool {
        match mood {
            Mood::Happy => self.happy,
            Mood::Upset => self.upset,
            Mood::Stressed => self.stressed,
        }
    }
}

/// The three mood targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mood {
    Happy,
    Upset,
    Stressed,
}

impl Mood {
    pub const ALL: [Mood; 3] = [Mood::Happy, Mood::Upset, Mood::Stressed];

    pub fn name(&self) -> &'static str {
        match self {
            Mood::Happy => "happy",
            Mood::Upset => "upset",
            Mood::Stressed => "stressed",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "happy" => Some(Mood::Happy),
            "upset" => Some(Mood::Upset),
            "stressed" => Some(Mood::Stressed),
            _ => None,
        }
    }
}

impl fmt::Display for Mood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> StudyWindow {
        StudyWindow::new(0, 48 * 3600)
    }

    #[test]
    fn audio_class_out_of_range_is_reported() {
        let e = TelemetryEvent::AudioInf { subject: SubjectId(0), time: 100, class: 5 };
        assert_eq!(validate_event(&e, &window()), vec![Violation::ClassOutOfRange]);
    }

    #[test]
    fn anomalously_long_call_is_valid() {
        // durations far beyond one hour are kept, not clipped
        let e = TelemetryEvent::Call { subject: SubjectId(0), start_time: 0, duration_min: 2386.0 };
        assert!(validate_event(&e, &window()).is_empty());
    }

    #[test]
    fn in_range_gps_fix_is_valid() {
        let e = TelemetryEvent::GpsFix { subject: SubjectId(1), time: 3600, lat: 43.7, lon: -72.3 };
        assert!(validate_event(&e, &window()).is_empty());
    }

    #[test]
    fn out_of_window_and_negative_duration_both_reported() {
        let e = TelemetryEvent::Call {
            subject: SubjectId(0),
            start_time: 48 * 3600,
            duration_min: -1.0,
        };
        let v = validate_event(&e, &window());
        assert!(v.contains(&Violation::OutOfWindow));
        assert!(v.contains(&Violation::NegativeDuration));
    }

    #[test]
    fn ema_value_outside_topic_range_is_reported() {
        let e = TelemetryEvent::EmaResponse {
            subject: SubjectId(0),
            time: 10,
            topic: EmaTopic::CurrentMood,
            value: 4.0,
        };
        assert_eq!(validate_event(&e, &window()), vec![Violation::EmaValueOutOfRange]);
    }

    #[test]
    fn grid_hours_rounds_partial_hours_up() {
        assert_eq!(StudyWindow::new(0, 7200).grid_hours(), 2);
        assert_eq!(StudyWindow::new(0, 7201).grid_hours(), 3);
        assert_eq!(StudyWindow::new(0, 3599).grid_hours(), 1);
    }

    #[test]
    fn hour_index_floors_within_window() {
        let w = window();
        assert_eq!(w.hour_index(13 * 3600 + 59 * 60), Some(13));
        assert_eq!(w.hour_index(0), Some(0));
        assert_eq!(w.hour_index(48 * 3600), None);
        assert_eq!(w.hour_index(-1), None);
    }

    #[test]
    fn day_of_hour_uses_utc_days() {
        let w = StudyWindow::new(12 * 3600, 72 * 3600);
        assert_eq!(w.day_of_hour(0), 0); // 12:00 of epoch day 0
        assert_eq!(w.day_of_hour(12), 1); // 24h later
        assert_eq!(w.day_of_hour(11), 0);
    }
}

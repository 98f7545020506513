//! Turns a validated event collection into per-hour samples and the dense
//! numeric feature matrix.
//!
//! Per hour and subject the features are: summed call minutes, the set of
//! app task ids as one token, the set of gps cluster labels as one token,
//! the audio and activity inference modes, and the lock count. The two
//! token kinds are one-hot encoded over vocabularies built from the full
//! dataset, so the column layout is
//! `[app block | gps block | call | audio | activity | lock]`.

pub mod dbscan;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mood::average_hourly;
use crate::telemetry::{HourKey, HourSample, StudyWindow, SubjectId, TelemetryEvent};
use dbscan::{dbscan, ClusterLabel};

/// Knobs for the gps clustering step. The defaults mirror the common
/// tooling defaults: eps 0.5, min_pts 5, Euclidean distance on raw degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturizeConfig {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 5 }
    }
}

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("token {token:?} missing from the {block} vocabulary; vocabularies must be built over the full dataset")]
    UnknownToken { block: &'static str, token: String },
    #[error("feature matrix shape error: {0}")]
    Shape(String),
}

/// Sum of call durations started within the hour. Anomalous durations are
/// kept as-is.
pub fn call_feature(durations_min: &[f64]) -> f64 {
    durations_min.iter().sum()
}

/// Mode of the hour's inference classes: -1 when empty, 4 when two or more
/// classes tie for the mode, otherwise the unique mode.
pub fn mode_code(classes: &[u8]) -> i8 {
    if classes.is_empty() {
        return -1;
    }
    let mut counts = [0usize; 4];
    for &c in classes {
        counts[usize::from(c.min(3))] += 1;
    }
    let best = *counts.iter().max().expect("non-empty");
    let mut modes = counts.iter().filter(|&&c| c == best);
    let first = modes.next();
    debug_assert!(first.is_some());
    if modes.next().is_some() {
        4
    } else {
        counts.iter().position(|&c| c == best).expect("mode exists") as i8
    }
}

/// Sorted distinct task ids, space-joined. No app usage encodes as "".
pub fn app_token<'a, I: IntoIterator<Item = &'a str>>(task_ids: I) -> String {
    let set: BTreeSet<&str> = task_ids.into_iter().collect();
    set.into_iter().collect::<Vec<_>>().join(" ")
}

/// Sorted distinct cluster labels of the hour's fixes, space-joined, with
/// noise rendered as "n" after all cluster ids. No fixes encode as "".
pub fn gps_token(labels: &[ClusterLabel]) -> String {
    let set: BTreeSet<ClusterLabel> = labels.iter().copied().collect();
    set.into_iter().map(|l| l.symbol()).collect::<Vec<_>>().join(" ")
}

/// Dense per-hour event buckets: every (subject, hour) cell of the grid is
/// present, hours with no events map to an empty slice. Calls bucket by
/// their start time only.
pub fn bucket_hours<'a>(
    events: &'a [TelemetryEvent],
    window: &StudyWindow,
    subjects: &[SubjectId],
) -> BTreeMap<HourKey, Vec<&'a TelemetryEvent>> {
    let mut buckets: BTreeMap<HourKey, Vec<&TelemetryEvent>> = BTreeMap::new();
    for &subject in subjects {
        for hour_index in 0..window.grid_hours() {
            buckets.insert(HourKey::new(subject, hour_index), Vec::new());
        }
    }
    for event in events {
        if let Some(hour_index) = window.hour_index(event.time()) {
            let key = HourKey::new(event.subject(), hour_index);
            if let Some(bucket) = buckets.get_mut(&key) {
                bucket.push(event);
            }
        }
    }
    buckets
}

/// Builds the dense list of [`HourSample`]s for the whole grid.
///
/// The gps clustering is fitted once over every fix in the dataset (all
/// subjects jointly, in event order) before any per-hour tokenization.
pub fn hour_samples(
    events: &[TelemetryEvent],
    window: &StudyWindow,
    subjects: &[SubjectId],
    config: &FeaturizeConfig,
) -> Vec<HourSample> {
    // fit clustering dataset-wide; every event gets its fix label (if any)
    // aligned by position
    let fix_points: Vec<(f64, f64)> = events
        .iter()
        .filter_map(|e| match *e {
            TelemetryEvent::GpsFix { lat, lon, .. } => Some((lat, lon)),
            _ => None,
        })
        .collect();
    let fix_labels = dbscan(&fix_points, config.eps, config.min_pts);
    let mut fix_cursor = 0usize;
    let label_of_event: Vec<Option<ClusterLabel>> = events
        .iter()
        .map(|event| {
            if matches!(event, TelemetryEvent::GpsFix { .. }) {
                let label = fix_labels[fix_cursor];
                fix_cursor += 1;
                Some(label)
            } else {
                None
            }
        })
        .collect();

    let ema_hourly = average_hourly(events, window);

    let mut index_buckets: BTreeMap<HourKey, Vec<usize>> = BTreeMap::new();
    for &subject in subjects {
        for hour_index in 0..window.grid_hours() {
            index_buckets.insert(HourKey::new(subject, hour_index), Vec::new());
        }
    }
    for (i, event) in events.iter().enumerate() {
        if let Some(hour_index) = window.hour_index(event.time()) {
            let key = HourKey::new(event.subject(), hour_index);
            if let Some(bucket) = index_buckets.get_mut(&key) {
                bucket.push(i);
            }
        }
    }

    let mut samples: Vec<HourSample> = index_buckets
        .into_iter()
        .map(|(key, bucket)| {
            let mut durations = Vec::new();
            let mut task_ids = Vec::new();
            let mut gps_labels = Vec::new();
            let mut audio = Vec::new();
            let mut activity = Vec::new();
            let mut lock_count = 0u32;
            for i in bucket {
                match &events[i] {
                    TelemetryEvent::Call { duration_min, .. } => durations.push(*duration_min),
                    TelemetryEvent::AppTask { task_id, .. } => task_ids.push(task_id.as_str()),
                    TelemetryEvent::GpsFix { .. } => {
                        gps_labels.push(label_of_event[i].expect("fix has a label"));
                    }
                    TelemetryEvent::AudioInf { class, .. } => audio.push(*class),
                    TelemetryEvent::ActivityInf { class, .. } => activity.push(*class),
                    TelemetryEvent::LockEvent { .. } => lock_count += 1,
                    TelemetryEvent::EmaResponse { .. } => {}
                }
            }
            HourSample {
                key,
                call_minutes: call_feature(&durations),
                app_token: app_token(task_ids),
                gps_token: gps_token(&gps_labels),
                audio_code: mode_code(&audio),
                activity_code: mode_code(&activity),
                lock_count,
                ema: ema_hourly.get(&key).cloned().unwrap_or_default(),
            }
        })
        .collect();

    // canonical row order: hour-major, then subject
    samples.sort_by_key(|s| (s.key.hour_index, s.key.subject));
    samples
}

/// Ordered token -> column mapping, built once over the full dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl TokenVocabulary {
    /// Builds a vocabulary from the distinct tokens, ordered
    /// lexicographically so the layout is independent of row order.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let set: BTreeSet<String> = tokens.into_iter().collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        if self.index.is_empty() && !self.tokens.is_empty() {
            // deserialized without the derived index; linear scan is fine
            return self.tokens.iter().position(|t| t == token);
        }
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }
}

/// The encoded dataset: row keys, column names, and the dense value matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub keys: Vec<HourKey>,
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Row indices grouped by hour, in hour order. Relies on the canonical
    /// hour-major row layout.
    pub fn rows_by_hour(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, key) in self.keys.iter().enumerate() {
            map.entry(key.hour_index).or_default().push(i);
        }
        map
    }

    pub fn subjects(&self) -> Vec<SubjectId> {
        let set: BTreeSet<SubjectId> = self.keys.iter().map(|k| k.subject).collect();
        set.into_iter().collect()
    }
}

/// Vocabularies for the two token blocks, extracted from the full sample
/// list before any train/test split.
pub fn build_vocabularies(samples: &[HourSample]) -> (TokenVocabulary, TokenVocabulary) {
    let app = TokenVocabulary::from_tokens(samples.iter().map(|s| s.app_token.clone()));
    let gps = TokenVocabulary::from_tokens(samples.iter().map(|s| s.gps_token.clone()));
    (app, gps)
}

/// Encodes samples into the dense matrix. Column count is always
/// `|app_vocab| + |gps_vocab| + 4`.
pub fn build_matrix(
    samples: &[HourSample],
    app_vocab: &TokenVocabulary,
    gps_vocab: &TokenVocabulary,
) -> Result<FeatureMatrix, FeaturizeError> {
    let n_app = app_vocab.len();
    let n_gps = gps_vocab.len();
    let n_cols = n_app + n_gps + 4;
    let n_rows = samples.len();

    let mut names = Vec::with_capacity(n_cols);
    names.extend(app_vocab.tokens().iter().map(|t| format!("apps_{t}")));
    names.extend(gps_vocab.tokens().iter().map(|t| format!("gps_{t}")));
    names.extend(["call", "audio", "activity", "lock"].map(String::from));

    let mut values = Array2::<f64>::zeros((n_rows, n_cols));
    let mut keys = Vec::with_capacity(n_rows);
    for (r, sample) in samples.iter().enumerate() {
        let app_col = app_vocab.index_of(&sample.app_token).ok_or_else(|| {
            FeaturizeError::UnknownToken { block: "app", token: sample.app_token.clone() }
        })?;
        let gps_col = gps_vocab.index_of(&sample.gps_token).ok_or_else(|| {
            FeaturizeError::UnknownToken { block: "gps", token: sample.gps_token.clone() }
        })?;
        values[(r, app_col)] = 1.0;
        values[(r, n_app + gps_col)] = 1.0;
        values[(r, n_app + n_gps)] = sample.call_minutes;
        values[(r, n_app + n_gps + 1)] = f64::from(sample.audio_code);
        values[(r, n_app + n_gps + 2)] = f64::from(sample.activity_code);
        values[(r, n_app + n_gps + 3)] = f64::from(sample.lock_count);
        keys.push(sample.key);
    }

    Ok(FeatureMatrix { keys, names, values })
}

/// Full featurization: samples, vocabularies, matrix.
pub fn featurize(
    events: &[TelemetryEvent],
    window: &StudyWindow,
    subjects: &[SubjectId],
    config: &FeaturizeConfig,
) -> Result<FeatureMatrix, FeaturizeError> {
    let samples = hour_samples(events, window, subjects, config);
    let (app_vocab, gps_vocab) = build_vocabularies(&samples);
    build_matrix(&samples, &app_vocab, &gps_vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::SubjectId;

    fn s(id: u32) -> SubjectId {
        SubjectId(id)
    }

    #[test]
    fn call_feature_sums_and_keeps_anomalies() {
        assert_eq!(call_feature(&[]), 0.0);
        assert_eq!(call_feature(&[20.0, 30.0]), 50.0);
        assert_eq!(call_feature(&[2386.0]), 2386.0);
    }

    #[test]
    fn mode_code_covers_empty_unique_and_tied() {
        assert_eq!(mode_code(&[]), -1);
        assert_eq!(mode_code(&[1, 1, 2]), 1);
        assert_eq!(mode_code(&[1, 2]), 4);
        assert_eq!(mode_code(&[0]), 0);
        assert_eq!(mode_code(&[3, 3, 0, 0]), 4);
        assert_eq!(mode_code(&[2, 2, 2, 1]), 2);
    }

    #[test]
    fn app_token_sorts_and_dedups() {
        assert_eq!(app_token([]), "");
        assert_eq!(app_token(["2", "3", "2"]), "2 3");
        assert_eq!(app_token(["7"]), "7");
        // byte-lexicographic ordering, not numeric
        assert_eq!(app_token(["10", "2"]), "10 2");
    }

    #[test]
    fn gps_token_orders_clusters_then_noise() {
        assert_eq!(gps_token(&[]), "");
        assert_eq!(gps_token(&[ClusterLabel::Cluster(1)]), "1");
        assert_eq!(gps_token(&[ClusterLabel::Cluster(1), ClusterLabel::Cluster(0)]), "0 1");
        assert_eq!(
            gps_token(&[ClusterLabel::Noise, ClusterLabel::Cluster(10), ClusterLabel::Cluster(2)]),
            "2 10 n"
        );
    }

    #[test]
    fn bucket_hours_is_dense_and_floors() {
        let window = StudyWindow::new(0, 24 * 3600);
        let subjects = [s(0)];
        let events = vec![
            TelemetryEvent::AppTask { subject: s(0), time: 13 * 3600 + 59 * 60, task_id: "a".into() },
            // a call is bucketed by its start hour even when it runs longer
            TelemetryEvent::Call { subject: s(0), start_time: 13 * 3600 + 50 * 60, duration_min: 30.0 },
        ];
        let buckets = bucket_hours(&events, &window, &subjects);
        assert_eq!(buckets.len(), 24);
        assert_eq!(buckets[&HourKey::new(s(0), 13)].len(), 2);
        assert!(buckets[&HourKey::new(s(0), 7)].is_empty());
        assert!(buckets[&HourKey::new(s(0), 14)].is_empty());
    }

    fn tiny_dataset() -> (Vec<TelemetryEvent>, StudyWindow, Vec<SubjectId>) {
        let window = StudyWindow::new(0, 48 * 3600);
        let events = vec![
            TelemetryEvent::AppTask { subject: s(0), time: 100, task_id: "2".into() },
            TelemetryEvent::AppTask { subject: s(0), time: 200, task_id: "3".into() },
            TelemetryEvent::Call { subject: s(1), start_time: 3700, duration_min: 5.0 },
            TelemetryEvent::AudioInf { subject: s(1), time: 3800, class: 2 },
            TelemetryEvent::LockEvent { subject: s(0), time: 7300 },
            TelemetryEvent::LockEvent { subject: s(0), time: 7400 },
        ];
        (events, window, vec![s(0), s(1)])
    }

    #[test]
    fn dense_grid_has_w_times_s_samples() {
        let (events, window, subjects) = tiny_dataset();
        let samples = hour_samples(&events, &window, &subjects, &FeaturizeConfig::default());
        assert_eq!(samples.len(), 48 * 2);
    }

    #[test]
    fn empty_hour_sample_has_neutral_features() {
        let (events, window, subjects) = tiny_dataset();
        let samples = hour_samples(&events, &window, &subjects, &FeaturizeConfig::default());
        let empty = samples.iter().find(|x| x.key == HourKey::new(s(1), 5)).unwrap();
        assert_eq!(empty.call_minutes, 0.0);
        assert_eq!(empty.app_token, "");
        assert_eq!(empty.gps_token, "");
        assert_eq!(empty.audio_code, -1);
        assert_eq!(empty.activity_code, -1);
        assert_eq!(empty.lock_count, 0);
    }

    #[test]
    fn matrix_layout_and_row_order() {
        let (events, window, subjects) = tiny_dataset();
        let matrix = featurize(&events, &window, &subjects, &FeaturizeConfig::default()).unwrap();
        // app vocab {"", "2 3"}, gps vocab {""}
        assert_eq!(matrix.n_cols(), 2 + 1 + 4);
        assert_eq!(matrix.n_rows(), 96);
        assert_eq!(matrix.names[0], "apps_");
        assert_eq!(matrix.names[1], "apps_2 3");
        assert_eq!(matrix.names[2], "gps_");
        assert_eq!(&matrix.names[3..], &["call", "audio", "activity", "lock"]);
        // hour-major ordering: first two rows are hour 0 of subjects 0 and 1
        assert_eq!(matrix.keys[0], HourKey::new(s(0), 0));
        assert_eq!(matrix.keys[1], HourKey::new(s(1), 0));
        assert_eq!(matrix.keys[2], HourKey::new(s(0), 1));
        // subject 0 hour 0 used apps {2,3}
        assert_eq!(matrix.values[(0, 1)], 1.0);
        assert_eq!(matrix.values[(0, 0)], 0.0);
        // subject 1 hour 1: call 5 minutes, audio class 2
        let r = matrix.keys.iter().position(|k| *k == HourKey::new(s(1), 1)).unwrap();
        assert_eq!(matrix.values[(r, 3)], 5.0);
        assert_eq!(matrix.values[(r, 4)], 2.0);
        assert_eq!(matrix.values[(r, 5)], -1.0);
        // subject 0 hour 2: two locks
        let r = matrix.keys.iter().position(|k| *k == HourKey::new(s(0), 2)).unwrap();
        assert_eq!(matrix.values[(r, 6)], 2.0);
    }

    #[test]
    fn one_hot_blocks_sum_to_one_per_row() {
        let (events, window, subjects) = tiny_dataset();
        let samples = hour_samples(&events, &window, &subjects, &FeaturizeConfig::default());
        let (app_vocab, gps_vocab) = build_vocabularies(&samples);
        let matrix = build_matrix(&samples, &app_vocab, &gps_vocab).unwrap();
        for r in 0..matrix.n_rows() {
            let app_sum: f64 = (0..app_vocab.len()).map(|c| matrix.values[(r, c)]).sum();
            let gps_sum: f64 =
                (0..gps_vocab.len()).map(|c| matrix.values[(r, app_vocab.len() + c)]).sum();
            assert_eq!(app_sum, 1.0);
            assert_eq!(gps_sum, 1.0);
        }
    }

    #[test]
    fn unknown_token_is_an_error() {
        let (events, window, subjects) = tiny_dataset();
        let samples = hour_samples(&events, &window, &subjects, &FeaturizeConfig::default());
        let (_, gps_vocab) = build_vocabularies(&samples);
        let stale_app_vocab = TokenVocabulary::from_tokens(["1 9".to_string()]);
        let err = build_matrix(&samples, &stale_app_vocab, &gps_vocab).unwrap_err();
        assert!(matches!(err, FeaturizeError::UnknownToken { block: "app", .. }));
    }

    #[test]
    fn featurization_is_deterministic() {
        let (events, window, subjects) = tiny_dataset();
        let a = featurize(&events, &window, &subjects, &FeaturizeConfig::default()).unwrap();
        let b = featurize(&events, &window, &subjects, &FeaturizeConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn column_count_identity_matches_vocab_sizes() {
        // fixture at the reference scale: 7802 app tokens + 28 gps tokens
        let app = TokenVocabulary::from_tokens((0..7802).map(|i| format!("t{i}")));
        let gps = TokenVocabulary::from_tokens((0..28).map(|i| format!("{i}")));
        assert_eq!(app.len() + gps.len() + 4, 7834);
    }
}

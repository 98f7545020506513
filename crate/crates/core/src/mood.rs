//! EMA processing: hourly averaging, label propagation (the H and D dataset
//! variants), and mood classification.
//!
//! The three mood flags are independent disjunctions over the hourly EMA
//! map. Equality clauses use exact comparison, so a fractional averaged
//! value such as 1.5 fires no `= c` clause; range clauses compare
//! numerically. Absent topics make their clauses false.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::telemetry::{EmaTopic, HourKey, MoodLabels, StudyWindow, SubjectId, TelemetryEvent};

/// Hourly-averaged EMA values per grid cell. Hours with no responses are
/// absent from the map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmaHourly {
    pub by_key: BTreeMap<HourKey, BTreeMap<EmaTopic, f64>>,
}

impl EmaHourly {
    pub fn get(&self, key: &HourKey) -> Option<&BTreeMap<EmaTopic, f64>> {
        self.by_key.get(key)
    }

    /// Number of cells with at least one topic present.
    pub fn labeled_count(&self) -> usize {
        self.by_key.len()
    }
}

/// Which propagation was applied to the EMA map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetVariant {
    Raw,
    H,
    D,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 3] = [DatasetVariant::Raw, DatasetVariant::H, DatasetVariant::D];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetVariant::Raw => "raw",
            DatasetVariant::H => "h",
            DatasetVariant::D => "d",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(DatasetVariant::Raw),
            "h" => Some(DatasetVariant::H),
            "d" => Some(DatasetVariant::D),
            _ => None,
        }
    }
}

impl std::fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Arithmetic mean of the reported values per (hour, topic). Events other
/// than EMA responses are ignored.
pub fn average_hourly(events: &[TelemetryEvent], window: &StudyWindow) -> EmaHourly {
    let mut sums: BTreeMap<HourKey, BTreeMap<EmaTopic, (f64, u32)>> = BTreeMap::new();
    for event in events {
        if let TelemetryEvent::EmaResponse { subject, time, topic, value } = *event {
            if let Some(hour_index) = window.hour_index(time) {
                let entry = sums
                    .entry(HourKey::new(subject, hour_index))
                    .or_default()
                    .entry(topic)
                    .or_insert((0.0, 0));
                entry.0 += value;
                entry.1 += 1;
            }
        }
    }
    let by_key = sums
        .into_iter()
        .map(|(key, topics)| {
            let averaged = topics
                .into_iter()
                .map(|(topic, (sum, n))| (topic, sum / f64::from(n)))
                .collect();
            (key, averaged)
        })
        .collect();
    EmaHourly { by_key }
}

/// Builds the H variant: each original value is copied to the adjacent
/// hours h-1 and h+1 (same subject, same topic) where those hours had no
/// value for that topic.
///
/// Propagation reads only the original map, so filled hours never chain
/// into further hours and the result is independent of iteration order.
/// When both neighbors of an empty hour donate, their mean is used.
pub fn propagate_hourly(ema: &EmaHourly, grid_hours: u32) -> EmaHourly {
    let mut donations: BTreeMap<HourKey, BTreeMap<EmaTopic, (f64, u32)>> = BTreeMap::new();
    for (key, topics) in &ema.by_key {
        for (&topic, &value) in topics {
            let mut neighbors = Vec::with_capacity(2);
            if key.hour_index > 0 {
                neighbors.push(key.hour_index - 1);
            }
            if key.hour_index + 1 < grid_hours {
                neighbors.push(key.hour_index + 1);
            }
            for hour in neighbors {
                let target = HourKey::new(key.subject, hour);
                let already = ema.get(&target).is_some_and(|t| t.contains_key(&topic));
                if !already {
                    let entry = donations.entry(target).or_default().entry(topic).or_insert((0.0, 0));
                    entry.0 += value;
                    entry.1 += 1;
                }
            }
        }
    }

    let mut out = ema.clone();
    for (key, topics) in donations {
        let slot = out.by_key.entry(key).or_default();
        for (topic, (sum, n)) in topics {
            slot.insert(topic, sum / f64::from(n));
        }
    }
    out
}

/// Builds the D variant: per (subject, topic, UTC calendar day) with at
/// least one response, every grid hour of that day carries the day's mean.
/// Days without responses stay unlabeled.
pub fn propagate_daily(ema: &EmaHourly, window: &StudyWindow) -> EmaHourly {
    let grid_hours = window.grid_hours();

    // (subject, day, topic) -> running mean of original hourly values
    let mut day_sums: BTreeMap<(SubjectId, i64, EmaTopic), (f64, u32)> = BTreeMap::new();
    for (key, topics) in &ema.by_key {
        let day = window.day_of_hour(key.hour_index);
        for (&topic, &value) in topics {
            let entry = day_sums.entry((key.subject, day, topic)).or_insert((0.0, 0));
            entry.0 += value;
            entry.1 += 1;
        }
    }

    let mut out = EmaHourly::default();
    if day_sums.is_empty() {
        return out;
    }
    let mut hours_by_day: BTreeMap<i64, Vec<u32>> = BTreeMap::new();
    for hour in 0..grid_hours {
        hours_by_day.entry(window.day_of_hour(hour)).or_default().push(hour);
    }
    for ((subject, day, topic), (sum, n)) in day_sums {
        let mean = sum / f64::from(n);
        if let Some(hours) = hours_by_day.get(&day) {
            for &hour in hours {
                out.by_key
                    .entry(HourKey::new(subject, hour))
                    .or_default()
                    .insert(topic, mean);
            }
        }
    }
    out
}

/// Applies the configured propagation to a raw hourly map.
pub fn build_variant(raw: &EmaHourly, variant: DatasetVariant, window: &StudyWindow) -> EmaHourly {
    match variant {
        DatasetVariant::Raw => raw.clone(),
        DatasetVariant::H => propagate_hourly(raw, window.grid_hours()),
        DatasetVariant::D => propagate_daily(raw, window),
    }
}

fn eq(v: Option<f64>, c: f64) -> bool {
    v == Some(c)
}

fn ge(v: Option<f64>, c: f64) -> bool {
    v.is_some_and(|x| x >= c)
}

/// Mood flags for one sample's EMA map.
pub fn classify_mood(ema: &BTreeMap<EmaTopic, f64>) -> MoodLabels {
    let stress = ema.get(&EmaTopic::Stress).copied();
    let mood = ema.get(&EmaTopic::CurrentMood).copied();
    let sleep = ema.get(&EmaTopic::SleepQuality).copied();
    let happiness = ema.get(&EmaTopic::Happiness).copied();
    let sadness = ema.get(&EmaTopic::Sadness).copied();

    MoodLabels {
        happy: eq(sleep, 1.0) || ge(stress, 4.0) || ge(happiness, 2.0) || eq(mood, 1.0),
        upset: eq(stress, 3.0) || (eq(mood, 3.0) && ge(sleep, 3.0)) || ge(sadness, 2.0),
        stressed: ge(sleep, 3.0)
            || stress.is_some_and(|s| (1.0..=3.0).contains(&s))
            || eq(mood, 2.0),
    }
}

/// Mood flags for every labeled cell of an EMA map. Cells absent from the
/// map are implicitly all-false.
pub fn classify_all(ema: &EmaHourly) -> BTreeMap<HourKey, MoodLabels> {
    ema.by_key.iter().map(|(key, topics)| (*key, classify_mood(topics))).collect()
}

/// Labeled-sample counts for one subject.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectCoverage {
    pub labeled: usize,
    pub happy: usize,
    pub upset: usize,
    pub stressed: usize,
}

/// Coverage of EMA labels over the dense grid for one dataset variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub variant: DatasetVariant,
    pub total_samples: usize,
    /// Cells with at least one EMA topic present.
    pub labeled_count: usize,
    pub fraction: f64,
    pub per_subject: BTreeMap<SubjectId, SubjectCoverage>,
}

/// Counts labeled samples and per-subject mood flags for the given variant
/// map over a grid of `subjects` x `grid_hours`.
pub fn coverage_report(
    variant: DatasetVariant,
    ema: &EmaHourly,
    subjects: &[SubjectId],
    grid_hours: u32,
) -> CoverageReport {
    let total_samples = subjects.len() * grid_hours as usize;
    let mut per_subject: BTreeMap<SubjectId, SubjectCoverage> =
        subjects.iter().map(|&s| (s, SubjectCoverage::default())).collect();
    let mut labeled_count = 0usize;
    for (key, topics) in &ema.by_key {
        if topics.is_empty() {
            continue;
        }
        labeled_count += 1;
        let flags = classify_mood(topics);
        let counts = per_subject.entry(key.subject).or_default();
        counts.labeled += 1;
        if flags.happy {
            counts.happy += 1;
        }
        if flags.upset {
            counts.upset += 1;
        }
        if flags.stressed {
            counts.stressed += 1;
        }
    }
    let fraction = if total_samples == 0 { 0.0 } else { labeled_count as f64 / total_samples as f64 };
    CoverageReport { variant, total_samples, labeled_count, fraction, per_subject }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::SubjectId;

    fn key(subject: u32, hour: u32) -> HourKey {
        HourKey::new(SubjectId(subject), hour)
    }

    fn ema_at(entries: &[(u32, u32, EmaTopic, f64)]) -> EmaHourly {
        let mut out = EmaHourly::default();
        for &(s, h, t, v) in entries {
            out.by_key.entry(key(s, h)).or_default().insert(t, v);
        }
        out
    }

    #[test]
    fn average_hourly_means_within_hour() {
        let window = StudyWindow::new(0, 24 * 3600);
        let events = vec![
            TelemetryEvent::EmaResponse { subject: SubjectId(0), time: 100, topic: EmaTopic::Stress, value: 2.0 },
            TelemetryEvent::EmaResponse { subject: SubjectId(0), time: 200, topic: EmaTopic::Stress, value: 4.0 },
            TelemetryEvent::EmaResponse { subject: SubjectId(0), time: 3700, topic: EmaTopic::Sadness, value: 1.0 },
        ];
        let hourly = average_hourly(&events, &window);
        assert_eq!(hourly.get(&key(0, 0)).unwrap()[&EmaTopic::Stress], 3.0);
        assert_eq!(hourly.get(&key(0, 1)).unwrap()[&EmaTopic::Sadness], 1.0);
        assert!(hourly.get(&key(0, 2)).is_none());
    }

    #[test]
    fn hourly_propagation_fills_adjacent_hours() {
        let raw = ema_at(&[(0, 10, EmaTopic::Stress, 2.0)]);
        let h = propagate_hourly(&raw, 24);
        for hour in [9, 10, 11] {
            assert_eq!(h.get(&key(0, hour)).unwrap()[&EmaTopic::Stress], 2.0);
        }
        assert!(h.get(&key(0, 8)).is_none());
        assert!(h.get(&key(0, 12)).is_none());
    }

    #[test]
    fn hourly_propagation_never_overwrites() {
        let raw = ema_at(&[(0, 10, EmaTopic::Stress, 2.0), (0, 11, EmaTopic::Stress, 5.0)]);
        let h = propagate_hourly(&raw, 24);
        assert_eq!(h.get(&key(0, 9)).unwrap()[&EmaTopic::Stress], 2.0);
        assert_eq!(h.get(&key(0, 10)).unwrap()[&EmaTopic::Stress], 2.0);
        assert_eq!(h.get(&key(0, 11)).unwrap()[&EmaTopic::Stress], 5.0);
        assert_eq!(h.get(&key(0, 12)).unwrap()[&EmaTopic::Stress], 5.0);
    }

    #[test]
    fn hourly_propagation_clamps_at_grid_edges() {
        let raw = ema_at(&[(0, 0, EmaTopic::Happiness, 3.0), (0, 23, EmaTopic::Happiness, 2.0)]);
        let h = propagate_hourly(&raw, 24);
        assert_eq!(h.get(&key(0, 1)).unwrap()[&EmaTopic::Happiness], 3.0);
        assert_eq!(h.get(&key(0, 22)).unwrap()[&EmaTopic::Happiness], 2.0);
        assert_eq!(h.labeled_count(), 4);
    }

    #[test]
    fn hourly_propagation_averages_competing_donors() {
        // hours 8 and 10 both donate into empty hour 9
        let raw = ema_at(&[(0, 8, EmaTopic::Stress, 2.0), (0, 10, EmaTopic::Stress, 4.0)]);
        let h = propagate_hourly(&raw, 24);
        assert_eq!(h.get(&key(0, 9)).unwrap()[&EmaTopic::Stress], 3.0);
    }

    #[test]
    fn daily_propagation_broadcasts_day_mean() {
        let window = StudyWindow::new(0, 48 * 3600);
        let raw = ema_at(&[(0, 3, EmaTopic::Stress, 2.0), (0, 20, EmaTopic::Stress, 4.0)]);
        let d = propagate_daily(&raw, &window);
        for hour in 0..24 {
            assert_eq!(d.get(&key(0, hour)).unwrap()[&EmaTopic::Stress], 3.0);
        }
        for hour in 24..48 {
            assert!(d.get(&key(0, hour)).is_none());
        }
    }

    #[test]
    fn daily_propagation_is_per_topic_and_per_subject() {
        let window = StudyWindow::new(0, 24 * 3600);
        let raw = ema_at(&[
            (0, 3, EmaTopic::Stress, 2.0),
            (1, 5, EmaTopic::Sadness, 3.0),
        ]);
        let d = propagate_daily(&raw, &window);
        assert_eq!(d.get(&key(0, 10)).unwrap().len(), 1);
        assert_eq!(d.get(&key(1, 10)).unwrap()[&EmaTopic::Sadness], 3.0);
    }

    #[test]
    fn high_stress_reading_means_happy_only() {
        let mut ema = BTreeMap::new();
        ema.insert(EmaTopic::Stress, 5.0);
        let flags = classify_mood(&ema);
        assert!(flags.happy && !flags.upset && !flags.stressed);
    }

    #[test]
    fn stress_level_three_is_upset_and_stressed() {
        let mut ema = BTreeMap::new();
        ema.insert(EmaTopic::Stress, 3.0);
        let flags = classify_mood(&ema);
        assert!(!flags.happy && flags.upset && flags.stressed);
    }

    #[test]
    fn empty_ema_is_unlabeled() {
        assert!(classify_mood(&BTreeMap::new()).none());
    }

    #[test]
    fn tired_mood_with_bad_sleep_is_upset_and_stressed() {
        let mut ema = BTreeMap::new();
        ema.insert(EmaTopic::CurrentMood, 3.0);
        ema.insert(EmaTopic::SleepQuality, 3.0);
        let flags = classify_mood(&ema);
        assert!(!flags.happy && flags.upset && flags.stressed);
    }

    #[test]
    fn fractional_average_fires_no_equality_clause() {
        let mut ema = BTreeMap::new();
        ema.insert(EmaTopic::CurrentMood, 1.5);
        assert!(classify_mood(&ema).none());
        // range clauses still compare numerically
        ema.insert(EmaTopic::Stress, 2.5);
        assert!(classify_mood(&ema).stressed);
    }

    #[test]
    fn coverage_counts_per_subject() {
        let raw = ema_at(&[
            (0, 1, EmaTopic::Stress, 5.0),
            (0, 2, EmaTopic::Stress, 3.0),
            (1, 1, EmaTopic::Happiness, 1.0),
        ]);
        let subjects = [SubjectId(0), SubjectId(1)];
        let report = coverage_report(DatasetVariant::Raw, &raw, &subjects, 24);
        assert_eq!(report.total_samples, 48);
        assert_eq!(report.labeled_count, 3);
        assert!((report.fraction - 3.0 / 48.0).abs() < 1e-12);
        let s0 = &report.per_subject[&SubjectId(0)];
        assert_eq!((s0.labeled, s0.happy, s0.upset, s0.stressed), (2, 1, 1, 1));
        let s1 = &report.per_subject[&SubjectId(1)];
        assert_eq!((s1.labeled, s1.happy, s1.upset, s1.stressed), (1, 0, 0, 0));
    }

    #[test]
    fn fully_labeled_grid_has_fraction_one() {
        let mut raw = EmaHourly::default();
        for hour in 0..24 {
            raw.by_key.entry(key(0, hour)).or_default().insert(EmaTopic::Stress, 2.0);
        }
        let report = coverage_report(DatasetVariant::Raw, &raw, &[SubjectId(0)], 24);
        assert_eq!(report.fraction, 1.0);
    }
}

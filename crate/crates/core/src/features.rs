//! Per-tick feature vectors: band amplitudes and rolling RMSSD.
//!
//! Each band power `P` becomes an amplitude `sqrt(P)`; heart-rate
//! variability is the RMSSD of the most recent R-R intervals held in a
//! bounded FIFO that spans ticks (one second rarely holds more than two
//! beats).

use std::collections::VecDeque;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Band, LoadLabel, Task, BAND_COUNT, FEATURE_DIM};
use crate::ingest::csv_log::{check_header, field, CsvError};
use crate::ingest::SampleRecord;

pub const DEFAULT_RR_WINDOW: usize = 10;
pub const DEFAULT_TRUNCATE_SECONDS: usize = 3;
pub const MAX_TRUNCATE_SECONDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("negative power {value} in band {band:?}")]
    NegativePower { band: Band, value: f64 },
    #[error("RMSSD needs at least 2 intervals, got {0}")]
    InsufficientData(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// sqrt(power units), [`Band`] order.
    pub amplitude: [f64; BAND_COUNT],
    /// RMSSD in ms.
    pub hrv: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[..BAND_COUNT].copy_from_slice(&self.amplitude);
        out[BAND_COUNT] = self.hrv;
        out
    }

    pub fn from_array(values: [f64; FEATURE_DIM]) -> Self {
        let mut amplitude = [0.0; BAND_COUNT];
        amplitude.copy_from_slice(&values[..BAND_COUNT]);
        Self {
            amplitude,
            hrv: values[BAND_COUNT],
        }
    }
}

pub fn amplitude_transform(powers: &[f64; BAND_COUNT]) -> Result<[f64; BAND_COUNT], FeatureError> {
    let mut out = [0.0; BAND_COUNT];
    for ((slot, &p), band) in out.iter_mut().zip(powers).zip(Band::ALL) {
        if p < 0.0 {
            return Err(FeatureError::NegativePower { band, value: p });
        }
        *slot = p.sqrt();
    }
    Ok(out)
}

/// Root mean square of successive differences.
pub fn rmssd(intervals: &[f64]) -> Result<f64, FeatureError> {
    if intervals.len() < 2 {
        return Err(FeatureError::InsufficientData(intervals.len()));
    }
    let sum_sq: f64 = intervals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((sum_sq / (intervals.len() - 1) as f64).sqrt())
}

/// Bounded FIFO of the most recent R-R intervals.
#[derive(Debug, Clone)]
pub struct RmssdWindow {
    intervals: VecDeque<f64>,
    capacity: usize,
}

impl RmssdWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "RMSSD window needs capacity >= 2");
        Self {
            intervals: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, ms: f64) {
        if self.intervals.len() == self.capacity {
            self.intervals.pop_front();
        }
        self.intervals.push_back(ms);
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.intervals.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals.iter().copied()
    }

    pub fn rmssd(&self) -> Option<f64> {
        let (a, b) = self.intervals.as_slices();
        if a.len() + b.len() < 2 {
            return None;
        }
        if b.is_empty() {
            return rmssd(a).ok();
        }
        let v: Vec<f64> = self.iter().collect();
        rmssd(&v).ok()
    }
}

/// Incremental featurizer for one recording session. HRV is carried forward
/// while the window holds fewer than two intervals (0 before the first
/// computable value), so every tick yields nine finite features.
#[derive(Debug, Clone)]
pub struct StreamFeaturizer {
    window: RmssdWindow,
    last_hrv: f64,
}

impl StreamFeaturizer {
    pub fn new(window_capacity: usize) -> Self {
        Self {
            window: RmssdWindow::new(window_capacity),
            last_hrv: 0.0,
        }
    }

    pub fn push(&mut self, record: &SampleRecord) -> Result<FeatureVector, FeatureError> {
        let amplitude = amplitude_transform(&record.band_power)?;
        for &rr in &record.rr_intervals {
            self.window.push(rr);
        }
        if let Some(h) = self.window.rmssd() {
            self.last_hrv = h;
        }
        Ok(FeatureVector {
            amplitude,
            hrv: self.last_hrv,
        })
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.last_hrv = 0.0;
    }
}

/// One featurized tick with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant_id: String,
    pub round: u8,
    pub task: Task,
    pub tick: u32,
    pub features: FeatureVector,
    pub label: Option<LoadLabel>,
}

/// Featurize an ordered record stream. The R-R window is shared across the
/// phases and rounds of a participant and restarts when the participant
/// changes.
pub fn featurize_stream(
    records: &[SampleRecord],
    window_capacity: usize,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut featurizer = StreamFeaturizer::new(window_capacity);
    let mut current: Option<&str> = None;
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        if current != Some(r.participant_id.as_str()) {
            featurizer.reset();
            current = Some(&r.participant_id);
        }
        rows.push(FeatureRow {
            participant_id: r.participant_id.clone(),
            round: r.round,
            task: r.task,
            tick: r.tick,
            features: featurizer.push(r)?,
            label: r.task.label(),
        });
    }
    Ok(rows)
}

/// Anything tagged with the `(participant, round, task)` segment it belongs
/// to.
pub trait Segmented {
    fn segment_key(&self) -> (&str, u8, Task);
}

impl Segmented for SampleRecord {
    fn segment_key(&self) -> (&str, u8, Task) {
        SampleRecord::segment_key(self)
    }
}

impl Segmented for FeatureRow {
    fn segment_key(&self) -> (&str, u8, Task) {
        (&self.participant_id, self.round, self.task)
    }
}

/// Drop the first `n_seconds` ticks of every contiguous
/// `(participant, round, task)` segment.
pub fn truncate_head<T: Segmented + Clone>(records: &[T], n_seconds: usize) -> Vec<T> {
    assert!(n_seconds <= MAX_TRUNCATE_SECONDS, "truncation limited to {MAX_TRUNCATE_SECONDS} s");
    let mut out = Vec::with_capacity(records.len());
    let mut seen_in_segment = 0usize;
    let mut prev_key = None;
    for r in records {
        let key = r.segment_key();
        if prev_key != Some(key) {
            seen_in_segment = 0;
            prev_key = Some(key);
        }
        if seen_in_segment >= n_seconds {
            out.push(r.clone());
        }
        seen_in_segment += 1;
    }
    out
}

/// Featurize the whole stream, then drop the first `truncate_seconds` rows
/// of every task segment. The R-R window still sees the dropped ticks, as
/// it does in a live session.
pub fn extract_features(
    records: &[SampleRecord],
    window_capacity: usize,
    truncate_seconds: usize,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let rows = featurize_stream(records, window_capacity)?;
    Ok(truncate_head(&rows, truncate_seconds))
}

/// Labeled subset as parallel columns: vectors, labels, participant groups.
pub fn labeled_columns(rows: &[FeatureRow]) -> (Vec<FeatureVector>, Vec<LoadLabel>, Vec<String>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut g = Vec::new();
    for r in rows {
        if let Some(label) = r.label {
            x.push(r.features);
            y.push(label);
            g.push(r.participant_id.clone());
        }
    }
    (x, y, g)
}

pub const FEATURE_HEADER: [&str; 14] = [
    "participant",
    "round",
    "task",
    "tick",
    "a_delta",
    "a_theta",
    "a_low_alpha",
    "a_high_alpha",
    "a_low_beta",
    "a_high_beta",
    "a_low_gamma",
    "a_middle_gamma",
    "hrv",
    "label",
];

pub fn write_feature_rows<W: Write>(rows: &[FeatureRow], out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_HEADER)?;
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.participant_id.clone(),
            r.round.to_string(),
            r.task.as_str().to_string(),
            r.tick.to_string(),
        ];
        rec.extend(r.features.to_array().iter().map(|v| v.to_string()));
        rec.push(r.label.map(|l| l.as_str().to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_rows<R: Read>(input: R) -> Result<Vec<FeatureRow>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    check_header(rdr.headers()?, &FEATURE_HEADER)?;
    let h = &FEATURE_HEADER[..];
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let mut values = [0.0; FEATURE_DIM];
        for (j, v) in values.iter_mut().enumerate() {
            *v = field::<f64>(&rec, 4 + j, h, line)?;
            if !v.is_finite() || *v < 0.0 {
                return Err(CsvError::BadValue {
                    row: line,
                    column: FEATURE_HEADER[4 + j].to_string(),
                    value: rec[4 + j].to_string(),
                });
            }
        }
        let label = match &rec[13] {
            "" => None,
            _ => Some(field(&rec, 13, h, line)?),
        };
        rows.push(FeatureRow {
            participant_id: rec[0].to_string(),
            round: field(&rec, 1, h, line)?,
            task: field(&rec, 2, h, line)?,
            tick: field(&rec, 3, h, line)?,
            features: FeatureVector::from_array(values),
            label,
        });
    }
    Ok(rows)
}

pub fn write_features_csv(rows: &[FeatureRow], path: impl AsRef<Path>) -> Result<(), CsvError> {
    write_feature_rows(rows, File::create(path)?)
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>, CsvError> {
    read_feature_rows(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(task: Task, tick: u32, rr: &[f64]) -> SampleRecord {
        SampleRecord::new("P01", 1, task, tick, [4.0; BAND_COUNT]).with_rr(rr.iter().copied())
    }

    #[test]
    fn amplitude_of_constant_powers() {
        assert_eq!(amplitude_transform(&[100.0; 8]).unwrap(), [10.0; 8]);
        assert_eq!(amplitude_transform(&[0.0; 8]).unwrap(), [0.0; 8]);
    }

    #[test]
    fn amplitude_matches_independent_root() {
        let powers = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
        let amps = amplitude_transform(&powers).unwrap();
        for (a, p) in amps.iter().zip(powers) {
            // exp(ln(p)/2) takes a different route from sqrt
            let oracle = (p.ln() / 2.0).exp();
            assert!((a - oracle).abs() < 1e-12, "{a} vs {oracle}");
            assert!((a * a - p).abs() / p < 1e-9);
        }
    }

    #[test]
    fn negative_power_is_rejected() {
        let mut p = [1.0; 8];
        p[3] = -0.5;
        assert_eq!(
            amplitude_transform(&p),
            Err(FeatureError::NegativePower {
                band: Band::HighAlpha,
                value: -0.5
            })
        );
    }

    #[test]
    fn rmssd_examples() {
        assert_eq!(rmssd(&[800.0, 800.0, 800.0]).unwrap(), 0.0);
        let r = rmssd(&[800.0, 810.0, 790.0]).unwrap();
        assert!((r - 250f64.sqrt()).abs() < 1e-12);
        assert!((r - 15.8113883).abs() < 1e-6);
        assert_eq!(rmssd(&[800.0]), Err(FeatureError::InsufficientData(1)));
    }

    #[test]
    fn window_is_bounded_fifo() {
        let mut w = RmssdWindow::new(3);
        for v in [1.0, 2.0, 3.0, 4.0, 5.0] {
            w.push(v);
        }
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![3.0, 4.0, 5.0]);
        assert_eq!(w.len(), 3);
    }

    #[test]
    fn stream_hrv_warms_up_then_rolls() {
        let records = vec![
            rec(Task::Rest, 1, &[800.0]),
            rec(Task::Rest, 2, &[810.0]),
            rec(Task::Rest, 3, &[790.0]),
        ];
        let rows = featurize_stream(&records, 10).unwrap();
        let hrv: Vec<f64> = rows.iter().map(|r| r.features.hrv).collect();
        assert_eq!(hrv[0], 0.0);
        assert!((hrv[1] - 10.0).abs() < 1e-12);
        assert!((hrv[2] - 15.811388300841896).abs() < 1e-9);
        assert!(rows.iter().all(|r| r.features.amplitude == [2.0; 8]));
        assert!(rows.iter().all(|r| r.label == Some(LoadLabel::Baseline)));
    }

    #[test]
    fn hrv_is_carried_forward_over_empty_ticks() {
        let records = vec![
            rec(Task::OneBack, 1, &[800.0, 820.0]),
            rec(Task::OneBack, 2, &[]),
            rec(Task::OneBack, 3, &[]),
        ];
        let rows = featurize_stream(&records, 10).unwrap();
        assert!(rows.iter().all(|r| (r.features.hrv - 20.0).abs() < 1e-12));
    }

    #[test]
    fn window_restarts_per_participant() {
        let mut records = vec![rec(Task::Rest, 1, &[800.0, 900.0])];
        let mut other = rec(Task::Rest, 1, &[700.0]);
        other.participant_id = "P02".into();
        records.push(other);
        let rows = featurize_stream(&records, 10).unwrap();
        assert_eq!(rows[0].features.hrv, 100.0);
        assert_eq!(rows[1].features.hrv, 0.0);
    }

    #[test]
    fn empty_stream() {
        assert!(featurize_stream(&[], 10).unwrap().is_empty());
    }

    #[test]
    fn truncation_per_segment() {
        let seg: Vec<SampleRecord> = (1..=90).map(|t| rec(Task::Rest, t, &[])).collect();
        assert_eq!(truncate_head(&seg, 3).len(), 87);
        assert_eq!(truncate_head(&seg, 0), seg);

        let mut two: Vec<SampleRecord> = (1..=75).map(|t| rec(Task::OneBack, t, &[])).collect();
        two.extend((76..=170).map(|t| rec(Task::TwoBack, t, &[])));
        let out = truncate_head(&two, 2);
        // brute-force scan: count per task after truncation
        let ones = out.iter().filter(|r| r.task == Task::OneBack).count();
        let twos = out.iter().filter(|r| r.task == Task::TwoBack).count();
        assert_eq!((ones, twos), (73, 93));
        assert_eq!(out[0].tick, 3);
        assert_eq!(out[73].tick, 78);
    }

    #[test]
    fn feature_csv_round_trip() {
        let records: Vec<SampleRecord> =
            (1..=4).map(|t| rec(if t < 3 { Task::Rest } else { Task::ExamLow }, t, &[800.0 + t as f64])).collect();
        let rows = featurize_stream(&records, 10).unwrap();
        let mut buf = Vec::new();
        write_feature_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_feature_rows(&buf[..]).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn rmssd_translation_invariant(x in proptest::collection::vec(300.0f64..2000.0, 2..40), c in -250.0f64..250.0) {
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = rmssd(&x).unwrap();
            let b = rmssd(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn rmssd_scales_linearly(x in proptest::collection::vec(300.0f64..2000.0, 2..40), k in -5.0f64..5.0) {
            let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
            let a = rmssd(&x).unwrap();
            let b = rmssd(&scaled).unwrap();
            prop_assert!((b - k.abs() * a).abs() <= 1e-9 * (1.0 + b));
        }

        #[test]
        fn amplitude_is_monotone(p in proptest::array::uniform8(0.0f64..1e9), d in proptest::array::uniform8(0.0f64..1e6)) {
            let q: [f64; 8] = std::array::from_fn(|i| p[i] + d[i]);
            let a = amplitude_transform(&p).unwrap();
            let b = amplitude_transform(&q).unwrap();
            for i in 0..8 {
                prop_assert!(a[i] <= b[i]);
            }
        }

        #[test]
        fn stream_output_is_finite_and_aligned(
            ticks in proptest::collection::vec((proptest::array::uniform8(0.0f64..1e7), proptest::collection::vec(300.0f64..1500.0, 0..3)), 0..50)
        ) {
            let records: Vec<SampleRecord> = ticks.into_iter().enumerate()
                .map(|(i, (p, rr))| SampleRecord::new("P", 1, Task::Rest, i as u32 + 1, p).with_rr(rr))
                .collect();
            let rows = featurize_stream(&records, DEFAULT_RR_WINDOW).unwrap();
            prop_assert_eq!(rows.len(), records.len());
            for r in rows {
                prop_assert!(r.features.to_array().iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }
}

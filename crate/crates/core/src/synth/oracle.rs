//! Deliberately naive featurizer: every value is recomputed from the raw
//! records by direct scans, sharing no code with [`crate::features`].

use crate::domain::{LoadLabel, Task};
use crate::ingest::SampleRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub participant_id: String,
    pub round: u8,
    pub task: Task,
    pub tick: u32,
    pub features: [f64; 9],
    pub label: Option<LoadLabel>,
}

/// Square-root amplitudes and RMSSD of the last `window` intervals of the
/// participant up to each tick (0 until two intervals exist), with the
/// first `truncate` ticks of each task segment removed.
pub fn oracle_pipeline(records: &[SampleRecord], window: usize, truncate: usize) -> Vec<OracleRow> {
    let mut out = Vec::new();
    for i in 0..records.len() {
        let r = &records[i];

        let mut preceding_in_segment = 0;
        let mut j = i;
        while j > 0 {
            let p = &records[j - 1];
            if p.participant_id != r.participant_id || p.round != r.round || p.task != r.task {
                break;
            }
            preceding_in_segment += 1;
            j -= 1;
        }
        if preceding_in_segment < truncate {
            continue;
        }

        // newest first
        let mut recent: Vec<f64> = Vec::new();
        let mut j = i + 1;
        while j > 0 && recent.len() < window {
            let p = &records[j - 1];
            if p.participant_id != r.participant_id {
                break;
            }
            let mut k = p.rr_intervals.len();
            while k > 0 && recent.len() < window {
                recent.push(p.rr_intervals[k - 1]);
                k -= 1;
            }
            j -= 1;
        }
        let mut hrv = 0.0;
        if recent.len() >= 2 {
            let mut sum = 0.0;
            for k in 1..recent.len() {
                let d = recent[k - 1] - recent[k];
                sum += d * d;
            }
            hrv = (sum / (recent.len() - 1) as f64).sqrt();
        }

        let mut features = [0.0; 9];
        for b in 0..8 {
            features[b] = r.band_power[b].sqrt();
        }
        features[8] = hrv;
        let label = match r.task {
            Task::Rest => Some(LoadLabel::Baseline),
            Task::OneBack => Some(LoadLabel::Low),
            Task::TwoBack => Some(LoadLabel::High),
            _ => None,
        };
        out.push(OracleRow {
            participant_id: r.participant_id.clone(),
            round: r.round,
            task: r.task,
            tick: r.tick,
            features,
            label,
        });
    }
    out
}

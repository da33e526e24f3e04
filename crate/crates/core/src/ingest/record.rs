use serde::{Deserialize, Serialize};

use super::tlv::PayloadUpdate;
use crate::domain::{Task, BAND_COUNT};

/// Physiologically plausible R-R interval range, exclusive, in ms.
pub const RR_MIN_MS: f64 = 200.0;
pub const RR_MAX_MS: f64 = 3000.0;

/// Quality value the device reports for "no contact".
pub const QUALITY_WORST: u8 = 200;

pub fn rr_is_plausible(ms: f64) -> bool {
    ms > RR_MIN_MS && ms < RR_MAX_MS
}

/// One second of device output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub participant_id: String,
    pub round: u8,
    pub task: Task,
    /// Seconds since session start.
    pub tick: u32,
    /// 0 is best, 200 means no skin contact.
    pub quality: u8,
    /// Device power units, [`Band`](crate::Band) order.
    pub band_power: [f64; BAND_COUNT],
    /// Milliseconds, in arrival order.
    pub rr_intervals: Vec<f64>,
}

impl SampleRecord {
    pub fn new(
        participant_id: impl Into<String>,
        round: u8,
        task: Task,
        tick: u32,
        band_power: [f64; BAND_COUNT],
    ) -> Self {
        Self {
            participant_id: participant_id.into(),
            round,
            task,
            tick,
            quality: 0,
            band_power,
            rr_intervals: Vec::new(),
        }
    }

    pub fn with_rr(mut self, rr: impl IntoIterator<Item = f64>) -> Self {
        self.rr_intervals.extend(rr);
        self
    }

    /// `(participant, round, task)` identifies a contiguous task segment.
    pub fn segment_key(&self) -> (&str, u8, Task) {
        (&self.participant_id, self.round, self.task)
    }
}

/// Folds decoded frames into one [`SampleRecord`] per tick.
///
/// Quality and R-R fields accumulate until a band-power field arrives; the
/// device sends band powers once per second, so that field closes the tick.
#[derive(Debug, Clone)]
pub struct TickAssembler {
    participant_id: String,
    round: u8,
    task: Task,
    next_tick: u32,
    quality: u8,
    rr: Vec<f64>,
    dropped_rr: u64,
}

impl TickAssembler {
    pub fn new(participant_id: impl Into<String>, round: u8, task: Task) -> Self {
        Self {
            participant_id: participant_id.into(),
            round,
            task,
            next_tick: 1,
            quality: QUALITY_WORST,
            rr: Vec::new(),
            dropped_rr: 0,
        }
    }

    pub fn set_task(&mut self, task: Task) {
        self.task = task;
    }

    /// R-R values rejected as implausible so far.
    pub fn dropped_rr(&self) -> u64 {
        self.dropped_rr
    }

    pub fn apply(&mut self, update: &PayloadUpdate) -> Option<SampleRecord> {
        if let Some(q) = update.quality {
            self.quality = q;
        }
        for &ms in &update.rr_intervals {
            let ms = f64::from(ms);
            if rr_is_plausible(ms) {
                self.rr.push(ms);
            } else {
                self.dropped_rr += 1;
            }
        }
        let powers = update.band_power?;
        let record = SampleRecord {
            participant_id: self.participant_id.clone(),
            round: self.round,
            task: self.task,
            tick: self.next_tick,
            quality: self.quality,
            band_power: powers.map(f64::from),
            rr_intervals: std::mem::take(&mut self.rr),
        };
        self.next_tick += 1;
        Some(record)
    }
}

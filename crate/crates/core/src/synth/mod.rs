//! Synthetic cohorts with known class structure, and a naive reference
//! featurizer to check the real one against.

pub mod exam;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exam::{exam_prediction_series, generate_exam_session, ExamMix};
pub use oracle::{oracle_pipeline, OracleRow};

use crate::domain::{LoadLabel, Task, BAND_COUNT};
use crate::ingest::SampleRecord;
use crate::plan::SessionPlan;

/// Shortest and longest R-R interval the generator emits, ms.
const RR_CLAMP: (f64, f64) = (250.0, 2900.0);
/// Amplitude multiplier of an injected outlier tick.
pub const OUTLIER_AMPLITUDE_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("{0} must be positive")]
    NonPositiveMean(&'static str),
    #[error("{0} must be non-negative")]
    NegativeStd(&'static str),
    #[error("invalid profiles JSON: {0}")]
    Json(String),
}

/// Signal statistics of one load class.
///
/// Band powers are log-normal with the given mean and standard deviation
/// (device units). R-R intervals follow an AR(1) process around `rr_mean_ms`
/// with stationary deviation `rr_std_ms`; its lag-one coefficient is chosen
/// so the RMSSD of successive intervals is `rmssd_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub band_mean: [f64; BAND_COUNT],
    pub band_std: [f64; BAND_COUNT],
    pub rr_mean_ms: f64,
    pub rr_std_ms: f64,
    pub rmssd_ms: f64,
}

impl ClassProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.band_mean.iter().any(|&m| !(m > 0.0)) {
            return Err(ProfileError::NonPositiveMean("band_mean"));
        }
        if !(self.rr_mean_ms > 0.0) {
            return Err(ProfileError::NonPositiveMean("rr_mean_ms"));
        }
        if self.band_std.iter().any(|&s| !(s >= 0.0)) {
            return Err(ProfileError::NegativeStd("band_std"));
        }
        if !(self.rr_std_ms >= 0.0) {
            return Err(ProfileError::NegativeStd("rr_std_ms"));
        }
        if !(self.rmssd_ms >= 0.0) {
            return Err(ProfileError::NegativeStd("rmssd_ms"));
        }
        Ok(())
    }

    /// `(mu, sigma)` of the underlying normal for band `b`.
    fn log_params(&self, b: usize) -> (f64, f64) {
        let m = self.band_mean[b];
        let cv = self.band_std[b] / m;
        let var = (1.0 + cv * cv).ln();
        (m.ln() - var / 2.0, var.sqrt())
    }

    /// AR(1) coefficient giving `E[(x_k - x_{k-1})^2] = rmssd^2`.
    fn rr_rho(&self) -> f64 {
        if self.rr_std_ms == 0.0 {
            return 0.0;
        }
        (1.0 - self.rmssd_ms.powi(2) / (2.0 * self.rr_std_ms.powi(2))).clamp(-0.99, 0.99)
    }
}

/// One profile per load class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfiles {
    pub baseline: ClassProfile,
    pub low: ClassProfile,
    pub high: ClassProfile,
}

impl ClassProfiles {
    pub fn get(&self, label: LoadLabel) -> &ClassProfile {
        match label {
            LoadLabel::Baseline => &self.baseline,
            LoadLabel::Low => &self.low,
            LoadLabel::High => &self.high,
        }
    }

    /// Every class draws from the baseline profile.
    pub fn identical() -> Self {
        let p = Self::default().baseline;
        Self {
            baseline: p.clone(),
            low: p.clone(),
            high: p,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        for l in LoadLabel::ALL {
            self.get(l).validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let p: Self = serde_json::from_str(text).map_err(|e| ProfileError::Json(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }
}

impl Default for ClassProfiles {
    /// Delta, Theta, High Alpha, High Beta, Low Gamma and HRV differ by at
    /// least six standard deviations between neighbouring classes; Low Beta
    /// and Middle Gamma are identical across classes; Low Alpha differs
    /// slightly.
    fn default() -> Self {
        fn profile(means: [f64; BAND_COUNT], rr: f64, rr_std: f64, rmssd: f64) -> ClassProfile {
            let mut band_std = [0.0; BAND_COUNT];
            for (s, m) in band_std.iter_mut().zip(&means) {
                *s = 0.08 * m;
            }
            // the class-independent bands
            band_std[4] = 0.15 * means[4];
            band_std[7] = 0.15 * means[7];
            ClassProfile {
                band_mean: means,
                band_std,
                rr_mean_ms: rr,
                rr_std_ms: rr_std,
                rmssd_ms: rmssd,
            }
        }
        Self {
            baseline: profile(
                [300_000.0, 80_000.0, 30_000.0, 25_000.0, 15_000.0, 10_000.0, 5_000.0, 3_000.0],
                850.0,
                40.0,
                45.0,
            ),
            low: profile(
                [450_000.0, 120_000.0, 28_500.0, 18_000.0, 15_000.0, 14_000.0, 7_000.0, 3_000.0],
                780.0,
                35.0,
                35.0,
            ),
            high: profile(
                [675_000.0, 180_000.0, 27_000.0, 13_000.0, 15_000.0, 19_600.0, 9_800.0, 3_000.0],
                700.0,
                30.0,
                25.0,
            ),
        }
    }
}

/// Cohort generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohort {
    pub n_participants: usize,
    /// Standard deviation of each participant's log-scale offset, drawn once
    /// per participant and band (and for the mean R-R interval).
    pub offset_scale: f64,
    pub plan: SessionPlan,
    pub seed: u64,
    /// Probability that a tick is turned into an outlier: every band power
    /// scaled by [`OUTLIER_AMPLITUDE_FACTOR`] squared.
    #[serde(default)]
    pub inject_outliers: f64,
}

impl SyntheticCohort {
    pub fn new(n_participants: usize, seed: u64) -> Self {
        Self {
            n_participants,
            offset_scale: 0.05,
            plan: SessionPlan::default(),
            seed,
            inject_outliers: 0.0,
        }
    }
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

/// Per-participant signal state: individual offsets, the R-R process and
/// the beat clock.
pub(crate) struct Subject {
    pub rng: ChaCha8Rng,
    band_offset: [f64; BAND_COUNT],
    rr_offset: f64,
    rr_deviation: f64,
    /// Session time of the next beat, ms.
    next_beat_ms: f64,
    /// Interval ending at that beat.
    pending_interval: f64,
    outlier_p: f64,
}

impl Subject {
    pub fn new(seed: u64, index: usize, offset_scale: f64, outlier_p: f64, first: &ClassProfile) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut band_offset = [1.0; BAND_COUNT];
        for o in &mut band_offset {
            *o = (offset_scale * rng.sample::<f64, _>(StandardNormal)).exp();
        }
        let rr_offset = (offset_scale * rng.sample::<f64, _>(StandardNormal)).exp();
        let mut s = Self {
            rng,
            band_offset,
            rr_offset,
            rr_deviation: 0.0,
            next_beat_ms: 0.0,
            pending_interval: 0.0,
            outlier_p,
        };
        s.rr_deviation = first.rr_std_ms * s.rng.sample::<f64, _>(StandardNormal);
        let first_interval = s.draw_interval(first);
        // phase of the first beat within its interval
        s.next_beat_ms = first_interval * s.rng.random::<f64>();
        s.pending_interval = first_interval;
        s
    }

    fn draw_interval(&mut self, p: &ClassProfile) -> f64 {
        let rho = p.rr_rho();
        let innovation = p.rr_std_ms * (1.0 - rho * rho).sqrt();
        self.rr_deviation = rho * self.rr_deviation + innovation * self.rng.sample::<f64, _>(StandardNormal);
        (p.rr_mean_ms * self.rr_offset + self.rr_deviation).clamp(RR_CLAMP.0, RR_CLAMP.1)
    }

    /// Band powers and the beats that fall in the tick ending at `end_ms`.
    pub fn tick(&mut self, p: &ClassProfile, end_ms: f64) -> ([f64; BAND_COUNT], Vec<f64>) {
        let mut powers = [0.0; BAND_COUNT];
        for (b, out) in powers.iter_mut().enumerate() {
            let (mu, sigma) = p.log_params(b);
            let z: f64 = self.rng.sample(StandardNormal);
            *out = (mu + sigma * z).exp() * self.band_offset[b];
        }
        if self.outlier_p > 0.0 && self.rng.random::<f64>() < self.outlier_p {
            let f = OUTLIER_AMPLITUDE_FACTOR * OUTLIER_AMPLITUDE_FACTOR;
            powers.iter_mut().for_each(|x| *x *= f);
        }
        let mut beats = Vec::new();
        while self.next_beat_ms < end_ms {
            beats.push(self.pending_interval);
            let next = self.draw_interval(p);
            self.next_beat_ms += next;
            self.pending_interval = next;
        }
        (powers, beats)
    }
}

/// Deterministic 1 Hz record stream: each participant runs every round of
/// the plan in order, ticks numbered from 1 at session start.
pub struct CohortStream<'a> {
    cohort: &'a SyntheticCohort,
    profiles: &'a ClassProfiles,
    schedule: Vec<(u8, usize)>,
    participant: usize,
    position: usize,
    subject: Option<Subject>,
}

impl Iterator for CohortStream<'_> {
    type Item = SampleRecord;

    fn next(&mut self) -> Option<SampleRecord> {
        if self.participant >= self.cohort.n_participants || self.schedule.is_empty() {
            return None;
        }
        let (round, phase_idx) = self.schedule[self.position];
        let phase = &self.cohort.plan.phases[phase_idx];
        let profile = self.profiles.get(phase.label.unwrap_or(LoadLabel::Baseline));
        let subject = self.subject.get_or_insert_with(|| {
            Subject::new(
                self.cohort.seed,
                self.participant,
                self.cohort.offset_scale,
                self.cohort.inject_outliers,
                profile,
            )
        });
        let tick = self.position as u32 + 1;
        let (powers, beats) = subject.tick(profile, f64::from(tick) * 1000.0);
        let record = SampleRecord::new(participant_id(self.participant), round, phase.task, tick, powers).with_rr(beats);

        self.position += 1;
        if self.position == self.schedule.len() {
            self.position = 0;
            self.participant += 1;
            self.subject = None;
        }
        Some(record)
    }
}

pub fn cohort_stream<'a>(cohort: &'a SyntheticCohort, profiles: &'a ClassProfiles) -> CohortStream<'a> {
    CohortStream {
        cohort,
        profiles,
        schedule: cohort.plan.schedule().collect(),
        participant: 0,
        position: 0,
        subject: None,
    }
}

pub fn generate_cohort(cohort: &SyntheticCohort, profiles: &ClassProfiles) -> Vec<SampleRecord> {
    cohort_stream(cohort, profiles).collect()
}

/// Number of records with the given task.
pub fn count_task(records: &[SampleRecord], task: Task) -> usize {
    records.iter().filter(|r| r.task == task).count()
}

//! Exam-shaped sessions: a low-difficulty block followed by a
//! high-difficulty block, each a mixture of load classes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{participant_id, ClassProfiles, Subject};
use crate::domain::{Difficulty, LoadLabel, Task};
use crate::ingest::SampleRecord;
use crate::stats::ParticipantSeries;

/// Class proportions per difficulty block, indexed by [`LoadLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExamMix {
    pub low: [f64; 3],
    pub high: [f64; 3],
}

impl Default for ExamMix {
    /// Mostly Low load in the easy block and mostly High in the hard one
    /// (mean quantified load 1.07 and 1.71).
    fn default() -> Self {
        Self {
            low: [0.0722, 0.7857, 0.1421],
            high: [0.0993, 0.0914, 0.8093],
        }
    }
}

impl ExamMix {
    pub fn for_difficulty(&self, d: Difficulty) -> [f64; 3] {
        match d {
            Difficulty::Low => self.low,
            Difficulty::High => self.high,
        }
    }
}

fn draw_label(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> LoadLabel {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for l in LoadLabel::ALL {
        u -= weights[l.index()];
        if u < 0.0 {
            return l;
        }
    }
    LoadLabel::High
}

/// Exam session records plus the latent class that generated each tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamSession {
    pub records: Vec<SampleRecord>,
    pub latent: Vec<LoadLabel>,
}

/// Each participant sits a low block then a high block of
/// `seconds_per_block` ticks in round 1. Every tick's signal comes from the
/// profile of a class drawn from that block's mix.
pub fn generate_exam_session(
    n_participants: usize,
    seconds_per_block: u32,
    mix: &ExamMix,
    profiles: &ClassProfiles,
    offset_scale: f64,
    seed: u64,
) -> ExamSession {
    let mut records = Vec::new();
    let mut latent = Vec::new();
    for p in 0..n_participants {
        let mut picker = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e8a3);
        picker.set_stream(p as u64);
        let mut subject = Subject::new(seed, p, offset_scale, 0.0, profiles.get(LoadLabel::Low));
        let mut tick = 0u32;
        for (difficulty, task) in [(Difficulty::Low, Task::ExamLow), (Difficulty::High, Task::ExamHigh)] {
            let weights = mix.for_difficulty(difficulty);
            for _ in 0..seconds_per_block {
                tick += 1;
                let label = draw_label(&mut picker, &weights);
                let (powers, beats) = subject.tick(profiles.get(label), f64::from(tick) * 1000.0);
                records.push(SampleRecord::new(participant_id(p), 1, task, tick, powers).with_rr(beats));
                latent.push(label);
            }
        }
    }
    ExamSession { records, latent }
}

/// Predicted-label streams with exact class counts per difficulty block,
/// shuffled and dealt evenly across `n_participants`.
///
/// Panics if a block total is not a multiple of `n_participants`.
pub fn exam_prediction_series(
    low_counts: [usize; 3],
    high_counts: [usize; 3],
    n_participants: usize,
    seed: u64,
) -> Vec<ParticipantSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (difficulty, counts) in [(Difficulty::Low, low_counts), (Difficulty::High, high_counts)] {
        let total: usize = counts.iter().sum();
        assert!(
            n_participants > 0 && total % n_participants == 0,
            "block of {total} ticks does not split over {n_participants} participants"
        );
        let mut labels: Vec<LoadLabel> = LoadLabel::ALL
            .iter()
            .flat_map(|l| std::iter::repeat_n(*l, counts[l.index()]))
            .collect();
        labels.shuffle(&mut rng);
        let per = total / n_participants;
        for (p, chunk) in labels.chunks(per).enumerate() {
            out.push(ParticipantSeries {
                participant_id: participant_id(p),
                difficulty,
                labels: chunk.to_vec(),
            });
        }
    }
    out
}

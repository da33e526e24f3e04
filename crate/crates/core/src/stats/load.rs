//! Load-level summaries of predicted label streams.

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::domain::{Difficulty, LoadLabel};

/// Percentage of ticks at each load level within one difficulty group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRatios {
    pub difficulty: Difficulty,
    pub n: usize,
    /// Indexed by [`LoadLabel::index`].
    pub percent: [f64; 3],
}

impl FrequencyRatios {
    pub fn percent_of(&self, label: LoadLabel) -> f64 {
        self.percent[label.index()]
    }

    /// Mean quantified load (Baseline 0, Low 1, High 2) of the group.
    pub fn mean_load(&self) -> f64 {
        LoadLabel::ALL
            .iter()
            .map(|l| l.quantified() * self.percent[l.index()] / 100.0)
            .sum()
    }
}

/// Label percentages per difficulty, in [`Difficulty`] order; groups with no
/// ticks are omitted.
pub fn frequency_ratios(
    predicted: &[LoadLabel],
    difficulty: &[Difficulty],
) -> Result<Vec<FrequencyRatios>, StatsError> {
    if predicted.len() != difficulty.len() {
        return Err(StatsError::LengthMismatch(predicted.len(), difficulty.len()));
    }
    let mut out = Vec::new();
    for d in Difficulty::ALL {
        let mut counts = [0usize; 3];
        for (p, _) in predicted.iter().zip(difficulty).filter(|(_, x)| **x == d) {
            counts[p.index()] += 1;
        }
        let n: usize = counts.iter().sum();
        if n > 0 {
            out.push(FrequencyRatios {
                difficulty: d,
                n,
                percent: counts.map(|c| 100.0 * c as f64 / n as f64),
            });
        }
    }
    Ok(out)
}

/// Contingency table of difficulty (rows, [`Difficulty`] order) by predicted
/// label (columns, [`LoadLabel`] order).
pub fn contingency(predicted: &[LoadLabel], difficulty: &[Difficulty]) -> Result<Vec<[u64; 3]>, StatsError> {
    if predicted.len() != difficulty.len() {
        return Err(StatsError::LengthMismatch(predicted.len(), difficulty.len()));
    }
    let mut table = vec![[0u64; 3]; Difficulty::ALL.len()];
    for (p, d) in predicted.iter().zip(difficulty) {
        table[*d as usize][p.index()] += 1;
    }
    Ok(table)
}

/// Predicted labels of one participant under one difficulty, indexed by
/// tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSeries {
    pub participant_id: String,
    pub difficulty: Difficulty,
    pub labels: Vec<LoadLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTrend {
    pub difficulty: Difficulty,
    pub n_participants: usize,
    /// Mean quantified load across the participants present at each tick.
    pub per_tick_mean: Vec<f64>,
    /// Mean over every tick of every participant.
    pub grand_mean: f64,
}

/// Per-tick mean quantified load for each difficulty present.
pub fn load_trend(series: &[ParticipantSeries]) -> Result<Vec<DifficultyTrend>, StatsError> {
    if series.is_empty() {
        return Err(StatsError::NoParticipants);
    }
    let mut out = Vec::new();
    for d in Difficulty::ALL {
        let group: Vec<&ParticipantSeries> = series.iter().filter(|s| s.difficulty == d).collect();
        if group.is_empty() {
            continue;
        }
        let len = group.iter().map(|s| s.labels.len()).max().unwrap_or(0);
        let mut sums = vec![0.0; len];
        let mut counts = vec![0usize; len];
        let mut total = 0.0;
        let mut n_ticks = 0usize;
        for s in &group {
            for (t, l) in s.labels.iter().enumerate() {
                sums[t] += l.quantified();
                counts[t] += 1;
                total += l.quantified();
                n_ticks += 1;
            }
        }
        out.push(DifficultyTrend {
            difficulty: d,
            n_participants: group.len(),
            per_tick_mean: sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect(),
            grand_mean: if n_ticks == 0 { 0.0 } else { total / n_ticks as f64 },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use LoadLabel::*;

    #[test]
    fn ratio_examples() {
        let r = frequency_ratios(&[High; 4], &[Difficulty::High; 4]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].percent, [0.0, 0.0, 100.0]);

        let r = frequency_ratios(&[Low, High, High, High], &[Difficulty::Low; 4]).unwrap();
        assert_eq!(r[0].percent_of(Low), 25.0);
        assert_eq!(r[0].percent_of(High), 75.0);
        assert!((r[0].mean_load() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn ratio_length_mismatch() {
        assert_eq!(
            frequency_ratios(&[Low], &[]),
            Err(StatsError::LengthMismatch(1, 0))
        );
    }

    #[test]
    fn contingency_counts() {
        let t = contingency(&[Low, High, Low, Baseline], &[Difficulty::Low, Difficulty::High, Difficulty::Low, Difficulty::High]).unwrap();
        assert_eq!(t, vec![[0, 2, 0], [1, 0, 1]]);
    }

    fn series(d: Difficulty, labels: Vec<LoadLabel>) -> ParticipantSeries {
        ParticipantSeries {
            participant_id: "P".into(),
            difficulty: d,
            labels,
        }
    }

    #[test]
    fn trend_examples() {
        let t = load_trend(&[series(Difficulty::Low, vec![Low]), series(Difficulty::Low, vec![High])]).unwrap();
        assert_eq!(t[0].per_tick_mean, vec![1.5]);

        let t = load_trend(&[series(Difficulty::High, vec![Baseline; 5])]).unwrap();
        assert!(t[0].per_tick_mean.iter().all(|&m| m == 0.0));
        assert_eq!(t[0].grand_mean, 0.0);

        assert_eq!(load_trend(&[]), Err(StatsError::NoParticipants));
    }

    #[test]
    fn mixture_grand_mean_by_counting() {
        let labels: Vec<LoadLabel> = (0..1000).map(|i| if i % 10 < 3 { High } else { Low }).collect();
        let t = load_trend(&[series(Difficulty::Low, labels)]).unwrap();
        assert!((t[0].grand_mean - 1.3).abs() < 1e-9);
    }
}

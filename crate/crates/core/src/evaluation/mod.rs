//! Holdout splitting, leave-one-group-out cross-validation and metrics.

pub mod metrics;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{score, Averages, ClassMetrics, MetricsReport};

use crate::domain::LoadLabel;
use crate::forest::{self, ForestConfig, ForestError};

pub const TEST_FRACTION: f64 = 0.2;
pub const MIN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{0} truth labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("class {label} has {size} samples, at least {MIN_CLASS_SIZE} required")]
    ClassTooSmall { label: LoadLabel, size: usize },
    #[error("leave-one-group-out needs at least 2 groups")]
    SingleGroup,
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Index sets of a holdout split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified 80/20 split. The total test size is `round(0.2 * n)`, shared
/// out across classes by largest remainder so every class's test share is
/// within one sample of 20%.
pub fn split_80_20(labels: &[LoadLabel], seed: u64) -> Result<Split, EvalError> {
    stratified_split(labels, TEST_FRACTION, seed)
}

pub fn stratified_split(labels: &[LoadLabel], test_fraction: f64, seed: u64) -> Result<Split, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_class: BTreeMap<LoadLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    for (label, idx) in &by_class {
        if idx.len() < MIN_CLASS_SIZE {
            return Err(EvalError::ClassTooSmall {
                label: *label,
                size: idx.len(),
            });
        }
    }

    let target_total = (test_fraction * labels.len() as f64).round() as usize;
    let quotas: Vec<f64> = by_class.values().map(|idx| test_fraction * idx.len() as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // largest fractional part first; stable on class order
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    let assigned: usize = counts.iter().sum();
    for &c in order.iter().take(target_total.saturating_sub(assigned)) {
        counts[c] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, n_test) in by_class.values().zip(counts) {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        test.extend_from_slice(&shuffled[..n_test]);
        train.extend_from_slice(&shuffled[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out_group: String,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    /// Ordered by group id.
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
}

/// Leave-one-group-out cross-validation: one fold per distinct group,
/// training on every other group.
pub fn logo_cv<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[LoadLabel],
    groups: &[String],
    config: &ForestConfig,
) -> Result<CvSummary, EvalError> {
    if rows.len() != labels.len() {
        return Err(EvalError::LengthMismatch(rows.len(), labels.len()));
    }
    if rows.len() != groups.len() {
        return Err(EvalError::LengthMismatch(rows.len(), groups.len()));
    }
    let mut distinct: Vec<&str> = groups.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(EvalError::SingleGroup);
    }

    let folds: Vec<FoldResult> = distinct
        .par_iter()
        .map(|&g| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| groups[i] == g);
            let x_train: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_ref()).collect();
            let y_train: Vec<LoadLabel> = train.iter().map(|&i| labels[i]).collect();
            let model = forest::fit(&x_train, &y_train, config)?;
            let truth: Vec<LoadLabel> = test.iter().map(|&i| labels[i]).collect();
            let pred = test
                .iter()
                .map(|&i| model.predict(rows[i].as_ref()))
                .collect::<Result<Vec<_>, _>>()?;
            let report = score(&truth, &pred)?;
            Ok(FoldResult {
                held_out_group: g.to_string(),
                n_train: train.len(),
                n_test: test.len(),
                accuracy: report.accuracy,
                report,
            })
        })
        .collect::<Result<_, EvalError>>()?;

    let n = folds.len() as f64;
    let mean = folds.iter().map(|f| f.accuracy).sum::<f64>() / n;
    let var = folds.iter().map(|f| (f.accuracy - mean).powi(2)).sum::<f64>() / n;
    Ok(CvSummary {
        folds,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutResult {
    pub split: Split,
    pub report: MetricsReport,
}

/// Train on the stratified 80% and score on the held-out 20%.
pub fn holdout<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[LoadLabel],
    seed: u64,
    config: &ForestConfig,
) -> Result<HoldoutResult, EvalError> {
    if rows.len() != labels.len() {
        return Err(EvalError::LengthMismatch(rows.len(), labels.len()));
    }
    let split = split_80_20(labels, seed)?;
    let x: Vec<&[f64]> = split.train.iter().map(|&i| rows[i].as_ref()).collect();
    let y: Vec<LoadLabel> = split.train.iter().map(|&i| labels[i]).collect();
    let model = forest::fit(&x, &y, config)?;
    let truth: Vec<LoadLabel> = split.test.iter().map(|&i| labels[i]).collect();
    let pred = split
        .test
        .iter()
        .map(|&i| model.predict(rows[i].as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = score(&truth, &pred)?;
    Ok(HoldoutResult { split, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn balanced(n: usize) -> Vec<LoadLabel> {
        (0..n).map(|i| LoadLabel::ALL[i % 3]).collect()
    }

    #[test]
    fn split_sizes_by_counting() {
        let labels = balanced(1000);
        let s = split_80_20(&labels, 24).unwrap();
        assert_eq!(s.test.len(), 200);
        assert_eq!(s.train.len(), 800);
        for l in LoadLabel::ALL {
            let n_class = labels.iter().filter(|x| **x == l).count();
            let n_test = s.test.iter().filter(|&&i| labels[i] == l).count();
            assert!((n_test as f64 - 0.2 * n_class as f64).abs() <= 1.0);
            assert!(n_test == 66 || n_test == 67);
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let labels = balanced(300);
        assert_eq!(split_80_20(&labels, 7).unwrap(), split_80_20(&labels, 7).unwrap());
        assert_ne!(split_80_20(&labels, 7).unwrap(), split_80_20(&labels, 8).unwrap());
    }

    #[test]
    fn tiny_class_is_rejected() {
        let mut labels = vec![LoadLabel::Low; 50];
        labels.extend([LoadLabel::High; 3]);
        assert_eq!(
            split_80_20(&labels, 1),
            Err(EvalError::ClassTooSmall {
                label: LoadLabel::High,
                size: 3
            })
        );
    }

    fn grouped_clusters(n_groups: usize, per_class: usize, seed: u64) -> (Vec<[f64; 3]>, Vec<LoadLabel>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for group in 0..n_groups {
            let offset: f64 = rng.sample::<f64, _>(StandardNormal) * 0.3;
            for label in LoadLabel::ALL {
                for _ in 0..per_class {
                    let c = label.index() as f64 * 4.0 + offset;
                    x.push([
                        c + rng.sample::<f64, _>(StandardNormal) * 0.5,
                        c + rng.sample::<f64, _>(StandardNormal) * 0.5,
                        rng.sample(StandardNormal),
                    ]);
                    y.push(label);
                    g.push(format!("G{group:02}"));
                }
            }
        }
        (x, y, g)
    }

    #[test]
    fn one_fold_per_group_with_disjoint_tests() {
        let (x, y, g) = grouped_clusters(10, 8, 1);
        let cv = logo_cv(&x, &y, &g, &ForestConfig::default().with_trees(25)).unwrap();
        assert_eq!(cv.folds.len(), 10);
        let total: usize = cv.folds.iter().map(|f| f.n_test).sum();
        assert_eq!(total, x.len());
        for f in &cv.folds {
            assert_eq!(f.n_test, 24);
            assert_eq!(f.n_train, x.len() - 24);
            assert!((0.0..=1.0).contains(&f.accuracy));
        }
        assert!(cv.mean_accuracy >= 0.95, "mean {}", cv.mean_accuracy);
        let ids: Vec<&str> = cv.folds.iter().map(|f| f.held_out_group.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn single_group_is_rejected() {
        let (x, y, _) = grouped_clusters(1, 5, 2);
        let g = vec!["only".to_string(); x.len()];
        assert_eq!(logo_cv(&x, &y, &g, &ForestConfig::default()), Err(EvalError::SingleGroup));
    }

    #[test]
    fn holdout_on_separable_data() {
        let (x, y, _) = grouped_clusters(5, 20, 3);
        let h = holdout(&x, &y, 24, &ForestConfig::default().with_trees(30)).unwrap();
        assert_eq!(h.split.test.len(), 60);
        assert!(h.report.accuracy > 0.95);
    }
}

//! k-nearest-neighbour distance filter for "dirty" training vectors.
//!
//! Within each scope group (by default each label class) the features are
//! standardized per dimension, every point gets the mean Euclidean distance
//! to its `k` nearest neighbours, and points whose statistic exceeds
//! `mean + c * std` of that statistic are removed. Neighbour search is exact
//! brute force.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{LoadLabel, FEATURE_DIM};
use crate::features::FeatureRow;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_C: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CleaningError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("group `{group}` has {size} members, needs more than k = {k}")]
    ClassTooSmall { group: String, size: usize, k: usize },
    #[error("{0} points but {1} group keys")]
    LengthMismatch(usize, usize),
    #[error("invalid parameters: k = {k}, c = {c}")]
    InvalidParameters { k: usize, c: f64 },
}

/// How points are grouped before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterScope {
    #[default]
    Class,
    Participant,
    Global,
}

impl std::str::FromStr for FilterScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "class" => Ok(FilterScope::Class),
            "participant" => Ok(FilterScope::Participant),
            "global" => Ok(FilterScope::Global),
            _ => Err(format!("unknown scope `{s}` (class|participant|global)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupThreshold {
    pub group: String,
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
    /// Per input point, mean distance to its k nearest neighbours in
    /// standardized units of its group.
    pub knn_mean_distance: Vec<f64>,
    /// Per input point, the threshold of its group.
    pub threshold: Vec<f64>,
    pub groups: Vec<GroupThreshold>,
    pub k: usize,
    pub c: f64,
}

impl OutlierReport {
    pub fn removal_fraction(&self) -> f64 {
        let n = self.kept_indices.len() + self.removed_indices.len();
        if n == 0 {
            0.0
        } else {
            self.removed_indices.len() as f64 / n as f64
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, CleaningError> {
    if a.len() != b.len() {
        return Err(CleaningError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(squared_distance(a, b).sqrt())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Filter per label class.
pub fn knn_filter(
    vectors: &[[f64; FEATURE_DIM]],
    labels: &[LoadLabel],
    k: usize,
    c: f64,
) -> Result<OutlierReport, CleaningError> {
    let keys: Vec<String> = labels.iter().map(|l| l.as_str().to_string()).collect();
    knn_filter_grouped(vectors, &keys, k, c)
}

/// Filter feature rows with the given scope. Unlabeled rows form their own
/// class under [`FilterScope::Class`].
pub fn filter_rows(
    rows: &[FeatureRow],
    scope: FilterScope,
    k: usize,
    c: f64,
) -> Result<OutlierReport, CleaningError> {
    let points: Vec<[f64; FEATURE_DIM]> = rows.iter().map(|r| r.features.to_array()).collect();
    let keys: Vec<String> = rows
        .iter()
        .map(|r| match scope {
            FilterScope::Class => r.label.map(|l| l.as_str()).unwrap_or("Unlabeled").to_string(),
            FilterScope::Participant => r.participant_id.clone(),
            FilterScope::Global => String::new(),
        })
        .collect();
    knn_filter_grouped(&points, &keys, k, c)
}

/// Filter independently within each distinct group key.
pub fn knn_filter_grouped<P: AsRef<[f64]> + Sync>(
    points: &[P],
    keys: &[String],
    k: usize,
    c: f64,
) -> Result<OutlierReport, CleaningError> {
    if points.len() != keys.len() {
        return Err(CleaningError::LengthMismatch(points.len(), keys.len()));
    }
    if k == 0 || !(c > 0.0) {
        return Err(CleaningError::InvalidParameters { k, c });
    }
    if let Some(first) = points.first() {
        let d = first.as_ref().len();
        if let Some(bad) = points.iter().find(|p| p.as_ref().len() != d) {
            return Err(CleaningError::DimensionMismatch(d, bad.as_ref().len()));
        }
    }

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        members.entry(key.as_str()).or_default().push(i);
    }
    for (group, idx) in &members {
        if idx.len() <= k {
            return Err(CleaningError::ClassTooSmall {
                group: group.to_string(),
                size: idx.len(),
                k,
            });
        }
    }

    let per_group: Vec<(GroupThreshold, Vec<f64>)> = members
        .par_iter()
        .map(|(group, idx)| {
            let stats = group_knn_distances(points, idx, k);
            let n = stats.len() as f64;
            let mean = stats.iter().sum::<f64>() / n;
            let std = (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
            let gt = GroupThreshold {
                group: group.to_string(),
                size: idx.len(),
                mean,
                std,
                threshold: mean + c * std,
            };
            (gt, stats)
        })
        .collect();

    let n = points.len();
    let mut knn_mean_distance = vec![0.0; n];
    let mut threshold = vec![0.0; n];
    let mut groups = Vec::with_capacity(per_group.len());
    for ((_, idx), (gt, stats)) in members.iter().zip(per_group) {
        for (&i, s) in idx.iter().zip(stats) {
            knn_mean_distance[i] = s;
            threshold[i] = gt.threshold;
        }
        groups.push(gt);
    }
    let (removed_indices, kept_indices): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| knn_mean_distance[i] > threshold[i]);
    Ok(OutlierReport {
        kept_indices,
        removed_indices,
        knn_mean_distance,
        threshold,
        groups,
        k,
        c,
    })
}

/// Mean distance to the k nearest neighbours for each member, after
/// z-scoring the members' dimensions (population std; zero-variance
/// dimensions are only centred).
fn group_knn_distances<P: AsRef<[f64]>>(points: &[P], idx: &[usize], k: usize) -> Vec<f64> {
    let d = points[idx[0]].as_ref().len();
    let m = idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in idx {
        for (acc, v) in mean.iter_mut().zip(points[i].as_ref()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut scale = vec![0.0; d];
    for &i in idx {
        for ((acc, v), mu) in scale.iter_mut().zip(points[i].as_ref()).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    for s in scale.iter_mut() {
        let sd = (*s / m).sqrt();
        *s = if sd > 0.0 { sd } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            points[i]
                .as_ref()
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, mu), sd)| (v - mu) / sd)
                .collect()
        })
        .collect();

    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(z.len());
    (0..z.len())
        .map(|a| {
            dists.clear();
            dists.extend(
                (0..z.len())
                    .filter(|&b| b != a)
                    .map(|b| (squared_distance(&z[a], &z[b]), b)),
            );
            // ties broken by lower index
            dists.select_nth_unstable_by(k - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            dists[..k].iter().map(|(sq, _)| sq.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_cloud(n: usize, seed: u64) -> Vec<[f64; FEATURE_DIM]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    #[test]
    fn euclidean_examples() {
        let a = [1.0; FEATURE_DIM];
        assert_eq!(euclidean(&a, &a).unwrap(), 0.0);
        let mut b = a;
        b[0] += 3.0;
        b[1] += 4.0;
        assert_eq!(euclidean(&a, &b).unwrap(), 5.0);
        assert_eq!(euclidean(&a, &b[..3]), Err(CleaningError::DimensionMismatch(9, 3)));
    }

    #[test]
    fn euclidean_matches_coordinate_loop() {
        let pts = gaussian_cloud(50, 3);
        for w in pts.windows(2) {
            let mut acc = 0.0;
            for i in 0..FEATURE_DIM {
                let d = w[0][i] - w[1][i];
                acc += d * d;
            }
            assert!((euclidean(&w[0], &w[1]).unwrap() - acc.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn displaced_point_is_the_only_removal() {
        let mut pts: Vec<[f64; FEATURE_DIM]> =
            gaussian_cloud(50, 11).into_iter().map(|p| p.map(|v| v * 0.1)).collect();
        let mut far = [0.0; FEATURE_DIM];
        far[0] = 1.0; // 10 cluster widths
        pts.push(far);
        let labels = vec![LoadLabel::Low; pts.len()];
        let report = knn_filter(&pts, &labels, 5, 2.0).unwrap();
        assert_eq!(report.removed_indices, vec![50]);

        // direct check: the displaced point's nearest neighbours are all far
        let mut d: Vec<f64> = pts[..50].iter().map(|p| euclidean(p, &far).unwrap()).collect();
        d.sort_by(f64::total_cmp);
        assert!(d[0] > 0.5);
    }

    #[test]
    fn identical_points_are_all_kept() {
        let pts = vec![[2.0; FEATURE_DIM]; 20];
        let labels = vec![LoadLabel::High; 20];
        let report = knn_filter(&pts, &labels, 5, 2.0).unwrap();
        assert!(report.removed_indices.is_empty());
        assert_eq!(report.groups[0].std, 0.0);
    }

    #[test]
    fn small_class_is_rejected() {
        let pts = gaussian_cloud(10, 1);
        let mut labels = vec![LoadLabel::Low; 10];
        labels[..5].fill(LoadLabel::High);
        assert!(matches!(
            knn_filter(&pts, &labels, 5, 2.0),
            Err(CleaningError::ClassTooSmall { size: 5, k: 5, .. })
        ));
    }

    #[test]
    fn report_partitions_input() {
        let pts = gaussian_cloud(300, 5);
        let labels: Vec<LoadLabel> = (0..300).map(|i| LoadLabel::ALL[i % 3]).collect();
        let r = knn_filter(&pts, &labels, 5, 2.0).unwrap();
        let mut all: Vec<usize> = r.kept_indices.iter().chain(&r.removed_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        for &i in &r.removed_indices {
            assert!(r.knn_mean_distance[i] > r.threshold[i]);
        }
        assert_eq!(r.groups.len(), 3);
    }

    #[test]
    fn permutation_equivariant() {
        let pts = gaussian_cloud(120, 8);
        let labels: Vec<LoadLabel> = (0..120).map(|i| LoadLabel::ALL[i % 2]).collect();
        let base = knn_filter(&pts, &labels, 5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut perm: Vec<usize> = (0..120).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let p_pts: Vec<_> = perm.iter().map(|&i| pts[i]).collect();
        let p_labels: Vec<_> = perm.iter().map(|&i| labels[i]).collect();
        let permuted = knn_filter(&p_pts, &p_labels, 5, 2.0).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert!((permuted.knn_mean_distance[new] - base.knn_mean_distance[old]).abs() < 1e-9);
            assert_eq!(
                permuted.removed_indices.contains(&new),
                base.removed_indices.contains(&old)
            );
        }
    }

    #[test]
    fn removal_fraction_on_clean_gaussian_is_small() {
        let mut fractions: Vec<f64> = (0..9)
            .map(|seed| {
                let pts = gaussian_cloud(1000, 100 + seed);
                let labels = vec![LoadLabel::Baseline; 1000];
                knn_filter(&pts, &labels, 5, 2.0).unwrap().removal_fraction()
            })
            .collect();
        fractions.sort_by(f64::total_cmp);
        assert!(fractions[4] <= 0.10, "median removal {}", fractions[4]);
    }

    #[test]
    fn second_pass_shrinks() {
        // the threshold is relative to the remaining points, so a second pass
        // still trims the new upper tail, just less of it
        for seed in 0..5 {
            let pts = gaussian_cloud(1000, 200 + seed);
            let labels = vec![LoadLabel::Low; 1000];
            let first = knn_filter(&pts, &labels, 5, 2.0).unwrap();
            let kept: Vec<[f64; FEATURE_DIM]> = first.kept_indices.iter().map(|&i| pts[i]).collect();
            let second = knn_filter(&kept, &labels[..kept.len()], 5, 2.0).unwrap();
            assert!(second.removed_indices.len() < first.removed_indices.len());
            assert!(second.removal_fraction() < 0.05);
        }
    }
}

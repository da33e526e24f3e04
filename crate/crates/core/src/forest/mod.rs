//! Seed-deterministic random forest of bagged CART trees.
//!
//! Tree `t` draws its bootstrap sample and its per-node feature subsets from
//! a ChaCha8 stream keyed by `(random_state, t)`, so a model depends only on
//! the data and the config, never on thread scheduling.

pub mod config;
pub mod io;
pub mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{ConfigError, ForestConfig, MaxFeatures, VoteMode};
pub use io::{load, save, ModelIoError};
pub use tree::{gini, DecisionTree, Node};

use crate::domain::LoadLabel;
use crate::features::FeatureVector;
use tree::{build_tree, Columns, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("no training samples")]
    EmptyInput,
    #[error("{0} samples but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) config: ForestConfig,
    pub(crate) n_features: usize,
    /// Classes present in training, ascending.
    pub(crate) classes: Vec<LoadLabel>,
    /// SHA-256 over the training matrix and labels.
    pub(crate) fingerprint: [u8; 32],
    pub(crate) trees: Vec<DecisionTree>,
    /// Set when training saw a single class; the forest is one leaf.
    pub(crate) degenerate: bool,
    pub(crate) oob_accuracy: Option<f64>,
}

impl ForestModel {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn classes(&self) -> &[LoadLabel] {
        &self.classes
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Out-of-bag accuracy, available when trained with bootstrap.
    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }

    /// Class probabilities aligned with [`classes`](Self::classes).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ForestError> {
        self.check_dim(x)?;
        let mut acc = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            accumulate_vote(&mut acc, tree.leaf_counts(x), self.config.vote);
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|p| *p /= n);
        Ok(acc)
    }

    /// Argmax of [`predict_proba`](Self::predict_proba); ties go to the
    /// lower class.
    pub fn predict(&self, x: &[f64]) -> Result<LoadLabel, ForestError> {
        let proba = self.predict_proba(x)?;
        Ok(self.classes[argmax(&proba)])
    }

    /// Probabilities indexed by [`LoadLabel::index`], zero for classes
    /// absent from training.
    pub fn proba_by_label(&self, x: &[f64]) -> Result<[f64; 3], ForestError> {
        let proba = self.predict_proba(x)?;
        let mut out = [0.0; 3];
        for (c, p) in self.classes.iter().zip(proba) {
            out[c.index()] = p;
        }
        Ok(out)
    }

    pub fn predict_features(&self, v: &FeatureVector) -> Result<LoadLabel, ForestError> {
        self.predict(&v.to_array())
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }
}

fn accumulate_vote(acc: &mut [f64], counts: &[u32], vote: VoteMode) {
    match vote {
        VoteMode::Soft => {
            let total: u32 = counts.iter().sum();
            if total > 0 {
                for (a, &c) in acc.iter_mut().zip(counts) {
                    *a += c as f64 / total as f64;
                }
            }
        }
        VoteMode::Hard => {
            let best = (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
            acc[best] += 1.0;
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b })
}

/// Hash of the training set stored in the model for provenance.
pub fn fingerprint<R: AsRef<[f64]>>(rows: &[R], labels: &[LoadLabel]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((rows.len() as u64).to_le_bytes());
    for r in rows {
        for v in r.as_ref() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    for l in labels {
        h.update([l.index() as u8]);
    }
    h.finalize().into()
}

pub fn fit_features(
    features: &[FeatureVector],
    labels: &[LoadLabel],
    config: &ForestConfig,
) -> Result<ForestModel, ForestError> {
    let rows: Vec<[f64; crate::FEATURE_DIM]> = features.iter().map(|f| f.to_array()).collect();
    fit(&rows, labels, config)
}

pub fn fit<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[LoadLabel],
    config: &ForestConfig,
) -> Result<ForestModel, ForestError> {
    config.validate()?;
    if rows.is_empty() {
        return Err(ForestError::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(ForestError::LengthMismatch(rows.len(), labels.len()));
    }
    let n_features = rows[0].as_ref().len();
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != n_features {
            return Err(ForestError::DimensionMismatch {
                expected: n_features,
                found: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite(i));
        }
    }

    let mut classes: Vec<LoadLabel> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let fp = fingerprint(rows, labels);

    if classes.len() == 1 {
        let mut counts = vec![0u32; 1];
        counts[0] = labels.len() as u32;
        return Ok(ForestModel {
            config: config.clone(),
            n_features,
            classes,
            fingerprint: fp,
            trees: vec![DecisionTree::single_leaf(counts)],
            degenerate: true,
            oob_accuracy: None,
        });
    }

    let class_idx: Vec<u8> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in class list") as u8)
        .collect();
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| rows.iter().map(|r| r.as_ref()[f]).collect())
        .collect();
    let data = Columns {
        columns: &columns,
        labels: &class_idx,
    };
    let params = TreeParams {
        n_classes: classes.len(),
        max_features: config.max_features.resolve(n_features),
        min_samples_leaf: config.min_samples_leaf as u32,
        min_samples_split: config.min_samples_split as u32,
    };
    let n = rows.len();

    let grown: Vec<(DecisionTree, Vec<u32>)> = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(config.random_state, t as u64);
            let weights = if config.bootstrap {
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            let (tree, _) = build_tree(&data, &weights, &params, &mut rng);
            (tree, weights)
        })
        .collect();

    let oob_accuracy = config
        .bootstrap
        .then(|| oob_accuracy(&grown, rows, &class_idx, classes.len(), config.vote))
        .flatten();
    let trees = grown.into_iter().map(|(t, _)| t).collect();
    Ok(ForestModel {
        config: config.clone(),
        n_features,
        classes,
        fingerprint: fp,
        trees,
        degenerate: false,
        oob_accuracy,
    })
}

/// Per-tree RNG stream: seed from `random_state`, stream id = tree index.
fn tree_rng(random_state: u64, tree: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(random_state);
    rng.set_stream(tree);
    rng
}

fn oob_accuracy<R: AsRef<[f64]>>(
    grown: &[(DecisionTree, Vec<u32>)],
    rows: &[R],
    labels: &[u8],
    n_classes: usize,
    vote: VoteMode,
) -> Option<f64> {
    let mut correct = 0usize;
    let mut scored = 0usize;
    let mut acc = vec![0.0; n_classes];
    for (i, row) in rows.iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut any = false;
        for (tree, weights) in grown {
            if weights[i] == 0 {
                accumulate_vote(&mut acc, tree.leaf_counts(row.as_ref()), vote);
                any = true;
            }
        }
        if any {
            scored += 1;
            if argmax(&acc) == labels[i] as usize {
                correct += 1;
            }
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn clouds(n_per: usize, sep: f64, seed: u64) -> (Vec<[f64; 2]>, Vec<LoadLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, label) in [LoadLabel::Baseline, LoadLabel::High].into_iter().enumerate() {
            for _ in 0..n_per {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                x.push([a + sep * k as f64, b]);
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_clouds_fit_perfectly() {
        let (x, y) = clouds(100, 10.0, 1);
        let model = fit(&x, &y, &ForestConfig::default().with_trees(50)).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, l)| model.predict(&r[..]).unwrap() == **l).count();
        assert_eq!(acc, 200);
        let p = model.predict_proba(&[10.0, 0.0]).unwrap();
        assert!(p[1] > 0.9);
        assert_eq!(model.proba_by_label(&[0.0, 0.0]).unwrap()[LoadLabel::Baseline.index()], 1.0);
    }

    #[test]
    fn single_class_gives_trivial_forest() {
        let x = vec![[1.0, 2.0], [3.0, 4.0]];
        let y = vec![LoadLabel::Low; 2];
        let model = fit(&x, &y, &ForestConfig::default()).unwrap();
        assert!(model.is_degenerate());
        assert_eq!(model.predict(&[100.0, -5.0]).unwrap(), LoadLabel::Low);
        assert_eq!(model.predict_proba(&[0.0, 0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn input_errors() {
        let cfg = ForestConfig::default();
        let empty: Vec<[f64; 2]> = vec![];
        assert_eq!(fit(&empty, &[], &cfg), Err(ForestError::EmptyInput));
        assert_eq!(
            fit(&[[1.0, 2.0]], &[LoadLabel::Low, LoadLabel::High], &cfg),
            Err(ForestError::LengthMismatch(1, 2))
        );
        assert_eq!(
            fit(&[[f64::NAN, 0.0]], &[LoadLabel::Low], &cfg),
            Err(ForestError::NonFinite(0))
        );
        let (x, y) = clouds(10, 5.0, 2);
        let m = fit(&x, &y, &cfg.with_trees(3)).unwrap();
        assert!(matches!(m.predict(&[1.0]), Err(ForestError::DimensionMismatch { .. })));
    }

    #[test]
    fn proba_sums_to_one_and_predict_is_argmax() {
        let (x, y) = clouds(60, 1.0, 3);
        for vote in [VoteMode::Soft, VoteMode::Hard] {
            let cfg = ForestConfig {
                vote,
                ..ForestConfig::default().with_trees(40)
            };
            let model = fit(&x, &y, &cfg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..200 {
                let q = [rng.random_range(-3.0..4.0), rng.random_range(-3.0..3.0)];
                let p = model.predict_proba(&q).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert_eq!(model.predict(&q).unwrap(), model.classes()[argmax(&p)]);
            }
        }
    }

    #[test]
    fn candidates_never_exceed_sqrt_of_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cols: Vec<Vec<f64>> = (0..9).map(|_| (0..300).map(|_| rng.random()).collect()).collect();
        let labels: Vec<u8> = (0..300).map(|i| (i % 3) as u8).collect();
        let params = TreeParams {
            n_classes: 3,
            max_features: MaxFeatures::Sqrt.resolve(9),
            min_samples_leaf: 1,
            min_samples_split: 2,
        };
        let data = Columns { columns: &cols, labels: &labels };
        let (_, stats) = build_tree(&data, &vec![1; 300], &params, &mut rng);
        assert_eq!(stats.max_candidates, 3);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (x, y) = clouds(80, 1.5, 4);
        let cfg = ForestConfig::default().with_trees(20);
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit(&x, &y, &cfg.clone().with_seed(25)).unwrap();
        assert_ne!(a.trees, c.trees);
    }
}

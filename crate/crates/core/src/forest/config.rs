use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Candidate features evaluated per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    /// Resolved count for `n_features`, at least 1 and at most `n_features`.
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, n_features.max(1))
    }
}

/// How tree outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VoteMode {
    /// Average of per-tree leaf class proportions.
    #[default]
    Soft,
    /// Each tree casts one vote for its leaf's majority class.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub random_state: u64,
    #[serde(default)]
    pub vote: VoteMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid forest config: {0}")]
pub struct ConfigError(pub &'static str);

impl Default for ForestConfig {
    /// 200 trees, sqrt features, leaf 1, split 2, bootstrap, seed 24.
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bootstrap: true,
            random_state: 24,
            vote: VoteMode::Soft,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, random_state: u64) -> Self {
        self.random_state = random_state;
        self
    }

    pub fn with_trees(mut self, n_estimators: usize) -> Self {
        self.n_estimators = n_estimators;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_estimators == 0 {
            return Err(ConfigError("n_estimators must be >= 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(ConfigError("min_samples_leaf must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(ConfigError("min_samples_split must be >= 2"));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(ConfigError("max_features must be >= 1"));
        }
        Ok(())
    }
}

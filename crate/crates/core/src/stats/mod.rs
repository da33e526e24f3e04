//! Group-comparison tests and load summaries.

pub mod chi2;
pub mod kruskal;
pub mod load;
pub mod special;
pub mod svg;
pub mod tukey;

use thiserror::Error;

pub use chi2::{chi_square_independence, ChiSquareResult};
pub use kruskal::{kruskal_wallis, KruskalResult};
pub use load::{contingency, frequency_ratios, load_trend, DifficultyTrend, FrequencyRatios, ParticipantSeries};
pub use special::{chi2_sf, ptukey};
pub use svg::trend_svg;
pub use tukey::{tukey_hsd, TukeyPair, TukeyResult, DEFAULT_ALPHAS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("group {group:?} has {size} values, at least 2 required")]
    GroupTooSmall { group: String, size: usize },
    #[error("{n} observations, at least {min} required")]
    TooFewObservations { n: usize, min: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("table must be rectangular and at least 2x2, got {rows}x{cols}")]
    TableShape { rows: usize, cols: usize },
    #[error("a row or column total is zero")]
    ZeroMarginal,
    #[error("{0} labels but {1} group tags")]
    LengthMismatch(usize, usize),
    #[error("no participants")]
    NoParticipants,
}

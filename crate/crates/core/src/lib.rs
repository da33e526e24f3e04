//! Cognitive-load classification from a single-channel wearable EEG headset
//! and its heart-beat sensor.
//!
//! The pipeline runs at one tick per second:
//!
//! 1. [`ingest`] decodes the device's framed byte stream into [`SampleRecord`]s
//!    (eight band powers plus the R-R intervals observed during the tick) and
//!    reads/writes session logs as CSV.
//! 2. [`features`] turns each tick into a nine-element [`FeatureVector`]:
//!    the square root of each band power and a rolling RMSSD.
//! 3. [`cleaning`] drops outlying training vectors with a k-nearest-neighbour
//!    distance filter.
//! 4. [`forest`] trains a seed-deterministic random forest of Gini CART trees.
//! 5. [`evaluation`] provides the stratified 80/20 holdout, leave-one-group-out
//!    cross-validation and per-class metric reports.
//! 6. [`stats`] holds the group-comparison batteries (Kruskal-Wallis,
//!    chi-square with Cramer's V, Tukey HSD) and the load trend summaries.
//!
//! [`synth`] generates synthetic cohorts with known class structure so every
//! stage can be checked without human recordings.

pub mod cleaning;
pub mod domain;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod plan;
pub mod stats;
pub mod synth;

pub use domain::{Band, Difficulty, LoadLabel, Task, BAND_COUNT, FEATURE_DIM};
pub use features::{FeatureRow, FeatureVector};
pub use forest::{ForestConfig, ForestModel};
pub use ingest::SampleRecord;
pub use plan::{Phase, SessionPlan};

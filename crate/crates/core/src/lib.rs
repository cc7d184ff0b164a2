//! Diversity-preserving re-sampling for imbalanced binary classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] holds the [`Dataset`] type, CSV ingestion, stratified splitting,
//!   imbalance-level manipulation, standardization and synthetic benchmarks.
//! * [`diversity`] implements the Solow-Polasky measure over an exponential
//!   similarity kernel, per-instance contributions read off the maintained
//!   inverse, and greedy least-contribution removal with rank-one downdates.
//! * [`resampling`] provides ROS, RUS, SMOTE and the hybrid schemes, each with
//!   an optional diversity selection stage.
//! * [`classifiers`] has the four score-producing models (GLM, KNN, CART, RF).
//! * [`evaluation`] computes PR curves, PR-AUC and Wilcoxon signed-rank tests
//!   and runs repeated experiments.
//! * [`sort`] encodes and scores SORT surgical-mortality patients and runs the
//!   re-sampling case study.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod data;
pub mod diversity;
pub mod error;
pub mod evaluation;
pub mod resampling;
pub mod seed;
pub mod sort;

pub use classifiers::{ModelKind, ModelSpec, TrainedModel};
pub use data::{Dataset, SplitResult, Standardizer};
pub use diversity::{KernelInverseState, SelectionResult};
pub use error::{Error, Result};
pub use evaluation::{ExperimentConfig, ExperimentResult, PrCurve};
pub use resampling::{Method, Provenance, ResampleOutcome, ResamplePlan};

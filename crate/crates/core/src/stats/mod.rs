//! Metrics for comparing raw datasets with each other or with the model:
//! Mann-Whitney on `b = 1` times, ECDF distance on `b = 0` times, Bernoulli
//! KL on event-bit ratios, and MSE / total variation of frequency tables
//! against a PMF.

mod compare;
mod ecdf;
mod kl;
mod mann_whitney;
mod mse;

use thiserror::Error;

pub use compare::{
    compare_datasets, compare_samples, compare_with_model, CompareOptions, ComparisonReport, ComparisonSummary,
    EcdfMetric, MissingSide, RegionComparison, RegionSamples,
};
pub use ecdf::{ecdf_max_distance, ecdf_squared_area};
pub use kl::kl_bit_divergence;
pub use mann_whitney::{mann_whitney, MannWhitney, MwOutcome, EXACT_MAX_N, MIN_SAMPLE};
pub use mse::{pmf_mse, total_variation};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("frequency table built on map {empirical}, PMF on map {analytic}")]
    InconsistentLattice { empirical: String, analytic: String },
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
    #[error("more than one input for event region {0}")]
    DuplicateRegion(u32),
    #[error(transparent)]
    Model(#[from] crate::analytic::ModelError),
}

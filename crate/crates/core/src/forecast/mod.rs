//! Duration beliefs, weekly Bayesian updating from progress evidence, Monte
//! Carlo finish forecasting and critical-chain buffer accounting.

mod belief;
mod buffer;
mod montecarlo;
mod series;

use thiserror::Error;

use crate::network::NetworkError;

pub use belief::{
    apply_evidence, bayesian_update, implied_duration, BeliefSet, DistributionFamily, DurationBelief,
    ProgressEvidence, Provenance,
};
pub use buffer::{buffer_update, BufferBaseline, BufferEntry, BufferObservation, BufferState};
pub use montecarlo::{
    monte_carlo_forecast, nearest_rank, replication_stream, ForecastConfig, ForecastResult, QuantilePoint,
    DEFAULT_SAMPLES,
};
pub use series::{apply_week, weekly_forecast_series, WeeklyForecast};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("activity {0} reports zero progress; no duration can be implied")]
    ZeroProgress(String),
    #[error("invalid evidence for {activity}: {reason}")]
    InvalidEvidence { activity: String, reason: String },
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSd(f64),
    #[error("network has no activities")]
    EmptyNetwork,
    #[error("no belief for activity {0}")]
    MissingBelief(String),
    #[error("unknown activity {0}")]
    UnknownActivity(String),
    #[error("evidence log is not sorted by week")]
    UnsortedEvidence,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("buffer size must be positive")]
    InvalidBufferSize,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

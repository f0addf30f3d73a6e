//! Deterministic, seedable project-control engine.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`, which is what the twin, the CLI and the
//! HTTP service use.

pub mod cost;
pub mod evm;
pub mod forecast;
pub mod graph;
pub mod network;
pub mod resource;
pub mod sandbox;
mod scalar;
pub mod stats;
pub mod twin;

pub use scalar::Scalar;

pub type CpmResult = network::CpmResult<f64>;
pub type ActivityTiming = network::ActivityTiming<f64>;
pub type DurationBelief = forecast::DurationBelief<f64>;
pub type BeliefSet = forecast::BeliefSet<f64>;
pub type ProgressEvidence = forecast::ProgressEvidence<f64>;
pub type ForecastResult = forecast::ForecastResult<f64>;
pub type WeeklyForecast = forecast::WeeklyForecast<f64>;
pub type BufferState = forecast::BufferState<f64>;
pub type EvmPoint = evm::EvmPoint<f64>;
pub type EvmMetrics = evm::EvmMetrics<f64>;
pub type QuantityRecord = evm::QuantityRecord<f64>;

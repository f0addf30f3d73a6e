//! The project twin: validated inputs, the weekly control loop, the
//! decision log, and an append-only event history that replays to the same
//! state.

mod analysis;
mod cycle;
mod ingest;
mod state;
mod store;

use thiserror::Error;

pub use analysis::{
    cost_mape, evm_as_of, run_ablation, AblationRow, Component, CostComparison, DivisionCost, ProjectSummary,
};
pub use ingest::SourceKind;
pub use state::{
    DecisionRecord, EstimateItem, TwinConfig, TwinState, WeeklyCycleResult,
};
pub use store::{read_snapshot, write_snapshot, Event, ProjectStore, RunOptions, Twin};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwinError {
    #[error("{kind} row {row}, column {column}: {reason}")]
    SchemaViolation {
        kind: String,
        row: usize,
        column: String,
        reason: String,
    },
    #[error("unknown source kind {0}")]
    UnknownKind(String),
    #[error("{0} has not been ingested")]
    MissingInput(&'static str),
    #[error("week {got} cannot run next; expected week {expected}")]
    WeekOutOfOrder { expected: u32, got: u32 },
    #[error("unknown recommendation {0}")]
    UnknownRecommendation(String),
    #[error("version conflict: expected {expected}, current {current}")]
    StaleVersion { expected: u64, current: u64 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("replay has not covered all {0} weeks")]
    IncompleteReplay(u32),
    #[error("actual finish not configured")]
    NoActualFinish,
    #[error("unknown ablation component {0}")]
    UnknownComponent(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Forecast(#[from] crate::forecast::ForecastError),
    #[error(transparent)]
    Evm(#[from] crate::evm::EvmError),
    #[error(transparent)]
    Cost(#[from] crate::cost::CostError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Resource(#[from] crate::resource::ResourceError),
    #[error(transparent)]
    Sandbox(#[from] crate::sandbox::SandboxError),
}

impl TwinError {
    /// Bad or missing input data, as opposed to misuse.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            TwinError::UnknownKind(_) | TwinError::UnknownComponent(_) | TwinError::WeekOutOfOrder { .. }
        )
    }
}

impl From<std::io::Error> for TwinError {
    fn from(e: std::io::Error) -> Self {
        TwinError::Io(e.to_string())
    }
}

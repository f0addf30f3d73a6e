//! Look-ahead resource levelling: a serial schedule generator with an
//! overtime cap, typed corrective actions, and a tabular Q-learning policy
//! that ranks them.

mod actions;
mod instance;
mod qlearn;
mod recommend;
mod ssgs;

use thiserror::Error;

pub use actions::{apply_action, candidate_action, simulate_action, ActionEffect, ActionKind, ResourceAction};
pub use instance::{random_instance, ExtraShift, LookaheadInstance, Resource, Task};
pub use qlearn::{
    encode_state, q_learning, Environment, LookaheadEnv, Policy, QConfig, RewardWeights, StepSize, TabularMdp, Transition,
    STATE_COUNT,
};
pub use recommend::{
    action_id, build_lookahead, decide, overtime_report, recommend, LookaheadSettings, OvertimeReport,
    Recommendation, RecommendationStatus, WeekOvertime, WeekPlan,
};
pub use ssgs::{
    baseline_schedule, best_rule_schedule, exhaustive_best, priority_order, schedule_in_order, Assignment,
    PriorityRule, ScheduleOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResourceError {
    #[error("invalid look-ahead instance: {0}")]
    InvalidInstance(String),
    #[error("unknown resource {0}")]
    UnknownResource(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("precedence cycle")]
    CycleDetected,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid learning parameter: {0}")]
    InvalidConfig(String),
    #[error("recommendation {0} was already decided")]
    AlreadyDecided(String),
    #[error("action would extend the finish by {0} days")]
    MakespanExtension(u32),
    #[error("nothing to schedule in week {0}")]
    EmptyWindow(u32),
    #[error("unknown recommendation {0}")]
    UnknownRecommendation(String),
}

//! Stage one: turn a query into a [`RetrievalPlan`].
//!
//! A Manager picks the next speaker among Planner, Reviewer, Coder and Executor. The
//! Planner drafts the plan, the Reviewer accepts or asks for a revision (its verdicts
//! accumulate in memory and are shown to the Planner on later turns), the Coder writes
//! tool calls and the Executor runs them against the fixture database. Language-model
//! turns go through an [`LlmBackend`].

mod agents;
mod backend;
mod cards;
mod plan;
mod registry;

use thiserror::Error;

pub use agents::{
    reflect, run_planning, AgentRole, AgentStep, AgentTranscript, ManagerDecision, ToolCall, Verdict,
    DEFAULT_STEP_LIMIT,
};
pub use backend::{
    BackendError, ChatMessage, LiveBackend, LlmBackend, LlmRequest, MockBackend, ScriptEntry, LLM_API_KEY_ENV,
    LLM_ENDPOINT_ENV, LLM_MODEL_ENV,
};
pub use cards::{CardSet, DataApiCard, ParamSpec, SensorCard};
pub use plan::{
    extract_plan, plan_accuracy, PlanEntry, RetrievalPlan, PLAN_FORMAT_VERSION,
};
pub use registry::{Gazetteer, RegistryRecord, SensorRegistry, ToolBox};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("plan could not be parsed after {} steps: {reason}", transcript.steps.len())]
    PlanParse {
        reason: String,
        transcript: Box<AgentTranscript>,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid card set: {0}")]
    InvalidCards(String),
    #[error("gold plan has no entries")]
    EmptyGold,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reading {path}: {reason}")]
    Fixture { path: String, reason: String },
}

pub(crate) fn read_fixture(path: &std::path::Path) -> Result<String, PlannerError> {
    std::fs::read_to_string(path).map_err(|e| PlannerError::Fixture {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

//! Hierarchical explainability for a modular home robot.
//!
//! Component explainers each observe the events of one robot module. An
//! explainer selector picks the explainer for a question, from the plan and
//! skill statuses when something failed, otherwise by classifying the
//! question. Two monolithic baselines and a scenario simulator come along
//! for comparison.

pub mod baselines;
pub mod causal;
pub mod error;
pub mod explainers;
pub mod framework;
pub mod model;
pub mod pizza;
pub mod prompts;
pub mod reasoner;
pub mod scenario;
pub mod trace;

pub use error::{CausalError, ExplainError, FrameworkError, LimeError, ReasonerError, ScenarioError, TraceError};
pub use framework::{
    aggregate, build_context, explain_hexar, explain_hexar_with_decision, observe, select,
    ComponentExplainer, ExplainerOutput, ExplainerRegistry, ObservationStore, SelectionStage,
    SelectorDecision,
};
pub use model::{Category, ContextVector, Explanation, GroundTruth, PlanStep, Query, SkillStatus, TaskPlan};
pub use trace::{read_trace, write_trace, Event, EventKind, Source, Trace, Value};

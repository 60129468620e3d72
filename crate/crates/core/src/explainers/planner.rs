use crate::error::ExplainError;
use crate::framework::{ComponentExplainer, ExplainerOutput};
use crate::model::{ContextVector, Query, TaskPlan};
use crate::prompts::{format_list, format_plan, format_statuses, render, single_line, PLANNER};
use crate::reasoner::{ReasonerRequest, TextReasoner};
use crate::trace::{Event, EventKind, Source};

/// Planner prompt: instruction, plan, grounding errors, statuses, query.
pub fn planner_request(query: &Query, context: &ContextVector, plan: &TaskPlan) -> ReasonerRequest {
    render(
        PLANNER,
        &[
            ("instruction", &single_line(&plan.instruction)),
            ("plan", &format_plan(&plan.steps)),
            ("grounding_errors", &format_list(&plan.grounding_errors)),
            ("statuses", &format_statuses(&context.skills)),
            ("query", &single_line(&query.text)),
        ],
    )
}

pub fn explain_planner(
    query: &Query,
    context: &ContextVector,
    events: &[&Event],
    reasoner: &dyn TextReasoner,
) -> Result<ExplainerOutput, ExplainError> {
    let plan_event = events
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::Plan)
        .ok_or_else(|| ExplainError::MissingEvent("plan".into()))?;
    let plan = TaskPlan::from_payload(&plan_event.payload)
        .map_err(|e| ExplainError::Malformed(e.to_string()))?;
    let answer = reasoner.complete(&planner_request(query, context, &plan))?;
    Ok(ExplainerOutput::new(answer.text))
}

pub struct PlannerExplainer;

impl ComponentExplainer for PlannerExplainer {
    fn id(&self) -> &str {
        "planner"
    }

    fn subscriptions(&self) -> &[Source] {
        &[Source::Planner]
    }

    fn summary(&self) -> &str {
        "explains the task plan: how the instruction was turned into skills, invalid or missing steps, and overall task outcome"
    }

    fn explain(
        &self,
        query: &Query,
        context: &ContextVector,
        events: &[&Event],
        reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError> {
        explain_planner(query, context, events, reasoner)
    }
}

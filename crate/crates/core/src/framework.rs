//! Explainer registry, event observation, the two-stage selector and
//! aggregation.
//!
//! A component explainer pairs an explanation function with the set of
//! sources it observes. The registry maps each robot module to the
//! explainers that can speak for it. The selector looks at the plan and
//! the skill statuses first and only falls back to classifying the query
//! text when nothing failed.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{ExplainError, FrameworkError};
use crate::model::{ContextVector, Explanation, Query, SkillStatus, TaskPlan};
use crate::prompts::{render, single_line, AGGREGATOR, SELECTOR};
use crate::reasoner::{Meter, TextReasoner};
use crate::trace::{Event, EventKind, Source, Trace};

/// Text returned by an explainer body. `degraded` marks a fallback text
/// produced because the reasoner failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplainerOutput {
    pub text: String,
    pub degraded: bool,
}

impl ExplainerOutput {
    pub fn new(text: impl Into<String>) -> Self {
        ExplainerOutput {
            text: text.into(),
            degraded: false,
        }
    }
}

pub trait ComponentExplainer: Send + Sync {
    fn id(&self) -> &str;

    /// Sources whose events this explainer observes.
    fn subscriptions(&self) -> &[Source];

    /// One-line capability summary shown to the query classifier.
    fn summary(&self) -> &str;

    fn explain(
        &self,
        query: &Query,
        context: &ContextVector,
        events: &[&Event],
        reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError>;
}

/// Explainers by id plus the module-to-explainer mapping.
#[derive(Default)]
pub struct ExplainerRegistry {
    explainers: Vec<Box<dyn ComponentExplainer>>,
    entries: BTreeMap<Source, Vec<String>>,
}

impl fmt::Debug for ExplainerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplainerRegistry")
            .field("explainers", &self.ids())
            .field("entries", &self.entries)
            .finish()
    }
}

impl ExplainerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The five explainers of the robot, one per module, in module order.
    pub fn standard() -> Self {
        use crate::causal::HelpExplainer;
        use crate::explainers::{NavigationExplainer, PlannerExplainer, TtsExplainer};
        use crate::pizza::PizzaExplainer;

        let mut r = Self::new();
        r.register(Box::new(PlannerExplainer), &[Source::Planner])
            .expect("fresh registry");
        r.register(Box::new(NavigationExplainer::default()), &[Source::Navigation])
            .expect("fresh registry");
        r.register(Box::new(TtsExplainer), &[Source::TextToSpeech])
            .expect("fresh registry");
        r.register(Box::new(HelpExplainer::default()), &[Source::AskHumanForHelp])
            .expect("fresh registry");
        r.register(Box::new(PizzaExplainer::default()), &[Source::PizzaRecommender])
            .expect("fresh registry");
        r
    }

    /// Adds an explainer and maps it to `modules`.
    pub fn register(
        &mut self,
        explainer: Box<dyn ComponentExplainer>,
        modules: &[Source],
    ) -> Result<(), FrameworkError> {
        let id = explainer.id().to_owned();
        if self.get(&id).is_some() {
            return Err(FrameworkError::Registration(format!(
                "explainer `{id}` is already registered"
            )));
        }
        if explainer.subscriptions().is_empty() {
            return Err(FrameworkError::Registration(format!(
                "explainer `{id}` subscribes to no source"
            )));
        }
        for m in modules {
            self.entries.entry(*m).or_default().push(id.clone());
        }
        self.explainers.push(explainer);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&dyn ComponentExplainer> {
        self.explainers
            .iter()
            .find(|e| e.id() == id)
            .map(|e| e.as_ref())
    }

    /// Ids in registration order.
    pub fn ids(&self) -> Vec<&str> {
        self.explainers.iter().map(|e| e.id()).collect()
    }

    pub fn explainers(&self) -> impl Iterator<Item = &dyn ComponentExplainer> {
        self.explainers.iter().map(|e| e.as_ref())
    }

    pub fn for_module(&self, module: Source) -> &[String] {
        self.entries.get(&module).map_or(&[], Vec::as_slice)
    }

    /// First explainer mapped to `module`.
    pub fn primary_for(&self, module: Source) -> Result<&str, FrameworkError> {
        self.for_module(module)
            .first()
            .map(String::as_str)
            .ok_or_else(|| FrameworkError::Unmapped(module.to_string()))
    }

    /// Errors unless every robot module has at least one explainer.
    pub fn check_coverage(&self) -> Result<(), FrameworkError> {
        for m in Source::MODULES {
            self.primary_for(m)?;
        }
        Ok(())
    }
}

/// Read-only per-explainer views onto one trace.
#[derive(Debug, Clone, Copy)]
pub struct ObservationStore<'t> {
    trace: &'t Trace,
}

pub fn observe(trace: &Trace) -> ObservationStore<'_> {
    ObservationStore { trace }
}

impl<'t> ObservationStore<'t> {
    pub fn trace(&self) -> &'t Trace {
        self.trace
    }

    /// Events emitted by any of `sources`, in trace order.
    pub fn view(&self, sources: &[Source]) -> Vec<&'t Event> {
        self.trace
            .events
            .iter()
            .filter(|e| sources.contains(&e.source))
            .collect()
    }

    /// Events visible to an explainer that fall inside `window`.
    pub fn view_in(&self, sources: &[Source], window: (f64, f64)) -> Vec<&'t Event> {
        self.view(sources)
            .into_iter()
            .filter(|e| e.ts >= window.0 && e.ts <= window.1)
            .collect()
    }

    /// The selector's view: the plan and every skill status.
    pub fn selector_view(&self) -> Vec<&'t Event> {
        self.trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Plan | EventKind::SkillStatus))
            .collect()
    }

    pub fn plan(&self) -> Result<TaskPlan, FrameworkError> {
        let event = self.trace.plan_event().ok_or(FrameworkError::MissingPlan)?;
        Ok(TaskPlan::from_payload(&event.payload)?)
    }
}

pub fn build_context(query: &Query, store: &ObservationStore<'_>) -> Result<ContextVector, FrameworkError> {
    let plan = store.plan()?;
    let events = &store.trace().events;
    let start = events.first().map_or(0.0, |e| e.ts);
    let end = store.trace().end_ts().min(query.asked_at).max(start);

    let statuses = store.selector_view();
    let skills = plan
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let latest = statuses
                .iter()
                .filter(|e| e.ts <= end)
                .filter_map(|e| {
                    let (skill, status, _) = e.skill_status()?;
                    let same_step = match e.num_field("step") {
                        Some(n) => n as usize == i,
                        None => skill == step.skill,
                    };
                    same_step.then_some(status)
                })
                .next_back()
                .unwrap_or(SkillStatus::Waiting);
            (step.skill.clone(), latest)
        })
        .collect();
    Ok(ContextVector {
        task: plan.instruction,
        skills,
        plan_valid: plan.valid,
        window: (start, end),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStage {
    FailureHeuristic,
    QueryClassifier,
}

impl SelectionStage {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStage::FailureHeuristic => "failure_heuristic",
            SelectionStage::QueryClassifier => "query_classifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorDecision {
    pub chosen: Vec<String>,
    pub stage: SelectionStage,
    pub context: ContextVector,
}

/// Skill of the earliest failed status inside the window.
fn earliest_failure<'t>(store: &ObservationStore<'t>, window: (f64, f64)) -> Option<&'t str> {
    store
        .selector_view()
        .into_iter()
        .filter(|e| e.ts >= window.0 && e.ts <= window.1)
        .filter_map(Event::skill_status)
        .find(|(_, status, _)| *status == SkillStatus::Failed)
        .map(|(skill, _, _)| skill)
}

pub fn select(
    query: &Query,
    store: &ObservationStore<'_>,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<SelectorDecision, FrameworkError> {
    let context = build_context(query, store)?;
    let decide = |id: &str, stage| SelectorDecision {
        chosen: vec![id.to_owned()],
        stage,
        context: context.clone(),
    };

    if !context.plan_valid {
        let id = registry.primary_for(Source::Planner)?;
        return Ok(decide(id, SelectionStage::FailureHeuristic));
    }
    if let Some(skill) = earliest_failure(store, context.window) {
        let id = registry.primary_for(Source::for_skill(skill))?;
        return Ok(decide(id, SelectionStage::FailureHeuristic));
    }

    let explainers = registry
        .explainers()
        .map(|e| format!("- {}: {}", e.id(), e.summary()))
        .collect::<Vec<_>>()
        .join("\n");
    let skills = context
        .skills
        .iter()
        .map(|(s, st)| format!("{s} ({st})"))
        .collect::<Vec<_>>()
        .join(", ");
    let request = render(
        SELECTOR,
        &[
            ("explainers", &explainers),
            ("task", &single_line(&context.task)),
            ("skills", &skills),
            ("query", &single_line(&query.text)),
        ],
    );
    let answer = reasoner.complete(&request)?.text;
    let id = answer.trim().trim_matches(|c: char| matches!(c, '`' | '"' | '\'' | '.'));
    if registry.get(id).is_none() {
        return Err(FrameworkError::UnknownExplainer(answer.trim().to_owned()));
    }
    Ok(decide(id, SelectionStage::QueryClassifier))
}

/// Merges explanations into one. A single explanation passes through
/// unchanged; several are merged by the reasoner, whose call and time are
/// added to the totals of the inputs.
pub fn aggregate(
    explanations: &[Explanation],
    query: &Query,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, FrameworkError> {
    match explanations {
        [] => return Err(FrameworkError::EmptyAggregation),
        [one] => return Ok(one.clone()),
        _ => {}
    }
    let listed = explanations
        .iter()
        .map(|x| format!("- [{}] {}", x.produced_by_label(), single_line(&x.text)))
        .collect::<Vec<_>>()
        .join("\n");
    let request = render(
        AGGREGATOR,
        &[("explanations", &listed), ("query", &single_line(&query.text))],
    );
    let (result, stats) = Meter::run(reasoner, |m| m.complete(&request));
    let text = result?.text;

    let mut produced_by: Vec<String> = Vec::new();
    for id in explanations.iter().flat_map(|x| &x.produced_by) {
        if !produced_by.contains(id) {
            produced_by.push(id.clone());
        }
    }
    produced_by.push("aggregator".into());
    Ok(Explanation {
        text,
        produced_by,
        reasoner_calls: explanations.iter().map(|x| x.reasoner_calls).sum::<usize>() + stats.calls,
        wall_time: explanations.iter().map(|x| x.wall_time).sum::<f64>() + stats.wall_time,
        degraded: explanations.iter().any(|x| x.degraded),
    })
}

/// Runs one explainer against its view of the trace.
pub fn run_explainer(
    explainer: &dyn ComponentExplainer,
    query: &Query,
    context: &ContextVector,
    store: &ObservationStore<'_>,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, FrameworkError> {
    let events = store.view_in(explainer.subscriptions(), context.window);
    let (out, stats) = Meter::run(reasoner, |m| explainer.explain(query, context, &events, m));
    let out = out.map_err(|source| FrameworkError::Explainer {
        id: explainer.id().to_owned(),
        source,
    })?;
    Ok(Explanation {
        text: out.text,
        produced_by: vec![explainer.id().to_owned()],
        reasoner_calls: stats.calls,
        wall_time: stats.wall_time,
        degraded: out.degraded,
    })
}

/// Full pipeline: observe, select, explain. Returns the selector decision
/// alongside the explanation.
pub fn explain_hexar_with_decision(
    query: &Query,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<(Explanation, SelectorDecision), FrameworkError> {
    let store = observe(trace);
    let (result, stats) = Meter::run(reasoner, |m| {
        let decision = select(query, &store, registry, m)?;
        let explanations = decision
            .chosen
            .iter()
            .map(|id| {
                let e = registry
                    .get(id)
                    .ok_or_else(|| FrameworkError::UnknownExplainer(id.clone()))?;
                run_explainer(e, query, &decision.context, &store, m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let merged = aggregate(&explanations, query, m)?;
        Ok::<_, FrameworkError>((merged, decision))
    });
    let (mut explanation, decision) = result?;
    explanation.reasoner_calls = stats.calls;
    explanation.wall_time = stats.wall_time;
    Ok((explanation, decision))
}

pub fn explain_hexar(
    query: &Query,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, FrameworkError> {
    explain_hexar_with_decision(query, trace, registry, reasoner).map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlanStep, TaskPlan};
    use crate::reasoner::RuleReasoner;

    fn trace(valid: bool, statuses: &[(&str, &str, f64)]) -> Trace {
        let plan = TaskPlan {
            instruction: "Go to the kitchen".into(),
            steps: vec![
                PlanStep::new("navigation", &[("location", "kitchen")]),
                PlanStep::new("text_to_speech", &[("text", "hi")]),
            ],
            valid,
            grounding_errors: if valid { vec![] } else { vec!["bad".into()] },
        };
        let mut events = vec![Event {
            ts: 0.0,
            source: Source::Planner,
            kind: EventKind::Plan,
            payload: plan.to_payload(),
        }];
        for (skill, status, ts) in statuses {
            events.push(
                Event::new(*ts, Source::for_skill(skill), EventKind::SkillStatus)
                    .with("skill", *skill)
                    .with("status", *status)
                    .with("step", if *skill == "navigation" { 0i64 } else { 1 }),
            );
        }
        Trace {
            scenario_id: 1,
            task_variant: 1,
            seed: 0,
            events,
        }
    }

    #[test]
    fn context_takes_latest_status_and_window() {
        let t = trace(
            true,
            &[
                ("navigation", "running", 1.0),
                ("navigation", "succeeded", 2.0),
                ("text_to_speech", "running", 3.0),
            ],
        );
        let ctx = build_context(&Query::new("q", 10.0), &observe(&t)).unwrap();
        assert_eq!(
            ctx.skills,
            vec![
                ("navigation".into(), SkillStatus::Succeeded),
                ("text_to_speech".into(), SkillStatus::Running)
            ]
        );
        assert_eq!(ctx.window, (0.0, 3.0));
        let early = build_context(&Query::new("q", 1.5), &observe(&t)).unwrap();
        assert_eq!(early.window, (0.0, 1.5));
        assert_eq!(early.skills[0].1, SkillStatus::Running);
    }

    #[test]
    fn missing_plan_is_an_error() {
        let t = Trace {
            scenario_id: 1,
            task_variant: 1,
            seed: 0,
            events: vec![],
        };
        assert!(matches!(
            build_context(&Query::new("q", 1.0), &observe(&t)),
            Err(FrameworkError::MissingPlan)
        ));
    }

    #[test]
    fn invalid_plan_selects_planner() {
        let t = trace(false, &[("navigation", "waiting", 0.1)]);
        let d = select(
            &Query::new("Why so slow?", 5.0),
            &observe(&t),
            &ExplainerRegistry::standard(),
            &RuleReasoner::new(),
        )
        .unwrap();
        assert_eq!(d.chosen, vec!["planner"]);
        assert_eq!(d.stage, SelectionStage::FailureHeuristic);
    }

    #[test]
    fn earliest_failure_wins() {
        let t = trace(
            true,
            &[
                ("text_to_speech", "failed", 1.0),
                ("navigation", "failed", 2.0),
            ],
        );
        let d = select(
            &Query::new("What happened?", 5.0),
            &observe(&t),
            &ExplainerRegistry::standard(),
            &RuleReasoner::new(),
        )
        .unwrap();
        assert_eq!(d.chosen, vec!["text_to_speech"]);
    }

    struct Says(&'static str);

    impl TextReasoner for Says {
        fn complete(
            &self,
            _: &crate::reasoner::ReasonerRequest,
        ) -> Result<crate::reasoner::ReasonerResponse, crate::error::ReasonerError> {
            Ok(crate::reasoner::ReasonerResponse {
                text: self.0.into(),
                latency: 0.0,
                token_count: 1,
            })
        }
    }

    #[test]
    fn unknown_classifier_answer_is_an_error() {
        let t = trace(
            true,
            &[("navigation", "succeeded", 1.0), ("text_to_speech", "succeeded", 2.0)],
        );
        let err = select(
            &Query::new("What happened?", 5.0),
            &observe(&t),
            &ExplainerRegistry::standard(),
            &Says("vision"),
        )
        .unwrap_err();
        assert!(matches!(err, FrameworkError::UnknownExplainer(id) if id == "vision"));
        let ok = select(
            &Query::new("What happened?", 5.0),
            &observe(&t),
            &ExplainerRegistry::standard(),
            &Says(" navigation.\n"),
        )
        .unwrap();
        assert_eq!(ok.chosen, vec!["navigation"]);
        assert_eq!(ok.stage, SelectionStage::QueryClassifier);
    }

    fn x(id: &str, text: &str, calls: usize) -> Explanation {
        Explanation {
            text: text.into(),
            produced_by: vec![id.into()],
            reasoner_calls: calls,
            wall_time: 0.5,
            degraded: false,
        }
    }

    #[test]
    fn aggregation_contract() {
        let r = RuleReasoner::new();
        let q = Query::new("q", 0.0);
        assert!(matches!(aggregate(&[], &q, &r), Err(FrameworkError::EmptyAggregation)));
        let one = x("navigation", "A.", 1);
        assert_eq!(aggregate(std::slice::from_ref(&one), &q, &r).unwrap(), one);
        let merged = aggregate(&[x("a", "Same.", 1), x("b", "Same.", 0)], &q, &r).unwrap();
        assert_eq!(merged.text, "Same.");
        assert_eq!(merged.produced_by, vec!["a", "b", "aggregator"]);
        assert_eq!(merged.reasoner_calls, 2);
    }

    #[test]
    fn registry_rejects_duplicates_and_reports_coverage() {
        let mut r = ExplainerRegistry::standard();
        r.check_coverage().unwrap();
        let dup = r.register(Box::new(crate::explainers::TtsExplainer), &[Source::TextToSpeech]);
        assert!(matches!(dup, Err(FrameworkError::Registration(_))));
        let empty = ExplainerRegistry::new();
        assert!(matches!(empty.check_coverage(), Err(FrameworkError::Unmapped(_))));
        assert_eq!(
            r.ids(),
            vec!["planner", "navigation", "text_to_speech", "ask_human_for_help", "pizza_recommender"]
        );
    }
}

//! The two comparison systems: one reasoner call over everything the
//! explainers can see, and every explainer at once followed by aggregation.

use std::thread;

use crate::error::FrameworkError;
use crate::explainers::{filter_logs, navigation_params, LogFilterRules};
use crate::framework::{aggregate, build_context, observe, run_explainer, ExplainerRegistry, ObservationStore};
use crate::model::{ContextVector, Explanation, Query};
use crate::prompts::{format_list, format_plan, format_statuses, render, single_line, END_TO_END};
use crate::reasoner::{Meter, ReasonerRequest, TextReasoner};
use crate::trace::{Event, EventKind, Source, Trace};

/// Sources observed by at least one registered explainer, in source order.
pub fn observed_sources(registry: &ExplainerRegistry) -> Vec<Source> {
    Source::ALL
        .into_iter()
        .filter(|s| registry.explainers().any(|e| e.subscriptions().contains(s)))
        .collect()
}

/// Every event the end-to-end baseline reads: the union of the explainers'
/// views inside the query window.
pub fn end_to_end_view<'t>(
    store: &ObservationStore<'t>,
    context: &ContextVector,
    registry: &ExplainerRegistry,
) -> Vec<&'t Event> {
    store.view_in(&observed_sources(registry), context.window)
}

fn stamped(e: &Event, skip: &[&str]) -> String {
    let fields = e
        .payload
        .iter()
        .filter(|(k, _)| !skip.contains(&k.as_str()))
        .map(|(k, v)| format!("{k}={}", single_line(&v.to_string())))
        .collect::<Vec<_>>()
        .join(" ");
    format!("[{:.2}] {fields}", e.ts)
}

fn lines_or_none(lines: Vec<String>) -> String {
    if lines.is_empty() {
        "none".into()
    } else {
        lines.join("\n")
    }
}

/// The single prompt of the end-to-end baseline.
pub fn end_to_end_request(
    query: &Query,
    trace: &Trace,
    registry: &ExplainerRegistry,
) -> Result<ReasonerRequest, FrameworkError> {
    let store = observe(trace);
    let plan = store.plan()?;
    let context = build_context(query, &store)?;
    let events = end_to_end_view(&store, &context, registry);
    let rules = LogFilterRules::default();

    let mut logs = Vec::new();
    for source in Source::ALL {
        let raw: Vec<String> = events
            .iter()
            .filter(|e| e.source == source)
            .filter_map(|e| e.message())
            .map(str::to_owned)
            .collect();
        logs.extend(
            filter_logs(&raw, &rules)
                .into_iter()
                .map(|l| format!("[{source}] {l}")),
        );
    }
    let params: Vec<String> = navigation_params(&events)
        .into_iter()
        .map(|(k, v)| format!("- {k} = {v}"))
        .collect();
    let of_kind = |kind: EventKind| -> Vec<String> {
        events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| stamped(e, &[]))
            .collect()
    };

    Ok(render(
        END_TO_END,
        &[
            ("instruction", &single_line(&plan.instruction)),
            ("plan", &format_plan(&plan.steps)),
            ("grounding_errors", &format_list(&plan.grounding_errors)),
            ("statuses", &format_statuses(&context.skills)),
            ("logs", &lines_or_none(logs)),
            ("params", &lines_or_none(params)),
            ("detections", &lines_or_none(of_kind(EventKind::Detection))),
            ("dialogue", &lines_or_none(of_kind(EventKind::Dialogue))),
            ("query", &single_line(&query.text)),
        ],
    ))
}

/// One reasoner call over all the information the explainers observe.
pub fn explain_end_to_end(
    query: &Query,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, FrameworkError> {
    let (result, stats) = Meter::run(reasoner, |m| {
        let request = end_to_end_request(query, trace, registry)?;
        Ok::<_, FrameworkError>(m.complete(&request)?)
    });
    Ok(Explanation {
        text: result?.text,
        produced_by: vec!["end_to_end".into()],
        reasoner_calls: stats.calls,
        wall_time: stats.wall_time,
        degraded: false,
    })
}

/// Runs every registered explainer concurrently, then aggregates their
/// outputs in registry order. A failing explainer contributes a failure
/// note instead of aborting the sweep.
pub fn explain_all_components(
    query: &Query,
    trace: &Trace,
    registry: &ExplainerRegistry,
    reasoner: &dyn TextReasoner,
) -> Result<Explanation, FrameworkError> {
    let store = observe(trace);
    let context = build_context(query, &store)?;
    let explanations: Vec<Explanation> = thread::scope(|scope| {
        let handles: Vec<_> = registry
            .explainers()
            .map(|e| {
                let (context, store) = (&context, &store);
                scope.spawn(move || {
                    run_explainer(e, query, context, store, reasoner).unwrap_or_else(|err| Explanation {
                        text: format!("(failed: {err})"),
                        produced_by: vec![e.id().to_owned()],
                        reasoner_calls: 0,
                        wall_time: 0.0,
                        degraded: true,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("explainer thread panicked"))
            .collect()
    });
    aggregate(&explanations, query, reasoner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::section;
    use crate::reasoner::RuleReasoner;
    use crate::scenario::{generate_trace, grid_query, scenario};

    fn point(s: u32, v: u32, q: u8) -> (Trace, Query) {
        let trace = generate_trace(s, v, 0).unwrap();
        let query = grid_query(&scenario(s).unwrap(), q, &trace).unwrap();
        (trace, query)
    }

    #[test]
    fn standard_registry_observes_every_source() {
        assert_eq!(observed_sources(&ExplainerRegistry::standard()), Source::ALL.to_vec());
    }

    #[test]
    fn end_to_end_prompt_for_charging_has_param_and_logs() {
        let (trace, query) = point(7, 1, 1);
        let req = end_to_end_request(&query, &trace, &ExplainerRegistry::standard()).unwrap();
        assert!(section(&req.user_prompt, "Parameters").unwrap().contains("charger_connected = true"));
        assert!(section(&req.user_prompt, "Logs").unwrap().contains("[navigation] Received new navigation goal"));
    }

    #[test]
    fn end_to_end_is_one_call() {
        let (trace, query) = point(9, 2, 3);
        let x = explain_end_to_end(&query, &trace, &ExplainerRegistry::standard(), &RuleReasoner::new()).unwrap();
        assert_eq!(x.reasoner_calls, 1);
        assert_eq!(x.produced_by, vec!["end_to_end"]);
    }

    #[test]
    fn all_components_lists_every_explainer_and_aggregator() {
        let (trace, query) = point(7, 1, 1);
        let registry = ExplainerRegistry::standard();
        let x = explain_all_components(&query, &trace, &registry, &RuleReasoner::new()).unwrap();
        let mut expected: Vec<String> = registry.ids().into_iter().map(str::to_owned).collect();
        expected.push("aggregator".into());
        assert_eq!(x.produced_by, expected);
        assert!(x.text.contains("charging"));
        // planner and navigation use the reasoner; aggregation adds one
        assert_eq!(x.reasoner_calls, 3);
    }
}

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::ExplainError;
use crate::framework::{ComponentExplainer, ExplainerOutput};
use crate::model::{ContextVector, Query};
use crate::prompts::{render, single_line, NAVIGATION};
use crate::reasoner::{ReasonerRequest, TextReasoner};
use crate::trace::{Event, EventKind, Source};

pub const DEFAULT_MAX_LINES: usize = 60;

static COUNTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(.*) \(×(\d+)\)$").unwrap());

/// Which log lines to drop before prompting, and how many to keep.
#[derive(Debug, Clone)]
pub struct LogFilterRules {
    pub discard_patterns: Vec<Regex>,
    /// At least 3, so truncation can keep head, marker and last line.
    pub max_lines: usize,
}

impl LogFilterRules {
    pub fn new(patterns: &[&str], max_lines: usize) -> Result<Self, regex::Error> {
        Ok(LogFilterRules {
            discard_patterns: patterns
                .iter()
                .map(|p| Regex::new(p))
                .collect::<Result<_, _>>()?,
            max_lines: max_lines.max(3),
        })
    }

    /// Keeps every line; only duplicates and length are handled.
    pub fn keep_all(max_lines: usize) -> Self {
        LogFilterRules {
            discard_patterns: Vec::new(),
            max_lines: max_lines.max(3),
        }
    }
}

impl Default for LogFilterRules {
    fn default() -> Self {
        Self::new(
            &[
                r"^Costmap updated",
                r"^Publishing velocity command",
                r"^Transform timeout",
            ],
            DEFAULT_MAX_LINES,
        )
        .expect("built-in patterns compile")
    }
}

fn split_count(line: &str) -> (&str, usize) {
    match COUNTED.captures(line) {
        Some(c) => (
            c.get(1).unwrap().as_str(),
            c[2].parse().unwrap_or(1),
        ),
        None => (line, 1),
    }
}

/// Drops discarded lines, collapses runs of identical lines into
/// `line (×N)` and truncates to `max_lines`, keeping the head and the last
/// line. Order-preserving and idempotent.
pub fn filter_logs(lines: &[String], rules: &LogFilterRules) -> Vec<String> {
    let mut runs: Vec<(&str, usize)> = Vec::new();
    for line in lines {
        let (base, n) = split_count(line);
        if rules.discard_patterns.iter().any(|p| p.is_match(base)) {
            continue;
        }
        match runs.last_mut() {
            Some((last, count)) if *last == base => *count += n,
            _ => runs.push((base, n)),
        }
    }
    let mut out: Vec<String> = runs
        .into_iter()
        .map(|(base, n)| if n > 1 { format!("{base} (×{n})") } else { base.to_owned() })
        .collect();
    let max = rules.max_lines.max(3);
    if out.len() > max {
        let last = out.pop().expect("non-empty");
        let omitted = out.len() - (max - 2);
        out.truncate(max - 2);
        out.push(format!("... ({omitted} lines omitted)"));
        out.push(last);
    }
    out
}

/// Latest value of every parameter reported in `events`, by key.
pub fn navigation_params(events: &[&Event]) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Param) {
        for (k, v) in &e.payload {
            params.insert(k.clone(), v.to_string());
        }
    }
    params
}

fn navigation_request(query: &Query, events: &[&Event], rules: &LogFilterRules) -> ReasonerRequest {
    let lines: Vec<String> = events
        .iter()
        .filter(|e| e.source == Source::Navigation)
        .filter_map(|e| e.message())
        .map(str::to_owned)
        .collect();
    let logs = filter_logs(&lines, rules);
    let params = navigation_params(events);
    let params = if params.is_empty() {
        "none".to_owned()
    } else {
        params
            .iter()
            .map(|(k, v)| format!("- {k} = {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    render(
        NAVIGATION,
        &[
            ("logs", &if logs.is_empty() { "none".into() } else { logs.join("\n") }),
            ("params", &params),
            ("query", &single_line(&query.text)),
        ],
    )
}

/// Navigation explanation from the filtered logs and navigation-related
/// parameters in the window.
pub fn explain_navigation(
    query: &Query,
    context: &ContextVector,
    events: &[&Event],
    reasoner: &dyn TextReasoner,
    rules: &LogFilterRules,
) -> Result<ExplainerOutput, ExplainError> {
    let mine: Vec<&Event> = events
        .iter()
        .copied()
        .filter(|e| context.contains(e.ts))
        .collect();
    let answer = reasoner.complete(&navigation_request(query, &mine, rules))?;
    Ok(ExplainerOutput::new(answer.text))
}

/// Observes navigation plus the `system` source, where dock state is
/// reported.
#[derive(Default)]
pub struct NavigationExplainer {
    pub rules: LogFilterRules,
}

impl NavigationExplainer {
    /// Prompt this explainer would send; exposed for prompt-size checks.
    pub fn request(&self, query: &Query, context: &ContextVector, events: &[&Event]) -> ReasonerRequest {
        let mine: Vec<&Event> = events
            .iter()
            .copied()
            .filter(|e| context.contains(e.ts))
            .collect();
        navigation_request(query, &mine, &self.rules)
    }
}

impl ComponentExplainer for NavigationExplainer {
    fn id(&self) -> &str {
        "navigation"
    }

    fn subscriptions(&self) -> &[Source] {
        &[Source::Navigation, Source::System]
    }

    fn summary(&self) -> &str {
        "explains how the robot moved: routes, speed, delays, obstacles and navigation failures"
    }

    fn explain(
        &self,
        query: &Query,
        context: &ContextVector,
        events: &[&Event],
        reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError> {
        explain_navigation(query, context, events, reasoner, &self.rules)
    }
}

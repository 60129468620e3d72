//! Causal model of the ask-for-help skill and its counterfactual explainer.
//!
//! The skill is a finite state machine: detect people, check the nearest one
//! is close enough, wait for a stable detection, approach, ask, and wait for
//! confirmation. Each stage is a gate on one variable; the first gate that
//! fails determines the outcome. Counterfactuals move the failing variable
//! to the nearest value that passes its gate.

use std::fmt;

use crate::error::{CausalError, ExplainError};
use crate::framework::{ComponentExplainer, ExplainerOutput};
use crate::model::{ContextVector, Query};
use crate::prompts::{render, single_line, HELP};
use crate::reasoner::TextReasoner;
use crate::trace::{Event, EventKind, Source};

/// Largest gap (seconds) between two detections of one person that still
/// counts as a single contiguous detection.
pub const MAX_DETECTION_GAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelpThresholds {
    /// Seconds of contiguous detection needed for a stable detection.
    pub t_stable: f64,
    /// Metres; people farther away are not approached.
    pub d_max: f64,
    /// m²; above this the approach is considered poor.
    pub var_max: f64,
}

impl Default for HelpThresholds {
    fn default() -> Self {
        HelpThresholds {
            t_stable: 2.0,
            d_max: 3.0,
            var_max: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Agree,
    Refuse,
    None,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Response::Agree => "agree",
            Response::Refuse => "refuse",
            Response::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Response> {
        match s {
            "agree" => Some(Response::Agree),
            "refuse" => Some(Response::Refuse),
            "none" => Some(Response::None),
            _ => None,
        }
    }
}

/// Outcome of one execution of the skill, in gate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HelpOutcome {
    NoHumanFound,
    HumanTooFar,
    UnstableDetection,
    ApproachFailed,
    HelpRefused,
    NoConfirmation,
    Success,
}

impl HelpOutcome {
    pub const ALL: [HelpOutcome; 7] = [
        HelpOutcome::NoHumanFound,
        HelpOutcome::HumanTooFar,
        HelpOutcome::UnstableDetection,
        HelpOutcome::ApproachFailed,
        HelpOutcome::HelpRefused,
        HelpOutcome::NoConfirmation,
        HelpOutcome::Success,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HelpOutcome::NoHumanFound => "no_human_found",
            HelpOutcome::HumanTooFar => "human_too_far",
            HelpOutcome::UnstableDetection => "unstable_detection",
            HelpOutcome::ApproachFailed => "approach_failed",
            HelpOutcome::HelpRefused => "help_refused",
            HelpOutcome::NoConfirmation => "no_confirmation",
            HelpOutcome::Success => "success",
        }
    }

    pub fn parse(s: &str) -> Option<HelpOutcome> {
        HelpOutcome::ALL.into_iter().find(|o| o.as_str() == s)
    }
}

impl fmt::Display for HelpOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    NHumans,
    MinDistance,
    DetectionDuration,
    PathFeasible,
    Response,
    Confirmation,
}

impl Variable {
    pub fn as_str(self) -> &'static str {
        match self {
            Variable::NHumans => "n_humans",
            Variable::MinDistance => "min_distance",
            Variable::DetectionDuration => "detection_duration",
            Variable::PathFeasible => "path_feasible",
            Variable::Response => "response",
            Variable::Confirmation => "confirmation",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            Variable::NHumans | Variable::MinDistance | Variable::DetectionDuration
        )
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of a single model variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarValue {
    Count(u32),
    Real(f64),
    /// No distance measured because nobody was detected.
    Absent,
    Flag(bool),
    Reply(Response),
}

impl VarValue {
    /// Numeric magnitude for comparing interventions; `Absent` is infinite.
    pub fn magnitude(self) -> Option<f64> {
        match self {
            VarValue::Count(n) => Some(n as f64),
            VarValue::Real(x) => Some(x),
            VarValue::Absent => Some(f64::INFINITY),
            _ => None,
        }
    }
}

impl fmt::Display for VarValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarValue::Count(n) => write!(f, "{n}"),
            VarValue::Real(x) => write!(f, "{x:.2}"),
            VarValue::Absent => f.write_str("absent"),
            VarValue::Flag(b) => write!(f, "{b}"),
            VarValue::Reply(r) => f.write_str(r.as_str()),
        }
    }
}

/// Observed state of one skill execution.
#[derive(Debug, Clone, PartialEq)]
pub struct HelpVariables {
    pub n_humans: u32,
    /// Seconds of the longest contiguous detection.
    pub detection_duration: f64,
    /// Position variance (m²) over the longest contiguous detection.
    pub detection_variance: f64,
    /// `None` when nobody was detected.
    pub min_distance: Option<f64>,
    pub path_feasible: bool,
    pub response: Response,
    pub confirmation: bool,
}

impl HelpVariables {
    /// All gates satisfied, low detection variance.
    pub fn nominal() -> Self {
        HelpVariables {
            n_humans: 1,
            detection_duration: 3.0,
            detection_variance: 0.01,
            min_distance: Some(1.5),
            path_feasible: true,
            response: Response::Agree,
            confirmation: true,
        }
    }

    pub fn get(&self, var: Variable) -> VarValue {
        match var {
            Variable::NHumans => VarValue::Count(self.n_humans),
            Variable::MinDistance => self.min_distance.map_or(VarValue::Absent, VarValue::Real),
            Variable::DetectionDuration => VarValue::Real(self.detection_duration),
            Variable::PathFeasible => VarValue::Flag(self.path_feasible),
            Variable::Response => VarValue::Reply(self.response),
            Variable::Confirmation => VarValue::Flag(self.confirmation),
        }
    }

    /// Copy with `var` set to `value`. Mismatched kinds leave the copy unchanged.
    pub fn with(&self, var: Variable, value: VarValue) -> Self {
        let mut v = self.clone();
        match (var, value) {
            (Variable::NHumans, VarValue::Count(n)) => v.n_humans = n,
            (Variable::MinDistance, VarValue::Real(x)) => v.min_distance = Some(x),
            (Variable::MinDistance, VarValue::Absent) => v.min_distance = None,
            (Variable::DetectionDuration, VarValue::Real(x)) => v.detection_duration = x,
            (Variable::PathFeasible, VarValue::Flag(b)) => v.path_feasible = b,
            (Variable::Response, VarValue::Reply(r)) => v.response = r,
            (Variable::Confirmation, VarValue::Flag(b)) => v.confirmation = b,
            _ => {}
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub variable: Variable,
    pub failure: HelpOutcome,
}

impl Gate {
    pub fn passes(&self, v: &HelpVariables, th: &HelpThresholds) -> bool {
        match self.variable {
            Variable::NHumans => v.n_humans >= 1,
            Variable::MinDistance => v.min_distance.is_some_and(|d| d <= th.d_max),
            Variable::DetectionDuration => v.detection_duration >= th.t_stable,
            Variable::PathFeasible => v.path_feasible,
            Variable::Response => v.response == Response::Agree,
            Variable::Confirmation => v.confirmation,
        }
    }

    /// Value closest to the current one that satisfies the gate.
    pub fn boundary(&self, th: &HelpThresholds) -> VarValue {
        match self.variable {
            Variable::NHumans => VarValue::Count(1),
            Variable::MinDistance => VarValue::Real(th.d_max),
            Variable::DetectionDuration => VarValue::Real(th.t_stable),
            Variable::PathFeasible => VarValue::Flag(true),
            Variable::Response => VarValue::Reply(Response::Agree),
            Variable::Confirmation => VarValue::Flag(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalHelpModel {
    pub gates: Vec<Gate>,
    pub thresholds: HelpThresholds,
}

impl CausalHelpModel {
    pub fn new(thresholds: HelpThresholds) -> Self {
        use HelpOutcome::*;
        let gate = |variable, failure| Gate { variable, failure };
        CausalHelpModel {
            gates: vec![
                gate(Variable::NHumans, NoHumanFound),
                gate(Variable::MinDistance, HumanTooFar),
                gate(Variable::DetectionDuration, UnstableDetection),
                gate(Variable::PathFeasible, ApproachFailed),
                gate(Variable::Response, HelpRefused),
                gate(Variable::Confirmation, NoConfirmation),
            ],
            thresholds,
        }
    }

    pub fn gate_for(&self, outcome: HelpOutcome) -> Option<&Gate> {
        self.gates.iter().find(|g| g.failure == outcome)
    }

    pub fn failing_gates(&self, v: &HelpVariables) -> Vec<Gate> {
        self.gates
            .iter()
            .filter(|g| !g.passes(v, &self.thresholds))
            .copied()
            .collect()
    }
}

impl Default for CausalHelpModel {
    fn default() -> Self {
        Self::new(HelpThresholds::default())
    }
}

/// Outcome of the first failing gate, or success.
pub fn evaluate_model(model: &CausalHelpModel, v: &HelpVariables) -> HelpOutcome {
    model
        .gates
        .iter()
        .find(|g| !g.passes(v, &model.thresholds))
        .map_or(HelpOutcome::Success, |g| g.failure)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervention {
    pub variable: Variable,
    pub from: VarValue,
    pub to: VarValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualResult {
    pub realized: HelpOutcome,
    pub desired: HelpOutcome,
    pub intervention: Intervention,
    pub resulting: HelpOutcome,
    /// Further gates that block `desired` after the intervention. Non-empty
    /// means no single-variable change reaches the desired outcome.
    pub additional_causes: Vec<Variable>,
}

impl CounterfactualResult {
    pub fn is_multi_cause(&self) -> bool {
        !self.additional_causes.is_empty()
    }

    /// `Y occurred because X = x. If X = x*, Y* would have occurred instead.`
    pub fn sentence(&self) -> String {
        let i = &self.intervention;
        format!(
            "{} occurred because {} = {}. If {} = {}, {} would have occurred instead.",
            self.realized, i.variable, i.from, i.variable, i.to, self.resulting
        )
    }
}

/// Minimal single-variable intervention answering "why Y and not Y*".
///
/// The variable of the gate that produced `Y` is moved onto its boundary;
/// the result reports the outcome that intervention produces and any
/// later gates that still stand between it and `desired`.
pub fn counterfactual(
    model: &CausalHelpModel,
    v: &HelpVariables,
    desired: HelpOutcome,
) -> Result<CounterfactualResult, CausalError> {
    let realized = evaluate_model(model, v);
    if realized == desired {
        return Err(CausalError::AlreadyDesired(desired.to_string()));
    }
    if desired < realized {
        return Err(CausalError::Unreachable {
            desired: desired.to_string(),
            realized: realized.to_string(),
        });
    }
    let gate = *model
        .gate_for(realized)
        .expect("every failure outcome has a gate");
    let to = gate.boundary(&model.thresholds);
    let intervention = Intervention {
        variable: gate.variable,
        from: v.get(gate.variable),
        to,
    };
    let changed = v.with(gate.variable, to);
    let resulting = evaluate_model(model, &changed);

    // gates after the intervened one that must pass for `desired` to occur
    let desired_gate = model.gate_for(desired).map(|g| g.variable);
    let mut additional_causes = Vec::new();
    for g in &model.gates {
        if Some(g.variable) == desired_gate {
            if g.passes(&changed, &model.thresholds) {
                return Err(CausalError::Unreachable {
                    desired: desired.to_string(),
                    realized: realized.to_string(),
                });
            }
            break;
        }
        if !g.passes(&changed, &model.thresholds) {
            additional_causes.push(g.variable);
        }
    }
    Ok(CounterfactualResult {
        realized,
        desired,
        intervention,
        resulting,
        additional_causes,
    })
}

fn help_events<'a>(events: &'a [&'a Event]) -> impl Iterator<Item = &'a Event> + 'a {
    events
        .iter()
        .copied()
        .filter(|e| e.source == Source::AskHumanForHelp)
}

struct Detection {
    ts: f64,
    person: String,
    x: f64,
    y: f64,
    distance: f64,
}

fn detections(events: &[&Event]) -> Result<Vec<Detection>, CausalError> {
    help_events(events)
        .filter(|e| e.kind == EventKind::Detection)
        .map(|e| {
            let missing = |k: &str| CausalError::Malformed(format!("detection at {} lacks `{k}`", e.ts));
            let distance = e.num_field("distance").ok_or_else(|| missing("distance"))?;
            if !distance.is_finite() || distance < 0.0 {
                return Err(CausalError::Malformed(format!("invalid distance {distance}")));
            }
            Ok(Detection {
                ts: e.ts,
                person: e.str_field("person_id").ok_or_else(|| missing("person_id"))?.to_owned(),
                x: e.num_field("x").ok_or_else(|| missing("x"))?,
                y: e.num_field("y").ok_or_else(|| missing("y"))?,
                distance,
            })
        })
        .collect()
}

fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Reads the model variables from the skill's detection and dialogue events.
///
/// Stages the skill never reached keep their nominal (passing) values so
/// that only the observed failure shows up as a cause.
pub fn extract_variables(events: &[&Event]) -> Result<HelpVariables, CausalError> {
    let dets = detections(events)?;
    let mut people: Vec<&str> = Vec::new();
    for d in &dets {
        if !people.contains(&d.person.as_str()) {
            people.push(&d.person);
        }
    }

    // longest contiguous run over all people; earliest run wins ties
    let mut best: Option<(f64, Vec<&Detection>)> = None;
    for person in &people {
        let mine: Vec<&Detection> = dets.iter().filter(|d| d.person == *person).collect();
        let mut start = 0;
        for i in 1..=mine.len() {
            let split = i == mine.len() || mine[i].ts - mine[i - 1].ts > MAX_DETECTION_GAP;
            if split {
                let run = &mine[start..i];
                let duration = run[run.len() - 1].ts - run[0].ts;
                if best.as_ref().is_none_or(|(d, _)| duration > *d) {
                    best = Some((duration, run.to_vec()));
                }
                start = i;
            }
        }
    }
    let (detection_duration, detection_variance) = match &best {
        Some((duration, run)) => {
            let xs: Vec<f64> = run.iter().map(|d| d.x).collect();
            let ys: Vec<f64> = run.iter().map(|d| d.y).collect();
            (*duration, sample_variance(&xs) + sample_variance(&ys))
        }
        None => (0.0, 0.0),
    };

    let min_distance = dets.iter().map(|d| d.distance).reduce(f64::min);
    let mut vars = HelpVariables {
        n_humans: people.len() as u32,
        detection_duration,
        detection_variance,
        min_distance,
        path_feasible: true,
        response: Response::Agree,
        confirmation: true,
    };
    for e in help_events(events) {
        if let Some(b) = e.bool_field("approach.path_feasible") {
            vars.path_feasible = b;
        }
        if e.kind == EventKind::Dialogue {
            if let Some(r) = e.str_field("response") {
                vars.response = Response::parse(r)
                    .ok_or_else(|| CausalError::Malformed(format!("unknown response `{r}`")))?;
            }
            if let Some(c) = e.bool_field("confirmation") {
                vars.confirmation = c;
            }
        }
    }
    Ok(vars)
}

/// Number of times the approach path was replanned, if recorded.
pub fn approach_replans(events: &[&Event]) -> u32 {
    help_events(events)
        .filter_map(|e| e.num_field("approach.replans"))
        .map(|r| r.max(0.0) as u32)
        .last()
        .unwrap_or(0)
}

pub const NOT_EXECUTED_TEXT: &str = "I did not ask anyone for help during this task.";
pub const SUCCESS_TEXT: &str = "I asked for help successfully: a person was detected, approached, agreed to help and confirmed completion.";

pub fn high_variance_text(variance: f64) -> String {
    format!(
        "I approached the person poorly because of high variance in the person's detection ({variance:.2} m²)."
    )
}

pub fn poor_approach_text(replans: u32) -> String {
    format!(
        "I reached the person, but I approached them poorly: suboptimal navigation forced me to replan my approach path {replans} times."
    )
}

/// Explanation for the ask-for-help skill: a naturalised counterfactual on
/// failure, templated notes on poor-but-successful runs.
pub fn explain_help(
    query: &Query,
    context: &ContextVector,
    events: &[&Event],
    reasoner: &dyn TextReasoner,
    model: &CausalHelpModel,
) -> Result<ExplainerOutput, ExplainError> {
    let mine: Vec<&Event> = help_events(events)
        .filter(|e| context.contains(e.ts))
        .collect();
    if mine.is_empty() {
        return Ok(ExplainerOutput::new(NOT_EXECUTED_TEXT));
    }
    let vars = extract_variables(&mine).map_err(|e| ExplainError::Malformed(e.to_string()))?;
    let outcome = evaluate_model(model, &vars);
    if outcome == HelpOutcome::Success {
        let mut notes = Vec::new();
        if vars.detection_variance > model.thresholds.var_max {
            notes.push(high_variance_text(vars.detection_variance));
        }
        let replans = approach_replans(&mine);
        if replans > 0 {
            notes.push(poor_approach_text(replans));
        }
        if notes.is_empty() {
            notes.push(SUCCESS_TEXT.to_owned());
        }
        return Ok(ExplainerOutput::new(notes.join(" ")));
    }

    let cf = counterfactual(model, &vars, HelpOutcome::Success)
        .map_err(|e| ExplainError::Malformed(e.to_string()))?;
    let template = cf.sentence();
    let request = render(
        HELP,
        &[
            ("counterfactual", &template),
            ("query", &single_line(&query.text)),
        ],
    );
    match reasoner.complete(&request) {
        Ok(resp) => Ok(ExplainerOutput::new(resp.text)),
        Err(_) => Ok(ExplainerOutput {
            text: template,
            degraded: true,
        }),
    }
}

pub struct HelpExplainer {
    model: CausalHelpModel,
}

impl HelpExplainer {
    pub fn new(model: CausalHelpModel) -> Self {
        HelpExplainer { model }
    }
}

impl Default for HelpExplainer {
    fn default() -> Self {
        Self::new(CausalHelpModel::default())
    }
}

impl ComponentExplainer for HelpExplainer {
    fn id(&self) -> &str {
        "ask_human_for_help"
    }

    fn subscriptions(&self) -> &[Source] {
        &[Source::AskHumanForHelp]
    }

    fn summary(&self) -> &str {
        "explains asking people for help: detecting, approaching and asking someone, and their reply"
    }

    fn explain(
        &self,
        query: &Query,
        context: &ContextVector,
        events: &[&Event],
        reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError> {
        explain_help(query, context, events, reasoner, &self.model)
    }
}

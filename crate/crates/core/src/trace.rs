//! Event and trace model plus the line-delimited trace file format.
//!
//! A trace file is one JSON header object followed by one JSON object per
//! event. Reals are always written with six decimals, so a trace whose
//! values are already rounded to six decimals survives a write/read cycle
//! unchanged.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::TraceError;
use crate::model::{SkillStatus, TaskPlan};

/// Robot module (or the `system` pseudo-module) that emitted an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Planner,
    Navigation,
    TextToSpeech,
    AskHumanForHelp,
    PizzaRecommender,
    System,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::Planner,
        Source::Navigation,
        Source::TextToSpeech,
        Source::AskHumanForHelp,
        Source::PizzaRecommender,
        Source::System,
    ];

    /// The five robot modules, excluding `system`.
    pub const MODULES: [Source; 5] = [
        Source::Planner,
        Source::Navigation,
        Source::TextToSpeech,
        Source::AskHumanForHelp,
        Source::PizzaRecommender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Planner => "planner",
            Source::Navigation => "navigation",
            Source::TextToSpeech => "text_to_speech",
            Source::AskHumanForHelp => "ask_human_for_help",
            Source::PizzaRecommender => "pizza_recommender",
            Source::System => "system",
        }
    }

    /// Module responsible for executing a plan skill. Unknown skills are
    /// attributed to the planner that produced them.
    pub fn for_skill(skill: &str) -> Source {
        match skill {
            "navigation" => Source::Navigation,
            "text_to_speech" => Source::TextToSpeech,
            "ask_human_for_help" => Source::AskHumanForHelp,
            "pizza_recommender" => Source::PizzaRecommender,
            _ => Source::Planner,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| format!("unknown source `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Log,
    Plan,
    SkillStatus,
    Param,
    Detection,
    Dialogue,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Log,
        EventKind::Plan,
        EventKind::SkillStatus,
        EventKind::Param,
        EventKind::Detection,
        EventKind::Dialogue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Log => "log",
            EventKind::Plan => "plan",
            EventKind::SkillStatus => "skill_status",
            EventKind::Param => "param",
            EventKind::Detection => "detection",
            EventKind::Dialogue => "dialogue",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// Scalar payload value. Nested data is flattened into dotted keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Num(x) => write!(f, "{x:.6}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

pub type Payload = BTreeMap<String, Value>;

/// Rounds to the six decimals used by the file format.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub ts: f64,
    pub source: Source,
    pub kind: EventKind,
    pub payload: Payload,
}

impl Event {
    pub fn new(ts: f64, source: Source, kind: EventKind) -> Self {
        Event {
            ts,
            source,
            kind,
            payload: Payload::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_owned(), value.into());
        self
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn num_field(&self, key: &str) -> Option<f64> {
        self.payload.get(key).and_then(Value::as_f64)
    }

    pub fn bool_field(&self, key: &str) -> Option<bool> {
        self.payload.get(key).and_then(Value::as_bool)
    }

    /// Log message text, for `log` events.
    pub fn message(&self) -> Option<&str> {
        match self.kind {
            EventKind::Log => self.str_field("message"),
            _ => None,
        }
    }

    /// `(skill, status, error_code)` for well-formed `skill_status` events.
    pub fn skill_status(&self) -> Option<(&str, SkillStatus, Option<&str>)> {
        if self.kind != EventKind::SkillStatus {
            return None;
        }
        let skill = self.str_field("skill")?;
        let status = self.str_field("status")?.parse().ok()?;
        Some((skill, status, self.str_field("error_code")))
    }

    fn write_json(&self, out: &mut String) -> Result<(), TraceError> {
        if !self.ts.is_finite() {
            return Err(TraceError::Invariant(format!("non-finite timestamp {}", self.ts)));
        }
        write!(
            out,
            "{{\"ts\":{:.6},\"source\":{},\"kind\":{},\"payload\":{{",
            self.ts,
            json_str(self.source.as_str()),
            json_str(self.kind.as_str())
        )
        .expect("writing to a String cannot fail");
        for (i, (key, value)) in self.payload.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&json_str(key));
            out.push(':');
            match value {
                Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
                Value::Int(v) => out.push_str(&v.to_string()),
                Value::Num(x) if x.is_finite() => {
                    write!(out, "{x:.6}").expect("writing to a String cannot fail")
                }
                Value::Num(x) => {
                    return Err(TraceError::Invariant(format!(
                        "payload field `{key}` holds non-finite value {x}"
                    )))
                }
                Value::Str(s) => out.push_str(&json_str(s)),
            }
        }
        out.push_str("}}");
        Ok(())
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// A recorded execution: the full event sequence of one task run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario_id: u8,
    pub task_variant: u8,
    pub seed: u64,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn plan_event(&self) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == EventKind::Plan)
    }

    pub fn plan(&self) -> Option<TaskPlan> {
        self.plan_event().and_then(|e| TaskPlan::from_payload(&e.payload).ok())
    }

    pub fn end_ts(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.ts)
    }

    /// Checks every structural invariant of a well-formed trace.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut prev = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !e.ts.is_finite() || e.ts < 0.0 {
                return Err(TraceError::Invariant(format!("event {i} has invalid ts {}", e.ts)));
            }
            if e.ts < prev {
                return Err(TraceError::Invariant(format!(
                    "event {i} at ts {} precedes previous ts {prev}",
                    e.ts
                )));
            }
            prev = e.ts;
            if e.kind == EventKind::SkillStatus && e.skill_status().is_none() {
                return Err(TraceError::Invariant(format!(
                    "event {i} is a malformed skill_status record"
                )));
            }
        }

        let plans: Vec<usize> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EventKind::Plan)
            .map(|(i, _)| i)
            .collect();
        if plans.len() != 1 {
            return Err(TraceError::Invariant(format!(
                "expected exactly one plan event, found {}",
                plans.len()
            )));
        }
        let first_status = self
            .events
            .iter()
            .position(|e| e.kind == EventKind::SkillStatus);
        if first_status.is_some_and(|s| s < plans[0]) {
            return Err(TraceError::Invariant(
                "skill_status event precedes the plan event".into(),
            ));
        }

        let plan = TaskPlan::from_payload(&self.events[plans[0]].payload)?;
        let mut upstream_failed = false;
        for step in &plan.steps {
            let statuses: Vec<SkillStatus> = self
                .events
                .iter()
                .filter_map(Event::skill_status)
                .filter(|(skill, _, _)| *skill == step.skill)
                .map(|(_, status, _)| status)
                .collect();
            if statuses.is_empty() && !upstream_failed {
                return Err(TraceError::Invariant(format!(
                    "plan skill `{}` has no status event",
                    step.skill
                )));
            }
            upstream_failed |= statuses.contains(&SkillStatus::Failed);
        }
        Ok(())
    }

    /// Serializes the trace in the line-delimited file format.
    pub fn to_jsonl(&self) -> Result<String, TraceError> {
        let mut out = format!(
            "{{\"scenario_id\":{},\"task_variant\":{},\"seed\":{}}}\n",
            self.scenario_id, self.task_variant, self.seed
        );
        for e in &self.events {
            e.write_json(&mut out)?;
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses a trace from the line-delimited file format. Line numbers in
    /// errors are 1-based and count the header.
    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        Self::from_lines(text.lines().map(|l| Ok(l.to_owned())))
    }

    fn from_lines<I>(lines: I) -> Result<Trace, TraceError>
    where
        I: Iterator<Item = std::io::Result<String>>,
    {
        let mut header = None;
        let mut events: Vec<Event> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
                TraceError::Parse {
                    line: line_no,
                    message: e.to_string(),
                }
            })?;
            if header.is_none() {
                header = Some(parse_header(&parsed, line_no)?);
                continue;
            }
            let event = parse_event(&parsed, line_no)?;
            if let Some(prev) = events.last() {
                if event.ts < prev.ts {
                    return Err(TraceError::Ordering {
                        line: line_no,
                        ts: event.ts,
                        previous: prev.ts,
                    });
                }
            }
            events.push(event);
        }
        let (scenario_id, task_variant, seed) = header.ok_or(TraceError::MissingHeader)?;
        Ok(Trace {
            scenario_id,
            task_variant,
            seed,
            events,
        })
    }
}

fn parse_header(v: &serde_json::Value, line: usize) -> Result<(u8, u8, u64), TraceError> {
    let err = |message: String| TraceError::Parse { line, message };
    let obj = v
        .as_object()
        .ok_or_else(|| err("header is not an object".into()))?;
    let field = |name: &str| {
        obj.get(name)
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| err(format!("header field `{name}` missing or not an unsigned integer")))
    };
    let scenario_id = u8::try_from(field("scenario_id")?)
        .map_err(|_| err("scenario_id out of range".into()))?;
    let task_variant = u8::try_from(field("task_variant")?)
        .map_err(|_| err("task_variant out of range".into()))?;
    Ok((scenario_id, task_variant, field("seed")?))
}

fn parse_event(v: &serde_json::Value, line: usize) -> Result<Event, TraceError> {
    let err = |message: String| TraceError::Parse { line, message };
    let obj = v
        .as_object()
        .ok_or_else(|| err("event is not an object".into()))?;
    let ts = obj
        .get("ts")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| err("`ts` missing or not a number".into()))?;
    if ts < 0.0 {
        return Err(err(format!("negative timestamp {ts}")));
    }
    let source = obj
        .get("source")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| err("`source` missing or not a string".into()))?
        .parse::<Source>()
        .map_err(err)?;
    let kind = obj
        .get("kind")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| err("`kind` missing or not a string".into()))?
        .parse::<EventKind>()
        .map_err(err)?;
    let raw = obj
        .get("payload")
        .and_then(serde_json::Value::as_object)
        .ok_or_else(|| err("`payload` missing or not an object".into()))?;
    let mut payload = Payload::new();
    for (key, value) in raw {
        let value = match value {
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::String(s) => Value::Str(s.clone()),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Num(
                    n.as_f64()
                        .ok_or_else(|| err(format!("payload field `{key}` is not representable")))?,
                ),
            },
            _ => return Err(err(format!("payload field `{key}` is not a scalar"))),
        };
        payload.insert(key.clone(), value);
    }
    Ok(Event {
        ts,
        source,
        kind,
        payload,
    })
}

/// Reads a trace file, rejecting malformed lines and out-of-order timestamps.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let file = fs::File::open(path)?;
    Trace::from_lines(BufReader::new(file).lines())
}

/// Writes a trace file. Equal traces always produce identical bytes.
pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    fs::write(path, trace.to_jsonl()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlanStep;

    fn plan_event(ts: f64, skills: &[&str]) -> Event {
        let plan = TaskPlan {
            instruction: "Go to the kitchen".into(),
            steps: skills
                .iter()
                .map(|s| PlanStep::new(s, &[("location", "kitchen")]))
                .collect(),
            valid: true,
            grounding_errors: vec![],
        };
        let mut e = Event::new(ts, Source::Planner, EventKind::Plan);
        e.payload = plan.to_payload();
        e
    }

    fn status(ts: f64, skill: &str, status: &str) -> Event {
        Event::new(ts, Source::for_skill(skill), EventKind::SkillStatus)
            .with("skill", skill)
            .with("status", status)
    }

    fn minimal() -> Trace {
        Trace {
            scenario_id: 5,
            task_variant: 1,
            seed: 3,
            events: vec![
                plan_event(0.0, &["navigation"]),
                status(0.5, "navigation", "running"),
                status(2.25, "navigation", "succeeded"),
            ],
        }
    }

    #[test]
    fn minimal_file_reads_three_events() {
        let text = minimal().to_jsonl().unwrap();
        let trace = Trace::from_jsonl(&text).unwrap();
        assert_eq!(trace.events.len(), 3);
        assert_eq!(trace, minimal());
        trace.validate().unwrap();
    }

    #[test]
    fn out_of_order_timestamp_names_line() {
        let text = "{\"scenario_id\":1,\"task_variant\":1,\"seed\":0}\n\
            {\"ts\":0.0,\"source\":\"system\",\"kind\":\"log\",\"payload\":{}}\n\
            {\"ts\":2.0,\"source\":\"system\",\"kind\":\"log\",\"payload\":{}}\n\
            {\"ts\":1.0,\"source\":\"system\",\"kind\":\"log\",\"payload\":{}}\n";
        match Trace::from_jsonl(text) {
            Err(TraceError::Ordering { line, ts, previous }) => {
                // third event, fourth physical line
                assert_eq!(line, 4);
                assert_eq!((ts, previous), (1.0, 2.0));
            }
            other => panic!("expected ordering error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\"scenario_id\":1,\"task_variant\":1,\"seed\":0}\nnot json\n";
        assert!(matches!(
            Trace::from_jsonl(text),
            Err(TraceError::Parse { line: 2, .. })
        ));
        let bad_source = "{\"scenario_id\":1,\"task_variant\":1,\"seed\":0}\n\
            {\"ts\":0.0,\"source\":\"arm\",\"kind\":\"log\",\"payload\":{}}\n";
        assert!(matches!(
            Trace::from_jsonl(bad_source),
            Err(TraceError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_trace_is_header_only() {
        let t = Trace {
            scenario_id: 2,
            task_variant: 3,
            seed: 9,
            events: vec![],
        };
        let text = t.to_jsonl().unwrap();
        assert_eq!(text, "{\"scenario_id\":2,\"task_variant\":3,\"seed\":9}\n");
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        write_trace(&minimal(), &a).unwrap();
        write_trace(&minimal(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(read_trace(&a).unwrap(), minimal());
    }

    #[test]
    fn reals_use_six_decimals() {
        let e = Event::new(1.5, Source::Navigation, EventKind::Param).with("max_speed", 0.5);
        let mut s = String::new();
        e.write_json(&mut s).unwrap();
        assert_eq!(
            s,
            "{\"ts\":1.500000,\"source\":\"navigation\",\"kind\":\"param\",\"payload\":{\"max_speed\":0.500000}}"
        );
    }

    #[test]
    fn validate_rejects_status_before_plan() {
        let mut t = minimal();
        t.events.swap(0, 1);
        t.events[0].ts = 0.0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn validate_allows_missing_status_after_failure() {
        let t = Trace {
            scenario_id: 7,
            task_variant: 1,
            seed: 0,
            events: vec![
                plan_event(0.0, &["navigation", "text_to_speech"]),
                status(1.0, "navigation", "failed"),
            ],
        };
        t.validate().unwrap();
        let t = Trace {
            events: vec![plan_event(0.0, &["navigation", "text_to_speech"])],
            ..t
        };
        assert!(t.validate().is_err());
    }
}

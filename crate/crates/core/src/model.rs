//! Shared domain types: plans, queries, context vectors, explanations and
//! ground-truth labels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::TraceError;
use crate::trace::{Payload, Source, Value};

/// Skills the robot can execute. Anything else in a plan is a grounding error.
pub const KNOWN_SKILLS: [&str; 5] = [
    "navigation",
    "text_to_speech",
    "ask_human_for_help",
    "pizza_recommender",
    "explain",
];

/// Locations the navigation skill can be sent to.
pub const KNOWN_LOCATIONS: [&str; 6] = [
    "kitchen",
    "living_room",
    "bedroom",
    "bathroom",
    "entrance",
    "office",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkillStatus {
    Waiting,
    Running,
    Succeeded,
    Failed,
}

impl SkillStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillStatus::Waiting => "waiting",
            SkillStatus::Running => "running",
            SkillStatus::Succeeded => "succeeded",
            SkillStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for SkillStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "waiting" => Ok(SkillStatus::Waiting),
            "running" => Ok(SkillStatus::Running),
            "succeeded" => Ok(SkillStatus::Succeeded),
            "failed" => Ok(SkillStatus::Failed),
            other => Err(format!("unknown skill status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub skill: String,
    pub params: BTreeMap<String, String>,
}

impl PlanStep {
    pub fn new(skill: &str, params: &[(&str, &str)]) -> Self {
        PlanStep {
            skill: skill.to_owned(),
            params: params
                .iter()
                .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                .collect(),
        }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.skill)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// A user instruction grounded (or not) into a skill sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPlan {
    pub instruction: String,
    pub steps: Vec<PlanStep>,
    pub valid: bool,
    pub grounding_errors: Vec<String>,
}

impl TaskPlan {
    /// Flattens the plan into a payload with dotted keys
    /// (`steps.0.skill`, `steps.0.params.location`, `grounding_errors.0`).
    pub fn to_payload(&self) -> Payload {
        let mut p = Payload::new();
        p.insert("instruction".into(), Value::Str(self.instruction.clone()));
        p.insert("valid".into(), Value::Bool(self.valid));
        p.insert("steps.count".into(), Value::Int(self.steps.len() as i64));
        for (i, step) in self.steps.iter().enumerate() {
            p.insert(format!("steps.{i}.skill"), Value::Str(step.skill.clone()));
            for (k, v) in &step.params {
                p.insert(format!("steps.{i}.params.{k}"), Value::Str(v.clone()));
            }
        }
        for (i, err) in self.grounding_errors.iter().enumerate() {
            p.insert(format!("grounding_errors.{i}"), Value::Str(err.clone()));
        }
        p
    }

    pub fn from_payload(p: &Payload) -> Result<TaskPlan, TraceError> {
        let bad = |m: &str| TraceError::Invariant(format!("malformed plan payload: {m}"));
        let instruction = p
            .get("instruction")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing instruction"))?
            .to_owned();
        let valid = p
            .get("valid")
            .and_then(Value::as_bool)
            .ok_or_else(|| bad("missing valid flag"))?;
        let count = p
            .get("steps.count")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing steps.count"))? as usize;

        let mut steps = Vec::with_capacity(count);
        for i in 0..count {
            let skill = p
                .get(&format!("steps.{i}.skill"))
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing step skill"))?
                .to_owned();
            let prefix = format!("steps.{i}.params.");
            let params = p
                .iter()
                .filter_map(|(k, v)| {
                    k.strip_prefix(&prefix)
                        .map(|name| (name.to_owned(), v.to_string()))
                })
                .collect();
            steps.push(PlanStep { skill, params });
        }

        let mut grounding_errors = Vec::new();
        while let Some(err) = p
            .get(&format!("grounding_errors.{}", grounding_errors.len()))
            .and_then(Value::as_str)
        {
            grounding_errors.push(err.to_owned());
        }
        if valid == !grounding_errors.is_empty() {
            return Err(bad("valid flag disagrees with grounding errors"));
        }
        Ok(TaskPlan {
            instruction,
            steps,
            valid,
            grounding_errors,
        })
    }
}

/// An explanation-seeking question from the user.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub text: String,
    pub asked_at: f64,
}

impl Query {
    pub fn new(text: impl Into<String>, asked_at: f64) -> Query {
        Query {
            text: text.into(),
            asked_at,
        }
    }
}

/// What the selector hands to a component explainer alongside the query.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub task: String,
    pub skills: Vec<(String, SkillStatus)>,
    pub plan_valid: bool,
    pub window: (f64, f64),
}

impl ContextVector {
    pub fn contains(&self, ts: f64) -> bool {
        ts >= self.window.0 && ts <= self.window.1
    }

    pub fn first_failed_skill(&self) -> Option<&str> {
        self.skills
            .iter()
            .find(|(_, s)| *s == SkillStatus::Failed)
            .map(|(k, _)| k.as_str())
    }
}

/// A natural-language explanation with provenance and cost accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub text: String,
    /// Explainer ids, or a baseline id, that produced the text.
    pub produced_by: Vec<String>,
    pub reasoner_calls: usize,
    /// Seconds, including any simulated reasoner latency.
    pub wall_time: f64,
    /// Set when a fallback text was returned because the reasoner failed.
    pub degraded: bool,
}

impl Explanation {
    pub fn produced_by_label(&self) -> String {
        self.produced_by.join("+")
    }
}

/// Scenario categories of the evaluation dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    AgentError,
    Inability,
    UnforeseenCircumstances,
    SubOptimalBehaviour,
    Uncertainty,
    SocialNormViolation,
    NormalSuccessful,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::AgentError => "Agent Error",
            Category::Inability => "Inability",
            Category::UnforeseenCircumstances => "Unforeseen Circumstances",
            Category::SubOptimalBehaviour => "Sub-Optimal Behaviour",
            Category::Uncertainty => "Uncertainty",
            Category::SocialNormViolation => "Social Norm Violation",
            Category::NormalSuccessful => "Normal/Successful",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label attached to every scenario: what actually went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub scenario_id: u8,
    pub root_cause: String,
    pub relevant_module: Source,
    pub category: Category,
    /// Phrase an explanation must contain to count as naming the root cause.
    pub key_phrase: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_payload_round_trip() {
        let plan = TaskPlan {
            instruction: "Bring me a coffee".into(),
            steps: vec![
                PlanStep::new("navigation", &[("location", "kitchen")]),
                PlanStep::new("grasp_object", &[("object", "coffee")]),
            ],
            valid: false,
            grounding_errors: vec!["unknown skill 'grasp_object'".into()],
        };
        assert_eq!(TaskPlan::from_payload(&plan.to_payload()).unwrap(), plan);
    }

    #[test]
    fn valid_flag_must_match_errors() {
        let plan = TaskPlan {
            instruction: "x".into(),
            steps: vec![],
            valid: true,
            grounding_errors: vec!["oops".into()],
        };
        assert!(TaskPlan::from_payload(&plan.to_payload()).is_err());
    }

    #[test]
    fn step_display() {
        let s = PlanStep::new("navigation", &[("location", "kitchen")]);
        assert_eq!(s.to_string(), "navigation(location=kitchen)");
    }
}

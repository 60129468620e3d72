//! The twenty evaluation scenarios, their trace generator and the help
//! skill replay used as a counterfactual oracle.

mod fsm;
mod sim;

pub use fsm::replay_fsm;
pub use sim::generate_trace;

use std::fmt::Write as _;

use crate::error::ScenarioError;
use crate::model::{Category, GroundTruth, Query};
use crate::trace::{Source, Trace};

pub const SCENARIO_COUNT: u8 = 20;
pub const VARIANTS: u8 = 3;
pub const QUERIES: u8 = 3;

/// Static description of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario_id: u8,
    pub category: Category,
    pub relevant_module: Source,
    pub description: &'static str,
    pub task_instructions: [&'static str; 3],
    /// Generic, task-contextual and problem-specific question, in that order.
    pub queries: [&'static str; 3],
    pub ground_truth: GroundTruth,
    /// Substring of the serialized trace that reveals the injected cause.
    pub evidence: &'static str,
}

struct Row {
    category: Category,
    module: Source,
    description: &'static str,
    instructions: [&'static str; 3],
    queries: [&'static str; 3],
    root_cause: &'static str,
    key_phrase: &'static str,
    evidence: &'static str,
}

const FETCH: [&str; 3] = [
    "Bring me a coffee from the kitchen",
    "Bring me my glasses from the bedroom",
    "Bring me the newspaper from the entrance",
];

const FAVOUR: [&str; 3] = [
    "Ask someone to open the window in the bedroom",
    "Ask someone to close the door at the entrance",
    "Ask someone to turn on the light in the office",
];

const ROWS: [Row; 20] = [
    Row {
        category: Category::AgentError,
        module: Source::Planner,
        description: "The planner's plan contains a skill the robot does not have",
        instructions: FETCH,
        queries: ["What happened?", "Why didn't you bring it?", "Why didn't you even start?"],
        root_cause: "The plan contains an invalid skill.",
        key_phrase: "invalid skill",
        evidence: "unknown skill",
    },
    Row {
        category: Category::AgentError,
        module: Source::Planner,
        description: "The planner's plan gives a skill parameter names or values it does not accept",
        instructions: [
            "Go to the kitchen and check the oven",
            "Go to the bathroom and check the tap",
            "Go to the office and check the window",
        ],
        queries: [
            "What happened?",
            "Why didn't you go and check?",
            "Why are you not doing anything?",
        ],
        root_cause: "The plan gives the navigation skill an invalid parameter name or value.",
        key_phrase: "invalid parameter",
        evidence: "invalid ",
    },
    Row {
        category: Category::AgentError,
        module: Source::Planner,
        description: "The planner's plan is valid but leaves out part of what the user asked for",
        instructions: [
            "Bring the book from the bedroom to the living room",
            "Bring the keys from the entrance to the living room",
            "Bring the mug from the kitchen to the living room",
        ],
        queries: [
            "What happened?",
            "Why didn't you bring it to me?",
            "Why did your plan skip a step?",
        ],
        root_cause: "The plan is missing the final navigation step to the living room.",
        key_phrase: "missing a step",
        evidence: "to the living room",
    },
    Row {
        category: Category::Inability,
        module: Source::Planner,
        description: "The user asks for a task that none of the robot's skills can carry out",
        instructions: [
            "Water the plants in the living room",
            "Cook dinner in the kitchen",
            "Vacuum the floor in the bedroom",
        ],
        queries: [
            "What happened?",
            "Why didn't you do the chore?",
            "Why can't you do that?",
        ],
        root_cause: "No available skill can perform the task, so the robot is unable to complete it.",
        key_phrase: "unable to complete",
        evidence: "no available skill can perform",
    },
    Row {
        category: Category::UnforeseenCircumstances,
        module: Source::Navigation,
        description: "Static obstacles prevent the robot from reaching the goal location",
        instructions: ["Go to the kitchen", "Go to the bedroom", "Go to the office"],
        queries: [
            "What happened?",
            "Why didn't you get there?",
            "Why did you give up?",
        ],
        root_cause: "Static obstacles block every path to the destination.",
        key_phrase: "static obstacles",
        evidence: "blocked by static obstacle",
    },
    Row {
        category: Category::Inability,
        module: Source::Navigation,
        description: "The joystick controller is enabled and takes over from autonomous navigation",
        instructions: ["Go to the entrance", "Go to the bathroom", "Go to the kitchen"],
        queries: [
            "What happened?",
            "Why didn't you go there?",
            "Why aren't you moving?",
        ],
        root_cause: "The joystick controller is enabled and overrides autonomous navigation.",
        key_phrase: "joystick",
        evidence: "joystick input",
    },
    Row {
        category: Category::Inability,
        module: Source::Navigation,
        description: "The robot is docked on its charger, which disables autonomous navigation",
        instructions: FETCH,
        queries: ["What happened?", "Why didn't you bring it?", "Why didn't you leave?"],
        root_cause: "The robot is plugged into its charger, and navigation is disabled while charging.",
        key_phrase: "charging",
        evidence: "charger",
    },
    Row {
        category: Category::SubOptimalBehaviour,
        module: Source::Navigation,
        description: "Poor localisation in the map makes navigation slow and erratic",
        instructions: ["Go to the office", "Go to the kitchen", "Go to the bathroom"],
        queries: [
            "What happened on your way?",
            "Why did it take you so long to get there?",
            "Why were you moving so erratically?",
        ],
        root_cause: "The robot is badly localised in its map.",
        key_phrase: "badly localised",
        evidence: "Localization covariance high",
    },
    Row {
        category: Category::SubOptimalBehaviour,
        module: Source::Navigation,
        description: "People crossing the route make the robot replan its path several times",
        instructions: ["Go to the living room", "Go to the entrance", "Go to the bedroom"],
        queries: [
            "What happened on the way?",
            "Why did it take so long?",
            "Why did you keep changing your path?",
        ],
        root_cause: "Moving obstacles force the robot to replan its path.",
        key_phrase: "moving obstacles",
        evidence: "moving obstacle",
    },
    Row {
        category: Category::NormalSuccessful,
        module: Source::Navigation,
        description: "Navigation runs without errors and the user asks about how the robot moves",
        instructions: ["Go to the kitchen", "Go to the living room", "Go to the office"],
        queries: [
            "How did the trip go?",
            "Why are you so slow?",
            "Why don't you move faster?",
        ],
        root_cause: "Nothing failed; the robot's speed is bounded by its configured speed limit.",
        key_phrase: "speed limit",
        evidence: "Speed limit set to",
    },
    Row {
        category: Category::UnforeseenCircumstances,
        module: Source::AskHumanForHelp,
        description: "Nobody who could help the robot is detected",
        instructions: FETCH,
        queries: [
            "What happened?",
            "Why didn't you bring it?",
            "Why didn't you ask anyone for help?",
        ],
        root_cause: "No person was detected.",
        key_phrase: "no person was detected",
        evidence: "no_human_found",
    },
    Row {
        category: Category::Inability,
        module: Source::AskHumanForHelp,
        description: "A person is detected, but beyond the distance at which the robot asks for help",
        instructions: FAVOUR,
        queries: [
            "What happened?",
            "Why is it still not done?",
            "Why didn't you talk to the person you saw?",
        ],
        root_cause: "The detected person is too far away to ask for help.",
        key_phrase: "too far away",
        evidence: "human_too_far",
    },
    Row {
        category: Category::Uncertainty,
        module: Source::AskHumanForHelp,
        description: "A person is detected only briefly, too short for a stable detection",
        instructions: FETCH,
        queries: [
            "What happened?",
            "Why didn't you bring it?",
            "Why did you ignore the person in the room?",
        ],
        root_cause: "The person was detected, but not long enough for a stable detection.",
        key_phrase: "not long enough",
        evidence: "unstable_detection",
    },
    Row {
        category: Category::UnforeseenCircumstances,
        module: Source::AskHumanForHelp,
        description: "A person is detected, but obstacles block the way to them",
        instructions: FAVOUR,
        queries: [
            "What happened?",
            "Why is it still not done?",
            "Why didn't you go up to that person?",
        ],
        root_cause: "Obstacles blocked the robot's approach path to the person.",
        key_phrase: "blocked my approach",
        evidence: "approach_failed",
    },
    Row {
        category: Category::UnforeseenCircumstances,
        module: Source::AskHumanForHelp,
        description: "The robot asks a person for help and the person declines",
        instructions: FETCH,
        queries: [
            "What happened?",
            "Why didn't you bring it?",
            "Why did you give up after asking for help?",
        ],
        root_cause: "The person refused to help.",
        key_phrase: "refused",
        evidence: "help_refused",
    },
    Row {
        category: Category::UnforeseenCircumstances,
        module: Source::AskHumanForHelp,
        description: "A person agrees to help, but never confirms that they have helped",
        instructions: FAVOUR,
        queries: [
            "What happened?",
            "Why is it still not done?",
            "Why are you still waiting?",
        ],
        root_cause: "The person did not confirm completion of their assistance.",
        key_phrase: "did not confirm",
        evidence: "no_confirmation",
    },
    Row {
        category: Category::SocialNormViolation,
        module: Source::AskHumanForHelp,
        description: "The robot approaches the person awkwardly because its approach path keeps being replanned",
        instructions: FETCH,
        queries: [
            "What happened with that person?",
            "Why did it take so long to get help?",
            "Why did you approach me so awkwardly?",
        ],
        root_cause: "Suboptimal navigation made the robot replan its approach repeatedly.",
        key_phrase: "suboptimal navigation",
        evidence: "Replanning approach path",
    },
    Row {
        category: Category::SocialNormViolation,
        module: Source::AskHumanForHelp,
        description: "The robot approaches the person hesitantly because the person's detected position is noisy",
        instructions: FAVOUR,
        queries: [
            "What happened with the person you asked?",
            "Why did you approach so hesitantly?",
            "Why did you zigzag towards that person?",
        ],
        root_cause: "High variance in the person's detection made the approach poor.",
        key_phrase: "high variance",
        evidence: "position variance",
    },
    Row {
        category: Category::AgentError,
        module: Source::TextToSpeech,
        description: "The text-to-speech skill times out before its utterance is complete",
        instructions: [
            "Tell me the weather forecast for the week",
            "Read me today's news headlines",
            "Tell me the recipe for lasagne",
        ],
        queries: [
            "What happened?",
            "Why didn't you finish telling me?",
            "Why did you stop talking mid-sentence?",
        ],
        root_cause: "The text-to-speech skill timed out before the utterance was complete.",
        key_phrase: "timed out",
        evidence: "timeout",
    },
    Row {
        category: Category::NormalSuccessful,
        module: Source::PizzaRecommender,
        description: "The robot recommends a pizza and justifies the choice with the available ingredients",
        instructions: [
            "Recommend a pizza for dinner",
            "Which pizza should I make tonight?",
            "Suggest a pizza with what we have at home",
        ],
        queries: [
            "What happened with the pizza?",
            "Why did you recommend that for dinner?",
            "Why did you pick that pizza?",
        ],
        root_cause: "The pizza was chosen mainly because of the ingredients that were available.",
        key_phrase: "mainly because",
        evidence: "recommendation",
    },
];

fn spec_from(id: u8, row: &Row) -> ScenarioSpec {
    ScenarioSpec {
        scenario_id: id,
        category: row.category,
        relevant_module: row.module,
        description: row.description,
        task_instructions: row.instructions,
        queries: row.queries,
        ground_truth: GroundTruth {
            scenario_id: id,
            root_cause: row.root_cause.to_owned(),
            relevant_module: row.module,
            category: row.category,
            key_phrase: row.key_phrase.to_owned(),
        },
        evidence: row.evidence,
    }
}

pub fn list_scenarios() -> Vec<ScenarioSpec> {
    ROWS.iter()
        .enumerate()
        .map(|(i, row)| spec_from(i as u8 + 1, row))
        .collect()
}

pub fn scenario(id: u32) -> Result<ScenarioSpec, ScenarioError> {
    if !(1..=SCENARIO_COUNT as u32).contains(&id) {
        return Err(ScenarioError::ScenarioOutOfRange(id));
    }
    Ok(spec_from(id as u8, &ROWS[id as usize - 1]))
}

/// Statements that would be false for scenario `id`: the key phrases of
/// every other scenario in which something went wrong.
pub fn contradicted_claims(id: u8) -> Vec<String> {
    list_scenarios()
        .into_iter()
        .filter(|s| s.scenario_id != id && s.category != Category::NormalSuccessful)
        .map(|s| s.ground_truth.key_phrase)
        .collect()
}

/// Whether `text` names the scenario's root cause (case-insensitive).
pub fn names_root_cause(spec: &ScenarioSpec, text: &str) -> bool {
    text.to_lowercase().contains(&spec.ground_truth.key_phrase.to_lowercase())
}

/// Contradicted claims that `text` makes (case-insensitive).
pub fn false_claims(id: u8, text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    contradicted_claims(id)
        .into_iter()
        .filter(|c| lower.contains(&c.to_lowercase()))
        .collect()
}

/// The query asked at a grid point: one second after the trace ends.
pub fn grid_query(spec: &ScenarioSpec, query_index: u8, trace: &Trace) -> Result<Query, ScenarioError> {
    if !(1..=QUERIES).contains(&query_index) {
        return Err(ScenarioError::QueryOutOfRange(query_index as u32));
    }
    Ok(Query::new(
        spec.queries[query_index as usize - 1],
        trace.end_ts() + 1.0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ManifestEntry {
    pub scenario_id: u8,
    pub task_variant: u8,
    pub query_index: u8,
}

impl ManifestEntry {
    pub fn new(scenario_id: u8, task_variant: u8, query_index: u8) -> Result<Self, ScenarioError> {
        if !(1..=SCENARIO_COUNT).contains(&scenario_id) {
            return Err(ScenarioError::ScenarioOutOfRange(scenario_id as u32));
        }
        if !(1..=VARIANTS).contains(&task_variant) {
            return Err(ScenarioError::VariantOutOfRange(task_variant as u32));
        }
        if !(1..=QUERIES).contains(&query_index) {
            return Err(ScenarioError::QueryOutOfRange(query_index as u32));
        }
        Ok(ManifestEntry {
            scenario_id,
            task_variant,
            query_index,
        })
    }
}

/// All 180 grid points in scenario, variant, query order.
pub fn full_manifest() -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    for s in 1..=SCENARIO_COUNT {
        for v in 1..=VARIANTS {
            for q in 1..=QUERIES {
                out.push(ManifestEntry {
                    scenario_id: s,
                    task_variant: v,
                    query_index: q,
                });
            }
        }
    }
    out
}

pub const MANIFEST_HEADER: &str = "scenario_id,task_variant,query_index";

pub fn manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        writeln!(out, "{},{},{}", e.scenario_id, e.task_variant, e.query_index)
            .expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, ScenarioError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ScenarioError::Manifest(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != MANIFEST_HEADER {
        return Err(ScenarioError::Manifest(format!(
            "expected header `{MANIFEST_HEADER}`"
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ScenarioError::Manifest(format!("line {line}: {e}")))?;
        let field = |k: usize| -> Result<u8, ScenarioError> {
            record[k]
                .trim()
                .parse()
                .map_err(|_| ScenarioError::Manifest(format!("line {line}: `{}` is not a number", &record[k])))
        };
        out.push(ManifestEntry::new(field(0)?, field(1)?, field(2)?)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_unique_scenarios_with_module_layout() {
        let all = list_scenarios();
        assert_eq!(all.len(), 20);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.scenario_id as usize, i + 1);
            let expected = match s.scenario_id {
                1..=4 => Source::Planner,
                5..=10 => Source::Navigation,
                11..=18 => Source::AskHumanForHelp,
                19 => Source::TextToSpeech,
                _ => Source::PizzaRecommender,
            };
            assert_eq!(s.relevant_module, expected);
            assert_eq!(s.ground_truth.relevant_module, expected);
        }
        assert_eq!(
            all.iter()
                .filter(|s| s.relevant_module == Source::AskHumanForHelp)
                .count(),
            8
        );
    }

    #[test]
    fn table_rows_quoted_by_examples() {
        let s5 = scenario(5).unwrap();
        assert!(s5.description.contains("Static obstacles prevent the robot"));
        let s19 = scenario(19).unwrap();
        assert_eq!(s19.relevant_module, Source::TextToSpeech);
        assert!(s19.description.contains("times out before its utterance is complete"));
        assert_eq!(scenario(21), Err(ScenarioError::ScenarioOutOfRange(21)));
        assert_eq!(scenario(0), Err(ScenarioError::ScenarioOutOfRange(0)));
    }

    #[test]
    fn generic_queries_come_first() {
        for s in list_scenarios() {
            assert!(s.queries[0].starts_with("What happened") || s.queries[0].starts_with("How did"));
        }
    }

    #[test]
    fn own_key_phrase_is_never_contradicted() {
        for s in list_scenarios() {
            assert!(!contradicted_claims(s.scenario_id).contains(&s.ground_truth.key_phrase));
            assert!(!names_root_cause(&s, ""));
        }
        assert_eq!(contradicted_claims(10).len(), 18);
    }

    #[test]
    fn manifest_round_trip_and_errors() {
        let m = full_manifest();
        assert_eq!(m.len(), 180);
        assert_eq!(parse_manifest(&manifest_csv(&m)).unwrap(), m);
        assert!(matches!(parse_manifest("a,b,c\n1,1,1\n"), Err(ScenarioError::Manifest(_))));
        assert_eq!(
            parse_manifest("scenario_id,task_variant,query_index\n21,1,1\n"),
            Err(ScenarioError::ScenarioOutOfRange(21))
        );
        assert!(matches!(
            parse_manifest("scenario_id,task_variant,query_index\n1,x,1\n"),
            Err(ScenarioError::Manifest(_))
        ));
    }
}

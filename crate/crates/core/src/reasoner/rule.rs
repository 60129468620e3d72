//! Deterministic stand-in for a temperature-0 language model.
//!
//! The reasoner reads the `Role:` line of the system prompt and the `##`
//! sections of the user prompt, matches them against a fixed catalogue of
//! situations and answers with the catalogue sentence. It never guesses:
//! a prompt no rule covers is an error.

use std::collections::BTreeMap;
use std::sync::LazyLock;
use std::time::Instant;

use regex::Regex;

use crate::error::ReasonerError;
use crate::prompts::{role, section};

use super::{ReasonerRequest, ReasonerResponse, TextReasoner};

const SELECTOR_KEYWORDS: &str = include_str!("../../data/selector_keywords.txt");

/// Localisation covariance above which navigation counts as badly localised.
pub const COVARIANCE_LIMIT: f64 = 0.5;

static UNKNOWN_SKILL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"unknown skill '([^']+)'").unwrap());
static INVALID_PARAM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"invalid parameter '([^']+)' for skill '([^']+)'").unwrap());
static INVALID_VALUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"invalid value '([^']+)' for parameter '([^']+)' of skill '([^']+)'").unwrap()
});
static NO_SKILL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"no available skill can perform '([^']+)'").unwrap());
static NAV_STEP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"navigation\([^)]*location=(\w+)").unwrap());
static NAV_GOAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Received new navigation goal to (\w+)").unwrap());
static REPEAT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(×(\d+)\)\s*$").unwrap());
static COUNTERFACTUAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\w+) occurred because (\w+) = (.+?)\. If (\w+) = (.+?), (\w+) would have occurred instead\.",
    )
    .unwrap()
});
static FAILED_STATUS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^- (\w+): failed").unwrap());
static RECOMMENDATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"recommendation=(\w+)").unwrap());

#[derive(Debug, Clone)]
pub struct RuleReasoner {
    routes: Vec<(String, Vec<String>)>,
}

impl Default for RuleReasoner {
    fn default() -> Self {
        Self::new()
    }
}

impl RuleReasoner {
    pub fn new() -> Self {
        let routes = SELECTOR_KEYWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let (id, words) = l.split_once(':')?;
                Some((
                    id.trim().to_owned(),
                    words.split_whitespace().map(str::to_owned).collect(),
                ))
            })
            .collect();
        RuleReasoner { routes }
    }

    /// Explainer id the keyword table assigns to `query`, if any line matches.
    pub fn route(&self, query: &str, allowed: &[&str]) -> Option<&str> {
        let words = words(query);
        self.routes
            .iter()
            .filter(|(id, _)| allowed.contains(&id.as_str()))
            .find(|(_, keys)| keys.iter().any(|k| words.contains(k)))
            .map(|(id, _)| id.as_str())
    }

    fn answer(&self, req: &ReasonerRequest) -> Result<String, ReasonerError> {
        let user = req.user_prompt.as_str();
        match role(&req.system_prompt) {
            Some("selector") => self.classify(user),
            Some("planner-explainer") => Ok(planner_answer(&PlanView::parse(user))),
            Some("navigation-explainer") => {
                let logs = lines(section(user, "Navigation logs"));
                let params = params(section(user, "Navigation parameters"));
                navigation_answer(&logs, &params)
                    .ok_or_else(|| no_match("navigation evidence matches no known situation"))
            }
            Some("help-explainer") => help_answer(section(user, "Counterfactual").unwrap_or("")),
            Some("aggregator") => aggregate_answer(section(user, "Explanations").unwrap_or("")),
            Some("end-to-end") => Ok(end_to_end_answer(user)),
            Some(other) => Err(no_match(&format!("unknown role `{other}`"))),
            None => Err(no_match("system prompt declares no role")),
        }
    }

    fn classify(&self, user: &str) -> Result<String, ReasonerError> {
        let listed: Vec<&str> = lines(section(user, "Explainers"))
            .into_iter()
            .filter_map(|l| l.strip_prefix("- ")?.split(':').next())
            .map(str::trim)
            .collect();
        let query = section(user, "Query").ok_or_else(|| no_match("no query section"))?;
        if let Some(id) = self.route(query, &listed) {
            return Ok(id.to_owned());
        }
        if listed.contains(&"planner") {
            Ok("planner".into())
        } else {
            Err(no_match("no keyword matches the query and no planner fallback"))
        }
    }
}

impl TextReasoner for RuleReasoner {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        if request.system_prompt.trim().is_empty() && request.user_prompt.trim().is_empty() {
            return Err(ReasonerError::EmptyPrompt);
        }
        let start = Instant::now();
        let text = self.answer(request)?;
        Ok(ReasonerResponse {
            token_count: text.split_whitespace().count(),
            text,
            latency: start.elapsed().as_secs_f64(),
        })
    }
}

fn no_match(what: &str) -> ReasonerError {
    ReasonerError::NoMatch(what.to_owned())
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

fn lines(body: Option<&str>) -> Vec<&str> {
    body.unwrap_or("")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != "none")
        .collect()
}

/// `- key = value` lines into a map.
fn params(body: Option<&str>) -> BTreeMap<String, String> {
    lines(body)
        .into_iter()
        .filter_map(|l| {
            let (k, v) = l.strip_prefix("- ")?.split_once(" = ")?;
            Some((k.trim().to_owned(), v.trim().to_owned()))
        })
        .collect()
}

fn spaced(location: &str) -> String {
    location.replace('_', " ")
}

struct PlanView<'a> {
    instruction: &'a str,
    plan: &'a str,
    errors: Vec<&'a str>,
    statuses: &'a str,
}

impl<'a> PlanView<'a> {
    fn parse(user: &'a str) -> Self {
        PlanView {
            instruction: section(user, "Instruction").unwrap_or(""),
            plan: section(user, "Plan").unwrap_or(""),
            errors: lines(section(user, "Grounding errors")),
            statuses: section(user, "Skill statuses").unwrap_or(""),
        }
    }

    fn grounding_answer(&self) -> Option<String> {
        let errors = self.errors.join("\n");
        if let Some(c) = UNKNOWN_SKILL.captures(&errors) {
            return Some(format!(
                "I could not carry out your request because my plan used '{}', which is an invalid skill that I do not have.",
                &c[1]
            ));
        }
        if let Some(c) = INVALID_PARAM.captures(&errors) {
            return Some(format!(
                "I could not carry out your request because my plan gave the '{}' skill an invalid parameter: '{}'.",
                &c[2], &c[1]
            ));
        }
        if let Some(c) = INVALID_VALUE.captures(&errors) {
            return Some(format!(
                "I could not carry out your request because my plan gave the '{}' skill an invalid parameter value: {} = '{}'.",
                &c[3], &c[2], &c[1]
            ));
        }
        if let Some(c) = NO_SKILL.captures(&errors) {
            return Some(format!(
                "I am unable to complete this task because none of my skills can {}.",
                &c[1]
            ));
        }
        self.errors.first().map(|e| {
            format!(
                "I could not carry out your request because my plan could not be grounded: {}.",
                e.trim_start_matches("- ")
            )
        })
    }

    /// A location the instruction names that no navigation step visits.
    fn missing_destination(&self) -> Option<String> {
        let instruction = self.instruction.to_ascii_lowercase();
        let visited: Vec<&str> = NAV_STEP
            .captures_iter(self.plan)
            .map(|c| c.get(1).unwrap().as_str())
            .collect();
        crate::model::KNOWN_LOCATIONS
            .iter()
            .filter(|loc| instruction.contains(&spaced(loc)))
            .find(|loc| !visited.contains(loc))
            .map(|loc| spaced(loc))
    }

    fn failed_skill(&self) -> Option<&'a str> {
        FAILED_STATUS
            .captures(self.statuses)
            .map(|c| c.get(1).unwrap().as_str())
    }
}

fn planner_answer(view: &PlanView<'_>) -> String {
    if let Some(answer) = view.grounding_answer() {
        return answer;
    }
    if let Some(loc) = view.missing_destination() {
        return format!(
            "My plan did not fulfil your request because it was missing a step: navigating to the {loc}."
        );
    }
    if let Some(skill) = view.failed_skill() {
        return format!(
            "My plan was valid; the problem occurred while executing the '{skill}' skill."
        );
    }
    "My plan was valid and every skill in it completed successfully.".into()
}

fn repeat_count(line: &str) -> usize {
    REPEAT
        .captures(line)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(1)
}

fn last_goal(logs: &[&str]) -> Option<String> {
    logs.iter()
        .rev()
        .find_map(|l| NAV_GOAL.captures(l))
        .map(|c| spaced(&c[1]))
}

fn charger_sentence() -> String {
    "I could not navigate because I am connected to my charger, and autonomous navigation is disabled while charging.".into()
}

fn joystick_sentence() -> String {
    "I could not navigate because my joystick controller is enabled, which overrides autonomous navigation.".into()
}

fn static_obstacle_sentence(logs: &[&str]) -> Option<String> {
    logs.iter()
        .any(|l| l.contains("blocked by static obstacle"))
        .then(|| {
            let dest = last_goal(logs).unwrap_or_else(|| "destination".into());
            format!("I could not reach the {dest} because static obstacles blocked every path to it.")
        })
}

fn localisation_sentence(params: &BTreeMap<String, String>) -> Option<String> {
    let cov: f64 = params.get("localization_covariance")?.parse().ok()?;
    (cov > COVARIANCE_LIMIT).then(|| {
        format!(
            "My navigation was slow and erratic because I was badly localised in my map (localization covariance {cov:.2}), which triggered recovery behaviours."
        )
    })
}

fn moving_obstacle_sentence(logs: &[&str]) -> Option<String> {
    let replans: usize = logs
        .iter()
        .filter(|l| l.contains("Replanning: path blocked by moving obstacle"))
        .map(|l| repeat_count(l))
        .sum();
    (replans > 0).then(|| {
        let dest = last_goal(logs).unwrap_or_else(|| "destination".into());
        format!(
            "It took me longer because moving obstacles forced me to replan my path {replans} times on the way to the {dest}."
        )
    })
}

fn normal_navigation_sentence(logs: &[&str], params: &BTreeMap<String, String>) -> Option<String> {
    logs.iter().any(|l| l.contains("Goal reached")).then(|| {
        let dest = last_goal(logs).unwrap_or_else(|| "destination".into());
        let limit = params
            .get("max_speed")
            .and_then(|v| v.parse::<f64>().ok())
            .map_or_else(
                || "my configured speed limit".to_owned(),
                |v| format!("my configured speed limit of {v:.2} m/s"),
            );
        format!("I reached the {dest} without any navigation errors, moving within {limit}.")
    })
}

fn navigation_answer(logs: &[&str], params: &BTreeMap<String, String>) -> Option<String> {
    let flag = |k: &str| params.get(k).is_some_and(|v| v == "true");
    if flag("charger_connected") {
        return Some(charger_sentence());
    }
    if flag("joystick_enabled") {
        return Some(joystick_sentence());
    }
    static_obstacle_sentence(logs)
        .or_else(|| localisation_sentence(params))
        .or_else(|| moving_obstacle_sentence(logs))
        .or_else(|| normal_navigation_sentence(logs, params))
        .or_else(|| logs.is_empty().then(|| "I did not navigate during this task.".into()))
}

fn help_answer(counterfactual: &str) -> Result<String, ReasonerError> {
    let c = COUNTERFACTUAL
        .captures(counterfactual.trim())
        .ok_or_else(|| no_match("counterfactual statement not in template form"))?;
    let (variable, actual, target) = (&c[2], &c[3], &c[5]);
    let text = match variable {
        "n_humans" => "No person was detected, so I could not ask anyone for help. If at least one person had been present, I could have asked them for help.".to_owned(),
        "min_distance" => {
            let shown = if actual == "absent" { "out of sight".to_owned() } else { format!("{actual} m") };
            format!(
                "I could not ask for help because the nearest person was too far away ({shown}). If they had been within {target} m, I could have approached them."
            )
        }
        "detection_duration" => format!(
            "I saw someone, but not long enough for a stable detection ({actual} s). If I had detected them for {target} s, I could have approached them."
        ),
        "path_feasible" => "I could not approach the person because obstacles blocked my approach path. If the path had been clear, I could have asked them for help.".to_owned(),
        "response" => "I asked someone for help, but they refused. If they had agreed, I could have completed the task.".to_owned(),
        "confirmation" => "Someone agreed to help, but did not confirm completion of their assistance. If they had confirmed, I would have finished the task successfully.".to_owned(),
        other => return Err(no_match(&format!("unknown help variable `{other}`"))),
    };
    Ok(text)
}

fn aggregate_answer(body: &str) -> Result<String, ReasonerError> {
    let mut kept: Vec<&str> = Vec::new();
    for line in lines(Some(body)) {
        let text = line
            .strip_prefix("- ")
            .map(|l| match l.strip_prefix('[') {
                Some(rest) => rest.split_once(']').map_or(rest, |(_, t)| t).trim(),
                None => l.trim(),
            })
            .unwrap_or(line);
        if text.is_empty() || text.starts_with("(failed") || kept.contains(&text) {
            continue;
        }
        kept.push(text);
    }
    if kept.is_empty() {
        return Err(no_match("no explanation to aggregate"));
    }
    Ok(kept.join(" "))
}

fn end_to_end_answer(user: &str) -> String {
    let view = PlanView::parse(user);
    if let Some(answer) = view.grounding_answer() {
        return answer;
    }
    let logs = lines(section(user, "Logs"));
    let nav_logs: Vec<&str> = logs
        .iter()
        .copied()
        .filter(|l| l.starts_with("[navigation] "))
        .collect();
    let params = params(section(user, "Parameters"));
    let flag = |k: &str| params.get(k).is_some_and(|v| v == "true");
    if flag("charger_connected") {
        return charger_sentence();
    }
    if flag("joystick_enabled") {
        return joystick_sentence();
    }
    if let Some(s) = static_obstacle_sentence(&nav_logs) {
        return s;
    }
    let failed: Vec<&str> = FAILED_STATUS
        .captures_iter(view.statuses)
        .map(|c| c.get(1).unwrap().as_str())
        .collect();
    if failed.contains(&"text_to_speech") {
        return "My speech was interrupted because the text-to-speech skill timed out.".into();
    }
    let dialogue = section(user, "Dialogue").unwrap_or("");
    if failed.contains(&"ask_human_for_help") {
        if dialogue.contains("response=refuse") {
            return "The person I asked refused to help me.".into();
        }
        if dialogue.contains("confirmation=false") {
            return "The person agreed to help, but did not confirm completion of their assistance.".into();
        }
        return "My attempt to get help from a person failed.".into();
    }
    if let Some(s) = localisation_sentence(&params).or_else(|| moving_obstacle_sentence(&nav_logs)) {
        return s;
    }
    if let Some(loc) = view.missing_destination() {
        return format!(
            "My plan did not fulfil your request because it was missing a step: navigating to the {loc}."
        );
    }
    if let Some(c) = RECOMMENDATION.captures(dialogue) {
        return format!(
            "I recommended a {} pizza mainly because it matches the ingredients that were available.",
            &c[1]
        );
    }
    normal_navigation_sentence(&nav_logs, &params)
        .unwrap_or_else(|| "I did not find any problem in the recorded information.".into())
}

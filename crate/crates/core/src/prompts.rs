//! Prompt templates and the section format shared by every prompt.
//!
//! Templates live in `prompts/*.txt`. Each file holds the system prompt,
//! a `=== user ===` separator line, and the user prompt. The first system
//! line is `Role: <role>`; the user prompt is split into `## <name>`
//! sections. The rule reasoner relies on both conventions.

use crate::model::{PlanStep, SkillStatus};
use crate::reasoner::ReasonerRequest;

pub const SELECTOR: &str = include_str!("../prompts/selector.txt");
pub const PLANNER: &str = include_str!("../prompts/planner.txt");
pub const NAVIGATION: &str = include_str!("../prompts/navigation.txt");
pub const HELP: &str = include_str!("../prompts/help.txt");
pub const AGGREGATOR: &str = include_str!("../prompts/aggregator.txt");
pub const END_TO_END: &str = include_str!("../prompts/end_to_end.txt");

const USER_SEPARATOR: &str = "=== user ===";

/// Fills `{name}` placeholders and splits the template into a request.
pub fn render(template: &str, vars: &[(&str, &str)]) -> ReasonerRequest {
    let (system, user) = template
        .split_once(USER_SEPARATOR)
        .expect("prompt template lacks user separator");
    let fill = |text: &str| {
        let mut out = text.trim().to_owned();
        for (name, value) in vars {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    };
    ReasonerRequest::new(fill(system), fill(user))
}

/// `Role:` value from the first line of a system prompt.
pub fn role(system_prompt: &str) -> Option<&str> {
    system_prompt
        .lines()
        .next()?
        .strip_prefix("Role:")
        .map(str::trim)
}

/// Splits a user prompt into `(name, body)` pairs in order.
pub fn sections(user_prompt: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut current: Option<(&str, usize)> = None;
    let mut offset = 0;
    for line in user_prompt.split_inclusive('\n') {
        if let Some(name) = line.strip_prefix("## ") {
            if let Some((prev, start)) = current {
                out.push((prev, user_prompt[start..offset].trim()));
            }
            current = Some((name.trim(), offset + line.len()));
        }
        offset += line.len();
    }
    if let Some((prev, start)) = current {
        out.push((prev, user_prompt[start..].trim()));
    }
    out
}

pub fn section<'a>(user_prompt: &'a str, name: &str) -> Option<&'a str> {
    sections(user_prompt)
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, body)| body)
}

/// Keeps user-supplied text on one line so it cannot open a new section.
pub fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn format_plan(steps: &[PlanStep]) -> String {
    if steps.is_empty() {
        return "(empty plan)".into();
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn format_list(items: &[String]) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items
            .iter()
            .map(|i| format!("- {i}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn format_statuses(skills: &[(String, SkillStatus)]) -> String {
    if skills.is_empty() {
        return "none".into();
    }
    skills
        .iter()
        .map(|(skill, status)| format!("- {skill}: {status}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_template_declares_a_role_and_fills() {
        for t in [SELECTOR, PLANNER, NAVIGATION, HELP, AGGREGATOR, END_TO_END] {
            let req = render(t, &[]);
            assert!(role(&req.system_prompt).is_some());
            assert!(req.user_prompt.starts_with("## "));
            assert!(sections(&req.user_prompt)
                .iter()
                .any(|(name, _)| *name == "Query"));
        }
    }

    #[test]
    fn sections_split_in_order() {
        let req = render(HELP, &[("counterfactual", "A.\nB."), ("query", "Why?")]);
        let s = sections(&req.user_prompt);
        assert_eq!(s, vec![("Counterfactual", "A.\nB."), ("Query", "Why?")]);
        assert_eq!(role(&req.system_prompt), Some("help-explainer"));
    }

    #[test]
    fn single_line_flattens() {
        assert_eq!(single_line(" a\n## b  c "), "a ## b c");
    }
}

//! Step-by-step replay of the help skill's state machine over a trace.
//!
//! Deliberately written without the causal model's variable extraction so
//! that the two can be checked against each other.

use crate::causal::{HelpOutcome, HelpThresholds, MAX_DETECTION_GAP};
use crate::error::ScenarioError;
use crate::trace::{Event, EventKind, Source, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Detecting,
    Asking,
    AwaitingConfirmation,
    Done(HelpOutcome),
}

fn number(e: &Event, key: &str) -> Result<f64, ScenarioError> {
    e.num_field(key)
        .ok_or_else(|| ScenarioError::MalformedHelpEvent(format!("event at {} lacks `{key}`", e.ts)))
}

/// Outcome the help skill's state machine reaches on the trace's help
/// events, using the default thresholds.
pub fn replay_fsm(trace: &Trace) -> Result<HelpOutcome, ScenarioError> {
    let thresholds = HelpThresholds::default();
    let events: Vec<&Event> = trace
        .events
        .iter()
        .filter(|e| e.source == Source::AskHumanForHelp)
        .collect();
    if events.is_empty() {
        return Err(ScenarioError::MissingHelpEvents);
    }

    // per person: (first ts of current run, last ts, longest run)
    let mut tracks: Vec<(String, f64, f64, f64)> = Vec::new();
    let mut nearest = f64::INFINITY;
    let mut state = State::Detecting;

    for e in &events {
        match (state, e.kind) {
            (State::Detecting, EventKind::Detection) => {
                let person = e
                    .str_field("person_id")
                    .ok_or_else(|| ScenarioError::MalformedHelpEvent(format!("detection at {} lacks `person_id`", e.ts)))?;
                nearest = nearest.min(number(e, "distance")?);
                match tracks.iter_mut().find(|t| t.0 == person) {
                    Some(t) => {
                        if e.ts - t.2 > MAX_DETECTION_GAP {
                            t.1 = e.ts;
                        }
                        t.2 = e.ts;
                        t.3 = t.3.max(t.2 - t.1);
                    }
                    None => tracks.push((person.to_owned(), e.ts, e.ts, 0.0)),
                }
            }
            (State::Detecting, EventKind::Param) => {
                if let Some(feasible) = e.bool_field("approach.path_feasible") {
                    state = if feasible {
                        State::Asking
                    } else {
                        State::Done(HelpOutcome::ApproachFailed)
                    };
                }
            }
            (State::Asking, EventKind::Dialogue) => {
                if let Some(r) = e.str_field("response") {
                    state = if r == "agree" {
                        State::AwaitingConfirmation
                    } else {
                        State::Done(HelpOutcome::HelpRefused)
                    };
                }
            }
            (State::AwaitingConfirmation, EventKind::Dialogue) => {
                if let Some(c) = e.bool_field("confirmation") {
                    state = State::Done(if c {
                        HelpOutcome::Success
                    } else {
                        HelpOutcome::NoConfirmation
                    });
                }
            }
            _ => {}
        }
    }

    // the detection gates apply regardless of how far the walk got
    if tracks.is_empty() {
        return Ok(HelpOutcome::NoHumanFound);
    }
    if nearest > thresholds.d_max {
        return Ok(HelpOutcome::HumanTooFar);
    }
    let longest = tracks.iter().map(|t| t.3).fold(0.0, f64::max);
    if longest < thresholds.t_stable {
        return Ok(HelpOutcome::UnstableDetection);
    }
    Ok(match state {
        State::Done(outcome) => outcome,
        // stages never reached count as passed
        State::Detecting | State::Asking | State::AwaitingConfirmation => {
            HelpOutcome::Success
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_trace;

    #[test]
    fn help_scenarios_replay_to_their_outcomes() {
        let expected = [
            (11, HelpOutcome::NoHumanFound),
            (12, HelpOutcome::HumanTooFar),
            (13, HelpOutcome::UnstableDetection),
            (14, HelpOutcome::ApproachFailed),
            (15, HelpOutcome::HelpRefused),
            (16, HelpOutcome::NoConfirmation),
            (17, HelpOutcome::Success),
            (18, HelpOutcome::Success),
        ];
        for (s, outcome) in expected {
            for v in 1..=3 {
                assert_eq!(replay_fsm(&generate_trace(s, v, 3).unwrap()), Ok(outcome), "s{s} v{v}");
            }
        }
    }

    #[test]
    fn no_help_events_is_an_error() {
        let t = generate_trace(5, 1, 0).unwrap();
        assert_eq!(replay_fsm(&t), Err(ScenarioError::MissingHelpEvents));
    }
}

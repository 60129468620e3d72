use crate::error::ExplainError;
use crate::framework::{ComponentExplainer, ExplainerOutput};
use crate::model::{ContextVector, Query, SkillStatus};
use crate::reasoner::TextReasoner;
use crate::trace::{Event, Source};

pub const TTS_TIMEOUT_TEXT: &str =
    "The speech was cut off because the text-to-speech skill timed out before the utterance was complete.";
pub const TTS_OK_TEXT: &str = "I did not detect any problem with my speech during this task.";

/// Templated: a timeout explanation when the skill failed with
/// `error_code = timeout` inside the window, a no-problem text otherwise.
pub fn explain_tts(_query: &Query, context: &ContextVector, events: &[&Event]) -> ExplainerOutput {
    let timeout = events
        .iter()
        .filter(|e| e.source == Source::TextToSpeech && context.contains(e.ts))
        .find(|e| {
            matches!(
                e.skill_status(),
                Some(("text_to_speech", SkillStatus::Failed, Some("timeout")))
            )
        });
    match timeout {
        Some(e) => {
            let mut text = TTS_TIMEOUT_TEXT.to_owned();
            if let Some(n) = e.num_field("utterance_length") {
                text.push_str(&format!(" (utterance length: {} characters)", n as u64));
            }
            ExplainerOutput::new(text)
        }
        None => ExplainerOutput::new(TTS_OK_TEXT),
    }
}

pub struct TtsExplainer;

impl ComponentExplainer for TtsExplainer {
    fn id(&self) -> &str {
        "text_to_speech"
    }

    fn subscriptions(&self) -> &[Source] {
        &[Source::TextToSpeech]
    }

    fn summary(&self) -> &str {
        "explains what the robot said or failed to say, including interrupted speech"
    }

    fn explain(
        &self,
        query: &Query,
        context: &ContextVector,
        events: &[&Event],
        _reasoner: &dyn TextReasoner,
    ) -> Result<ExplainerOutput, ExplainError> {
        Ok(explain_tts(query, context, events))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::EventKind;

    fn ctx() -> ContextVector {
        ContextVector {
            task: "t".into(),
            skills: vec![],
            plan_valid: true,
            window: (0.0, 10.0),
        }
    }

    fn status(status: &str, code: Option<&str>) -> Event {
        let e = Event::new(1.0, Source::TextToSpeech, EventKind::SkillStatus)
            .with("skill", "text_to_speech")
            .with("status", status)
            .with("utterance_length", 412i64);
        match code {
            Some(c) => e.with("error_code", c),
            None => e,
        }
    }

    #[test]
    fn timeout_uses_template_with_length() {
        let e = status("failed", Some("timeout"));
        let out = explain_tts(&Query::new("q", 2.0), &ctx(), &[&e]);
        assert_eq!(
            out.text,
            format!("{TTS_TIMEOUT_TEXT} (utterance length: 412 characters)")
        );
    }

    #[test]
    fn success_and_absence_give_no_problem_text() {
        let e = status("succeeded", None);
        assert_eq!(explain_tts(&Query::new("q", 2.0), &ctx(), &[&e]).text, TTS_OK_TEXT);
        assert_eq!(explain_tts(&Query::new("q", 2.0), &ctx(), &[]).text, TTS_OK_TEXT);
        let other = status("failed", Some("audio_device"));
        assert_eq!(explain_tts(&Query::new("q", 2.0), &ctx(), &[&other]).text, TTS_OK_TEXT);
    }
}

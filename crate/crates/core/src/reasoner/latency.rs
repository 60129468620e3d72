use crate::error::ReasonerError;

use super::{ReasonerRequest, ReasonerResponse, TextReasoner};

/// Test double that reports a latency of `seconds_per_100_chars` for every
/// hundred prompt characters without sleeping. Makes runtime comparisons
/// between methods deterministic.
pub struct SimulatedLatency<R> {
    inner: R,
    seconds_per_100_chars: f64,
}

impl<R: TextReasoner> SimulatedLatency<R> {
    pub fn new(inner: R, seconds_per_100_chars: f64) -> Self {
        SimulatedLatency {
            inner,
            seconds_per_100_chars: seconds_per_100_chars.max(0.0),
        }
    }
}

impl<R: TextReasoner> TextReasoner for SimulatedLatency<R> {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        let mut resp = self.inner.complete(request)?;
        resp.latency = self.seconds_per_100_chars * request.prompt_chars() as f64 / 100.0;
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::RuleReasoner;

    #[test]
    fn latency_scales_with_prompt_length() {
        let r = SimulatedLatency::new(RuleReasoner::new(), 0.1);
        let short = ReasonerRequest::new(
            "Role: aggregator",
            "## Explanations\n- [a] Hello.\n## Query\nWhat happened?",
        );
        let mut long = short.clone();
        long.user_prompt = long.user_prompt.replace("Hello.", &"Hello. ".repeat(50));
        let a = r.complete(&short).unwrap().latency;
        let b = r.complete(&long).unwrap().latency;
        assert!((a - 0.1 * short.prompt_chars() as f64 / 100.0).abs() < 1e-12);
        assert!(b > a);
    }
}

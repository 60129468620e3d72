//! Text-generation boundary used wherever an explainer needs a language
//! model.
//!
//! [`RuleReasoner`] is a deterministic pattern matcher over the structured
//! prompts built in [`crate::prompts`]; [`RemoteReasoner`] talks to a
//! chat-completion endpoint; [`SimulatedLatency`] wraps either one and
//! reports a latency proportional to prompt size.

mod latency;
mod remote;
mod rule;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub use latency::SimulatedLatency;
pub use remote::{RemoteConfig, RemoteReasoner, MODEL_ENV, URL_ENV};
pub use rule::RuleReasoner;

use crate::error::ReasonerError;

/// Default completion budget for explanation prompts.
pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_tokens: u32,
    /// Always 0 for evaluation runs (greedy decoding).
    pub temperature: f64,
}

impl ReasonerRequest {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        ReasonerRequest {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
        }
    }

    pub fn prompt_chars(&self) -> usize {
        self.system_prompt.chars().count() + self.user_prompt.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerResponse {
    pub text: String,
    /// Seconds spent producing the answer, as reported by the backend.
    pub latency: f64,
    pub token_count: usize,
}

pub trait TextReasoner: Send + Sync {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError>;
}

impl<R: TextReasoner + ?Sized> TextReasoner for &R {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        (**self).complete(request)
    }
}

impl<R: TextReasoner + ?Sized> TextReasoner for Box<R> {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        (**self).complete(request)
    }
}

/// Call count and accounted time of a metered section.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CallStats {
    pub calls: usize,
    /// Elapsed seconds with the real time spent inside reasoner calls
    /// replaced by the latency the reasoner reported.
    pub wall_time: f64,
}

/// Counts calls and accumulates reported latency for everything routed
/// through it.
pub struct Meter<'a> {
    inner: &'a dyn TextReasoner,
    calls: AtomicUsize,
    times: Mutex<(f64, Duration)>,
}

impl<'a> Meter<'a> {
    pub fn new(inner: &'a dyn TextReasoner) -> Self {
        Meter {
            inner,
            calls: AtomicUsize::new(0),
            times: Mutex::new((0.0, Duration::ZERO)),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Runs `f` against this meter and returns its result with the call
    /// statistics of the run.
    pub fn run<T>(inner: &'a dyn TextReasoner, f: impl FnOnce(&Meter<'a>) -> T) -> (T, CallStats) {
        let meter = Meter::new(inner);
        let start = Instant::now();
        let out = f(&meter);
        let elapsed = start.elapsed();
        let (reported, real) = *meter.times.lock().expect("meter lock poisoned");
        let own = elapsed.saturating_sub(real).as_secs_f64();
        (
            out,
            CallStats {
                calls: meter.calls(),
                wall_time: own + reported,
            },
        )
    }
}

impl TextReasoner for Meter<'_> {
    fn complete(&self, request: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let start = Instant::now();
        let result = self.inner.complete(request);
        let real = start.elapsed();
        let mut times = self.times.lock().expect("meter lock poisoned");
        times.1 += real;
        times.0 += match &result {
            Ok(resp) => resp.latency,
            Err(_) => real.as_secs_f64(),
        };
        result
    }
}

/// Which reasoner backend to build from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasonerKind {
    Rule,
    Remote,
}

impl std::str::FromStr for ReasonerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(ReasonerKind::Rule),
            "remote" => Ok(ReasonerKind::Remote),
            other => Err(format!("unknown reasoner `{other}` (expected rule or remote)")),
        }
    }
}

/// Builds a reasoner, optionally wrapped in the latency double.
pub fn build_reasoner(
    kind: ReasonerKind,
    simulated_latency: Option<f64>,
) -> Result<Box<dyn TextReasoner>, ReasonerError> {
    let base: Box<dyn TextReasoner> = match kind {
        ReasonerKind::Rule => Box::new(RuleReasoner::new()),
        ReasonerKind::Remote => Box::new(RemoteReasoner::from_env()?),
    };
    Ok(match simulated_latency {
        Some(s) => Box::new(SimulatedLatency::new(base, s)),
        None => base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64);

    impl TextReasoner for Fixed {
        fn complete(&self, _: &ReasonerRequest) -> Result<ReasonerResponse, ReasonerError> {
            Ok(ReasonerResponse {
                text: "ok".into(),
                latency: self.0,
                token_count: 1,
            })
        }
    }

    #[test]
    fn meter_counts_and_sums_latency() {
        let r = Fixed(1.5);
        let (_, stats) = Meter::run(&r, |m| {
            let req = ReasonerRequest::new("s", "u");
            m.complete(&req).unwrap();
            m.complete(&req).unwrap();
        });
        assert_eq!(stats.calls, 2);
        assert!(stats.wall_time >= 3.0 && stats.wall_time < 3.1);
    }

    #[test]
    fn requests_default_to_greedy_decoding() {
        let req = ReasonerRequest::new("a", "bc");
        assert_eq!(req.temperature, 0.0);
        assert_eq!(req.prompt_chars(), 3);
    }
}

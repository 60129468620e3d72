//! Planner, text-to-speech and navigation explainers.

mod navigation;
mod planner;
mod tts;

pub use navigation::{
    explain_navigation, filter_logs, navigation_params, LogFilterRules, NavigationExplainer,
    DEFAULT_MAX_LINES,
};
pub use planner::{explain_planner, planner_request, PlannerExplainer};
pub use tts::{explain_tts, TtsExplainer, TTS_OK_TEXT, TTS_TIMEOUT_TEXT};

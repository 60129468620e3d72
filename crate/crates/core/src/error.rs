use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {ts} is earlier than previous timestamp {previous}")]
    Ordering { line: usize, ts: f64, previous: f64 },
    #[error("trace file has no header line")]
    MissingHeader,
    #[error("trace invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario id {0} out of range 1..=20")]
    ScenarioOutOfRange(u32),
    #[error("task variant {0} out of range 1..=3")]
    VariantOutOfRange(u32),
    #[error("query index {0} out of range 1..=3")]
    QueryOutOfRange(u32),
    #[error("trace contains no ask_human_for_help events")]
    MissingHelpEvents,
    #[error("malformed help-skill event: {0}")]
    MalformedHelpEvent(String),
    #[error("manifest error: {0}")]
    Manifest(String),
}

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("rule reasoner has no rule for this prompt: {0}")]
    NoMatch(String),
    #[error("reasoner endpoint unreachable: {0}")]
    Connection(String),
    #[error("reasoner request timed out: {0}")]
    Timeout(String),
    #[error("reasoner endpoint returned HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("malformed reasoner response: {0}")]
    Malformed(String),
    #[error("reasoner configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error("missing event: {0}")]
    MissingEvent(String),
    #[error("malformed event payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Lime(#[from] LimeError),
}

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("trace has no plan event")]
    MissingPlan,
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("selector chose unknown explainer `{0}`")]
    UnknownExplainer(String),
    #[error("no explainer registered for module `{0}`")]
    Unmapped(String),
    #[error("registry error: {0}")]
    Registration(String),
    #[error("nothing to aggregate")]
    EmptyAggregation,
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error("explainer `{id}` failed: {source}")]
    Explainer {
        id: String,
        #[source]
        source: ExplainError,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum CausalError {
    #[error("realized outcome already equals the desired outcome `{0}`")]
    AlreadyDesired(String),
    #[error("outcome `{desired}` precedes realized outcome `{realized}` in gate order")]
    Unreachable { desired: String, realized: String },
    #[error("malformed help-skill event: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum LimeError {
    #[error("empty training set")]
    EmptyDataset,
    #[error("class `{0}` has no training examples")]
    MissingClass(String),
    #[error("expected {expected} features, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("surrogate design matrix is singular")]
    Singular,
    #[error("invalid LIME configuration: {0}")]
    Config(String),
    #[error("dataset parse error: {0}")]
    Parse(String),
}

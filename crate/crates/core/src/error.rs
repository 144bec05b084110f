use thiserror::Error;

/// Errors produced by the frequency oracles, the longitudinal protocols and
/// the server-side estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdpError {
    #[error("privacy budget must be a positive finite number, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("domain must contain at least two values, got k = {0}")]
    DomainTooSmall(usize),

    #[error("value {value} is outside the domain [0, {k})")]
    ValueOutOfDomain { value: usize, k: usize },

    #[error("degenerate channel: the estimator divides by zero ({0})")]
    DegenerateChannel(&'static str),

    #[error("no reports were collected")]
    EmptyCollection,

    #[error("channel row {row} is not a probability distribution (sum = {sum})")]
    MalformedChannel { row: usize, sum: f64 },

    #[error("invalid probability pair (p = {p}, q = {q}): {reason}")]
    InvalidProbabilities {
        p: f64,
        q: f64,
        reason: &'static str,
    },

    #[error("invalid budget: need 0 < eps_1 < eps_inf, got eps_inf = {eps_inf}, eps_1 = {eps_1}")]
    InvalidBudget { eps_inf: f64, eps_1: f64 },

    #[error("{family} cannot reach eps_1 = {eps_1} under eps_inf = {eps_inf} (k = {k})")]
    InfeasibleBudget {
        family: String,
        eps_inf: f64,
        eps_1: f64,
        k: usize,
    },

    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("need 1 <= r <= d, got r = {r}, d = {d}")]
    InvalidSampling { r: usize, d: usize },

    #[error("unknown attribute index {0}")]
    UnknownAttribute(usize),

    #[error("no protocol parameters registered for attribute {attr}")]
    MissingParameters { attr: usize },

    #[error("attribute name `{0}` is used more than once")]
    DuplicateAttribute(String),

    #[error("baseline MSE must be positive to compute an accuracy gain")]
    ZeroBaseline,

    #[error("malformed report line: {0}")]
    MalformedReport(String),
}

pub type Result<T, E = LdpError> = std::result::Result<T, E>;

use thiserror::Error;

/// Failures while reading an [`ObservedTable`](crate::ObservedTable).
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("expected 9 counts, found {0}")]
    Arity(usize),
    #[error("invalid count {value:?} for {field}: {reason}")]
    InvalidCount {
        field: &'static str,
        value: String,
        reason: String,
    },
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("empty table: all nine counts are zero")]
    Empty,
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("malformed json: {0}")]
    Json(String),
}

/// Numerical failures inside the EM engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("degenerate state: {0} vanished")]
    Degenerate(&'static str),
    #[error("pooled discordant pseudo-counts n00_12* + n00_21* are zero")]
    PooledSingularity,
    #[error("hypothesis {0} cannot be fitted directly")]
    NotFittable(String),
    #[error("augmented counts were produced for model {expected:?}, got {found:?}")]
    ModelMismatch {
        expected: crate::ModelId,
        found: crate::ModelId,
    },
}

/// Errors raised while computing test statistics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("McNemar statistic undefined: both discordant cells are zero")]
    NoDiscordantPairs,
    #[error("expected frequency for cell {cell} is zero but its count is positive")]
    ZeroExpected { cell: &'static str },
    #[error("fits do not form a nested pair: {0}")]
    NotNested(String),
    #[error("conditional statistic {0} is negative; the nested fits did not reach a common optimum")]
    NegativeConditional(f64),
    #[error("significance level {0} outside (0, 1)")]
    Level(f64),
}

/// Errors raised by the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("replication count is zero")]
    NoReplications,
    #[error("{failed} of {reps} replications failed (more than 1%)")]
    TooManyFailures { failed: usize, reps: usize },
    #[error("discordant probabilities are both zero")]
    NoDiscordantMass,
    #[error("invalid scenario manifest: {0}")]
    Manifest(String),
}

/// Violations of the parameter-space constraints of a missingness model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {0} is not finite")]
    NonFinite(&'static str),
    #[error("odds parameter {name} = {value} is negative")]
    NegativeOdds { name: &'static str, value: f64 },
    #[error("complete-cell probability {name} = {value} is not positive")]
    NonPositiveCell { name: &'static str, value: f64 },
    #[error("cell probabilities sum to {0}, not 1")]
    NotNormalized(f64),
}

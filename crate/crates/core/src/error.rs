use alloc::string::String;

/// Every failure the numeric core can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch { context: &'static str, expected: String, found: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("design needs at least two conditions, found {0}")]
    EmptyDesign(usize),
    #[error("need at least two rows to standardize, found {0}")]
    TooFewRows(usize),
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("invalid network architecture: {0}")]
    BadArchitecture(String),
    #[error("alpha must be >= 1, got {0}")]
    BadAlpha(f64),
    #[error("batch size {batch} exceeds the {available} available time points")]
    BatchTooLarge { batch: usize, available: usize },
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error("subjects disagree on conditions: {0}")]
    ConditionMismatch(String),
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for a constant vector")]
    ConstantVector,
    #[error("signature row {0} is constant")]
    ConstantRow(usize),
    #[error("signatures of classes {0} and {1} are identical")]
    DegeneratePair(usize, usize),
    #[error("cross-validation needs at least two subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("infeasible event schedule: {0}")]
    InfeasibleSchedule(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape(context: &'static str, expected: impl core::fmt::Display, found: impl core::fmt::Display) -> Error {
    use alloc::string::ToString;
    Error::ShapeMismatch { context, expected: expected.to_string(), found: found.to_string() }
}

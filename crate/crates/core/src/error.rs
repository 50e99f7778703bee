use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cross-section: {0}")]
    InvalidCrossSection(String),

    #[error("enumerating eigenvalues below {cutoff} would exceed the cap of {cap} eigenvalues")]
    EnumerationCap { cutoff: f64, cap: usize },

    #[error("epsilon = {epsilon} is outside the admissible range for the {label} profile: {constraint}")]
    EpsilonRange {
        label: String,
        epsilon: f64,
        constraint: String,
    },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("t = {t} lies outside the profile domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("zero mode has no unique extension")]
    ZeroModeNoUniqueExtension,

    #[error("invalid mode problem: {0}")]
    InvalidModeProblem(String),

    #[error("requested {requested} eigenvalues but the discrete problem has dimension {dimension}")]
    TooManyEigenvalues { requested: usize, dimension: usize },

    #[error("truncation certificate unattainable: {0}")]
    Truncation(String),

    #[error("index {index} out of range: spectrum holds {available} eigenvalues")]
    IndexOutOfRange { index: usize, available: usize },

    #[error("degenerate test family: {0}")]
    DegenerateFamily(String),

    #[error("zero-volume subset: {0}")]
    ZeroVolume(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("profile violates the collar hypothesis: {0}")]
    CollarHypothesis(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Wrap an error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

use crate::rational::ParseRationalError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{x} lies outside the domain {domain}")]
    OutOfDomain { x: String, domain: String },

    #[error("{what}: {count} exceeds the cap of {cap}")]
    ResourceCap {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("partition is not Markov: {0}")]
    NonMarkov(String),

    #[error("preimage window too small: {0}")]
    WindowTooSmall(String),

    #[error("{0} has infinitely many preimages (constant piece)")]
    InfinitePreimages(String),

    #[error("monotone table is missing {0}")]
    MissingCoverage(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("zero {kind} count at n = {n}; anchor may be transient or periodic")]
    ZeroCount { kind: &'static str, n: usize },

    #[error("no positive characteristic root: {0}")]
    NoPositiveRoot(String),

    #[error(transparent)]
    Parse(#[from] ParseRationalError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors that signal a resource limit rather than wrong input.
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::ResourceCap { .. })
    }
}

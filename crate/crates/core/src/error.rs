use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid block count k={k} for sample size {n} (need k = 1 or 1 <= k <= n/2)")]
    InvalidK { k: usize, n: usize },

    /// An exhaustive enumeration would need `required` evaluations, above `cap`.
    #[error("enumeration cap exceeded: {required} evaluations required, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("absolute moment of order {q} does not exist (requires q < {limit})")]
    MomentDoesNotExist { q: f64, limit: f64 },

    #[error("value {0} is not in the support of the law")]
    ValueNotInSupport(f64),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("cannot corrupt {count} entries of a sample of size {n}")]
    CountTooLarge { count: usize, n: usize },

    #[error("only {found} estimable points in the fit range, need at least {needed}")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("tail is not decaying: fitted slope {0} is not positive")]
    NonpositiveSlope(f64),

    #[error("replication {index}: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Strips replication context, returning the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Replication { source, .. } => source.root(),
            other => other,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iteration limit exceeded in {context}: best estimate {estimate}, residual {residual:e}")]
    NoConvergence {
        context: String,
        estimate: f64,
        residual: f64,
    },

    #[error("subset budget exceeded: binomial({n}, {l}) = {count} > {budget}; use rho_l_search instead")]
    BudgetExceeded {
        n: usize,
        l: usize,
        count: u128,
        budget: u128,
    },

    #[error("validity condition fails: W = {w} must exceed (2k(6Ck)^alpha)^6 = {threshold}")]
    BoundInvalid { w: usize, threshold: f64 },

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("{0}")]
    Construction(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("quadrature on [{lo}, {hi}] did not reach tolerance {tol:e}")]
    Integration { lo: f64, hi: f64, tol: f64 },

    #[error("sample size {n} exceeds the trace cap {cap}")]
    TraceCap { n: usize, cap: usize },

    #[error("sample is empty")]
    EmptySample,

    #[error("vector set is empty")]
    EmptySet,

    #[error("vectors have mismatched lengths ({expected} vs {found})")]
    RaggedVectors { expected: usize, found: usize },

    #[error("{0} requires the uniform distribution on [0, 1]")]
    RequiresUniform(&'static str),

    #[error("{0} requires an i.i.d. sample")]
    RequiresIid(&'static str),

    #[error("family `{family}` does not support {what}")]
    Unsupported { family: String, what: &'static str },

    #[error("no analytic mean available for {0}")]
    UnavailableMean(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}

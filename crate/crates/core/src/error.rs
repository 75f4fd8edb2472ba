use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("neuron index {index} out of range for a network of {n} neurons")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state enumeration exceeded the cap of {cap} states")]
    StateCapExceeded { cap: usize },

    #[error("truncated chain has several closed classes; states {first} and {second} do not communicate")]
    MultipleClosedClasses { first: usize, second: usize },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("inadmissible regime: lambda^2 * C0 * C3 = {q} >= 1")]
    Inadmissible { q: f64 },

    #[error("hypothesis {name} violated: value {value} >= 1")]
    HypothesisViolated { name: &'static str, value: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

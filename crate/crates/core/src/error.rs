use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown POVM `{0}` (expected pauli6, pauli4 or tetra)")]
    UnknownPovm(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    /// The measurement channel cannot be inverted; the Bloch component named
    /// here is (mostly) invisible to the measurement.
    #[error(
        "informationally incomplete POVM: smallest singular value {sigma_min:.3e}, \
         unobserved Bloch component `{null_direction}`"
    )]
    InformationallyIncomplete {
        null_direction: &'static str,
        sigma_min: f64,
    },

    #[error("noise channel is not trace preserving (max |ΣK†K - I| = {0:.3e})")]
    NotTracePreserving(f64),

    #[error("POVM element {0} is the zero operator")]
    ZeroElement(usize),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("{what}: n = {n} exceeds the supported maximum of {max}")]
    TooLarge {
        what: &'static str,
        n: usize,
        max: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InformationallyIncomplete { .. } | Error::Numerical(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

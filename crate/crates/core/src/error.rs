use thiserror::Error;

/// Errors raised by the catalog, sampler, simulator and evaluation layers.
#[derive(Debug, Error)]
pub enum EtasError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error("catalog is empty after filtering")]
    EmptyCatalog,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("triggering parameters are supercritical: {0}")]
    Unstable(String),

    #[error("simulation exceeded the event cap of {cap} events")]
    EventCapExceeded { cap: usize },

    #[error("sampler initialization failed after {attempts} attempts: {message}")]
    InitFailed { attempts: usize, message: String },

    #[error("event {index} has zero intensity: background density is zero there and no earlier event can trigger it")]
    ZeroIntensity { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, EtasError>;

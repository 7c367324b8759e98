use thiserror::Error;

/// Errors produced by the simulator and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of the documented invariants.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("steering vector undefined: position coincides with station {station} center")]
    DegenerateGeometry { station: usize },

    #[error("lag {lag_s:e} s outside covered range ±{max_s:e} s")]
    LagOutOfRange { lag_s: f64, max_s: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e} relative)")]
    NotHermitian { asymmetry: f64 },

    #[error("could only separate {found} of {wanted} extrema")]
    NotEnoughExtrema { found: usize, wanted: usize },

    #[error("batch file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Configuration file problem, with the offending key path or line.
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short category tag used by the command-line front end.
    /// Exit status for the command-line front end: 1 for bad input, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Json(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation",
            Error::DegenerateGeometry { .. } => "geometry",
            Error::LagOutOfRange { .. } => "range",
            Error::InsufficientData(_) => "data",
            Error::Dimension(_) => "dimension",
            Error::NotHermitian { .. } => "numeric",
            Error::NotEnoughExtrema { .. } => "extrema",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) | Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

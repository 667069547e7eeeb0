use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {what} (max {max})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("oracle supports at most {max} atoms, got {got}")]
    OracleTooLarge { got: usize, max: usize },

    #[error("mixing angle undefined: both Rabi frequencies vanish at t = {t}")]
    DegenerateFrame { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("tolerance not achievable: {0}")]
    Tolerance(String),

    #[error("ambiguous eigenvector matching at t = {t}: gap {gap:e}")]
    AmbiguousCrossing { t: f64, gap: f64 },

    #[error("regime check failed: {0}")]
    Regime(String),

    #[error("search not bracketed: {0}")]
    Unbracketed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::OutOfRange { .. }
            | Error::OracleTooLarge { .. }
            | Error::Config(_)
            | Error::Regime(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

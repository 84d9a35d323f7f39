use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the model equation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The battery voltage laws are singular at SOC = 0 (discharge) and
    /// SOC = 1 (charge); evaluation is refused outside the guarded band.
    #[error("soc {soc} outside the guarded band of the {law} voltage law")]
    SingularityGuard { soc: f64, law: &'static str },

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("profile: missing column `{0}`")]
    MissingColumn(String),

    #[error("profile: row {row}: timestamps must be strictly increasing")]
    NonMonotonic { row: usize },

    #[error("profile: row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("profile: time {t} s outside [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

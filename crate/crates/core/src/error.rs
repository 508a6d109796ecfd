use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("temperature inversion did not converge for J = {j}, w = {w} after {iterations} iterations")]
    NoConvergence { j: f64, w: f64, iterations: usize },

    /// Invalid scenario input; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A floor violation or other failure while advancing the state.
    #[error("step failure at t = {t}: {message}")]
    Step { t: f64, message: String },

    #[error("time step underflow: dt = {dt:e} at t = {t}")]
    DegenerateDt { dt: f64, t: f64 },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

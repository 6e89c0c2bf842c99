use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent model/run configuration. `field` is a dotted
    /// path into the configuration (e.g. `model.n_fock`).
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("numerical error in {context}: {message}")]
    Numerical { context: String, message: String },

    /// The Liouvillian null space is not one-dimensional.
    #[error("steady state is not unique: null space has dimension {dimension}")]
    DegenerateSteadyState { dimension: usize },

    /// The resolvent `L + iω` is singular at the given frequency.
    #[error("singular resolvent at omega = {omega:.6e}")]
    SingularResolvent { omega: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn numerical(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

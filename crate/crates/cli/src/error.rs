use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot load model: {0}")]
    Load(riskeig::Error),

    #[error("model failed validation")]
    Invalid,

    #[error("{0}")]
    NotConverged(String),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] riskeig::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 0 success, 1 validation failure, 2 non-convergence, 3 usage error.
    pub fn exit_code(&self) -> i32 {
        use riskeig::Error as E;
        match self {
            CliError::Load(_) | CliError::Invalid => 1,
            CliError::NotConverged(_) => 2,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Csv(_) => 3,
            CliError::Core(e) => match e {
                E::NoConvergence { .. }
                | E::LadderNotConverged(_)
                | E::DegenerateEigenvector
                | E::ReferenceUnreachable(_)
                | E::ZeroPsi(_)
                | E::ZeroMatrix => 2,
                _ => 3,
            },
        }
    }
}

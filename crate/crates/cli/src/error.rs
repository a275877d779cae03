use std::path::PathBuf;

use slowdisp_core::Error;

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_MATH: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Read { .. } => EXIT_INPUT,
            CliError::Write { .. } => EXIT_INTERNAL,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) | Error::OutOfDomain(_) | Error::InvalidSample(_) => EXIT_INPUT,
                Error::NonConvergence { .. } | Error::NoCandidate { .. } | Error::Conditioning { .. } => {
                    EXIT_MATH
                }
                Error::OrderMismatch { .. }
                | Error::InternalConsistency(_)
                | Error::BranchDegeneracy { .. }
                | Error::IndeterminateOrder { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::Accuracy { .. }
                | Error::UnsupportedOrder(_) => EXIT_INTERNAL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

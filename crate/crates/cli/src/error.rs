use std::io;
use std::path::PathBuf;

use prob_sampler::cnf::CnfError;
use prob_sampler::compiler::{CompileError, FormatError};
use prob_sampler::oracle::OracleError;
use prob_sampler::prob::ProbError;
use prob_sampler::sampler::{IncrementalError, SampleError};
use thiserror::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Cnf { path: PathBuf, source: CnfError },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Incremental(#[from] IncrementalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[cfg(feature = "parallel")]
    #[error("thread pool: {0}")]
    Threads(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compile(CompileError::TooManyVariables { .. })
            | CliError::Incremental(IncrementalError::Compile(CompileError::TooManyVariables { .. }))
            | CliError::Oracle(OracleError::TooManyVariables { .. }) => EXIT_GUARD,
            CliError::Format {
                source: FormatError::PropertyViolation { .. },
                ..
            }
            | CliError::Oracle(OracleError::OutsideSupport { .. })
            | CliError::Verification(_) => EXIT_VERIFY,
            #[cfg(feature = "parallel")]
            CliError::Threads(_) => EXIT_USAGE,
            _ => EXIT_INPUT,
        }
    }
}

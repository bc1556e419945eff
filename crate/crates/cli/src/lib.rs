//! Library surface of the `tariff` command-line tool: scenario documents,
//! report rendering, and the command implementations, kept callable from
//! integration tests.

pub mod commands;
pub mod doc;
pub mod report;

use thiserror::Error;

/// Stable exit-code contract.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ASSUMPTION_VIOLATION: u8 = 2;
    pub const PARSE_OR_USAGE: u8 = 3;
    pub const SOLVER_FAILURE: u8 = 4;
    pub const INFEASIBLE: u8 = 5;
    pub const ORACLE_FAILURE: u8 = 6;
}

/// Command-level errors with their exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tariff_core::CoreError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use tariff_core::CoreError as E;
        match self {
            CliError::Parse(_) | CliError::Usage(_) | CliError::Io { .. } => exit::PARSE_OR_USAGE,
            CliError::Core(core) => match core {
                E::InvalidScenario(_) => exit::ASSUMPTION_VIOLATION,
                E::Domain(_) | E::MissingPeriod { .. } | E::Precondition(_) => exit::PARSE_OR_USAGE,
                E::SolverFailure(_)
                | E::UndefinedCurvature { .. }
                | E::DegenerateElasticity { .. }
                | E::Generation { .. } => exit::SOLVER_FAILURE,
                E::InfeasibleTarget { .. } => exit::INFEASIBLE,
            },
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Action, State};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("action {action:?} is not feasible in state {state}")]
    Infeasible { state: State, action: Action },

    #[error("relative value iteration did not converge in {iters} iterations (last residual {residual:e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        /// Sup-norm residual of every iteration, oldest first.
        trajectory: Vec<f64>,
    },

    #[error("non-finite value at iteration {iter} (state index {index})")]
    Numeric { iter: usize, index: usize },

    #[error("policy does not induce a single recurrent class through {reference}: {} states cannot reach it", .states.len())]
    Multichain { reference: State, states: Vec<State> },

    #[error("stationary solve rejected: {0}")]
    Stationary(String),

    #[error("brute-force search over {count} policies exceeds the limit of {limit}; validate with relative value iteration only")]
    TooLarge { count: u128, limit: u128 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain { .. }
            | Error::TooLarge { .. }
            | Error::Json { .. } => 2,
            Error::NonConvergence { .. } | Error::Numeric { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

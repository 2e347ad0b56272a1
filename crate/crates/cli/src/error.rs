use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Model(#[from] incentive_net::Error),
}

pub type CliResult<T> = Result<T, CliError>;

/// Body of the JSON object written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use incentive_net::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Csv(_) | CliError::Json(_) => "output",
            CliError::Model(e) => match e {
                E::NonConvergence { .. } => "non_convergence",
                E::Infeasible(_) => "infeasible",
                E::EdgeListParse { .. } | E::InvalidEdge(..) => "topology",
                _ => "model",
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        use incentive_net::Error as E;
        let detail = match self {
            CliError::Model(E::NonConvergence {
                iterations,
                last_change,
                ..
            }) => Some(serde_json::json!({ "iterations": iterations, "last_change": last_change })),
            CliError::Model(E::Infeasible(slacks)) => serde_json::to_value(slacks).ok(),
            _ => None,
        };
        ErrorReport {
            kind: self.kind(),
            message: self.to_string(),
            detail,
        }
    }

    /// Process exit status: 2 for bad input, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Model(incentive_net::Error::EdgeListParse { .. } | incentive_net::Error::InvalidEdge(..)) => 2,
            _ => 1,
        }
    }
}

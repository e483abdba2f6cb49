//! Command-line and HTTP front ends for the loop-grafting pipeline.

pub mod api;
pub mod commands;
pub mod input;

use loopgraft_core::dynamics::DynamicsError;
use loopgraft_core::orchestration::OrchestrationError;
use loopgraft_core::structure_io::StructureError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Job(String),
    #[error(transparent)]
    Orchestration(#[from] OrchestrationError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for missing entries, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Structure(StructureError::NotFound(_))
            | CliError::Orchestration(OrchestrationError::Structure(StructureError::NotFound(_))) => 3,
            _ => 1,
        }
    }
}

//! Phase-gated analysis sessions, persistence and background grafting jobs.

mod config;
mod jobs;
mod persist;
mod provider;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::grafting::GraftError;
use crate::loop_geometry::GeometryError;
use crate::loop_model::LoopError;
use crate::secondary_structure::SsError;
use crate::structure_io::StructureError;

pub use config::Config;
pub use jobs::{Job, JobKind, JobState, SessionManager, StoredModel};
pub use persist::{SessionDocument, SCHEMA_VERSION};
pub use provider::{ArchiveProvider, MemoryProvider, StructureProvider};
pub use session::{
    Artifact, ConfirmedPairing, CorrelationView, FlexibilityView, GeometryView, ProteinState, Session, SsOverride,
};

#[derive(Debug, Error)]
pub enum OrchestrationError {
    #[error("gate not satisfied: {0}")]
    GateUnsatisfied(String),
    #[error("no graft specs to run")]
    EmptySpecs,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown job {0:?}")]
    UnknownJob(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("invalid pairing: {0}")]
    InvalidPairing(String),
    #[error("session schema version {found:?} is not {expected}")]
    SchemaVersionMismatch { found: Option<u64>, expected: u64 },
    #[error("session document unreadable: {0}")]
    Persistence(String),
    #[error("structure {pdb_id} changed since the session was saved")]
    StructureChanged { pdb_id: String },
    #[error("job transition {from:?} -> {to:?} not allowed")]
    InvalidJobTransition { from: JobState, to: JobState },
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    SecondaryStructure(#[from] SsError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Graft(#[from] GraftError),
}

/// Workflow phases in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Secondary structure review and adjustment.
    P1,
    /// Loop exploration and triage.
    P2,
    /// Flexibility analysis.
    P3,
    /// Motion correlation.
    P4,
    /// Loop pairing.
    P5,
    /// Grafting and model selection.
    P6,
}

impl Phase {
    pub const ALL: [Phase; 6] = [Phase::P1, Phase::P2, Phase::P3, Phase::P4, Phase::P5, Phase::P6];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            Phase::P1 => "secondary structure",
            Phase::P2 => "loop exploration",
            Phase::P3 => "flexibility",
            Phase::P4 => "motion correlation",
            Phase::P5 => "pairing",
            Phase::P6 => "grafting",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index() + 1)
    }
}

impl FromStr for Phase {
    type Err = OrchestrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim().trim_start_matches(['P', 'p']);
        match digits.parse::<usize>() {
            Ok(n @ 1..=6) => Ok(Phase::ALL[n - 1]),
            _ => Err(OrchestrationError::GateUnsatisfied(format!("no phase {s:?}"))),
        }
    }
}

/// Which protein of a session an operation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Scaffold,
    Insert,
}

impl FromStr for Role {
    type Err = OrchestrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scaffold" => Ok(Role::Scaffold),
            "insert" => Ok(Role::Insert),
            _ => Err(OrchestrationError::InvalidPairing(format!("unknown role {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_parsing_and_order() {
        assert_eq!("P3".parse::<Phase>().unwrap(), Phase::P3);
        assert_eq!("6".parse::<Phase>().unwrap(), Phase::P6);
        assert!("P7".parse::<Phase>().is_err());
        assert!(Phase::P2 < Phase::P5);
        assert_eq!(Phase::P4.to_string(), "P4");
        assert_eq!(serde_json::to_string(&Phase::P1).unwrap(), "\"P1\"");
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::provider::StructureProvider;
use super::session::{ConfirmedPairing, ProteinState, Session, SsOverride};
use super::{OrchestrationError, Phase, Role};
use crate::grafting::GraftSpec;
use crate::loop_model::{set_triage_in_place, TriageState};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub pdb_id: String,
    pub chain: char,
    /// Digest of the structure file; coordinates are not embedded.
    pub sha256: String,
    #[serde(default)]
    pub overrides: Vec<SsOverride>,
    #[serde(default)]
    pub custom_loops: Vec<(i32, i32)>,
}

/// Decision state of a session. Unknown fields are ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub schema_version: u64,
    pub id: String,
    pub scaffold: ProteinRecord,
    pub insert: ProteinRecord,
    pub phase: Phase,
    pub completion: BTreeMap<Phase, bool>,
    #[serde(default)]
    pub triage: BTreeMap<String, TriageState>,
    #[serde(default)]
    pub pairings: Vec<ConfirmedPairing>,
    #[serde(default)]
    pub graft_specs: Vec<GraftSpec>,
    #[serde(default)]
    pub model_ids: Vec<String>,
}

fn record(p: &ProteinState) -> ProteinRecord {
    ProteinRecord {
        pdb_id: p.pdb_id.clone(),
        chain: p.chain_id,
        sha256: p.sha256.clone(),
        overrides: p.overrides.clone(),
        custom_loops: p.custom_loops.clone(),
    }
}

impl Session {
    pub fn to_document(&self) -> SessionDocument {
        SessionDocument {
            schema_version: SCHEMA_VERSION,
            id: self.id.clone(),
            scaffold: record(&self.scaffold),
            insert: record(&self.insert),
            phase: self.phase,
            completion: self.completion.clone(),
            triage: self.scaffold.loops.states(),
            pairings: self.pairings.clone(),
            graft_specs: self.graft_specs.clone(),
            model_ids: self.model_ids.clone(),
        }
    }

    pub fn save(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.to_document()).expect("session document serializes")
    }

    /// Rebuilds a session from saved bytes, reloading structures through `provider`.
    pub fn load(bytes: &[u8], provider: &dyn StructureProvider) -> Result<Self, OrchestrationError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| OrchestrationError::Persistence(e.to_string()))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64());
        if found != Some(SCHEMA_VERSION) {
            return Err(OrchestrationError::SchemaVersionMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let doc: SessionDocument =
            serde_json::from_value(value).map_err(|e| OrchestrationError::Persistence(e.to_string()))?;
        Self::from_document(doc, provider)
    }

    pub fn from_document(doc: SessionDocument, provider: &dyn StructureProvider) -> Result<Self, OrchestrationError> {
        let restore = |rec: &ProteinRecord, role: Role| -> Result<ProteinState, OrchestrationError> {
            let mut p = ProteinState::load(provider, role, &rec.pdb_id, rec.chain)?;
            if p.sha256 != rec.sha256 {
                return Err(OrchestrationError::StructureChanged {
                    pdb_id: rec.pdb_id.clone(),
                });
            }
            p.overrides = rec.overrides.clone();
            p.custom_loops = rec.custom_loops.clone();
            Ok(p)
        };
        let scaffold = restore(&doc.scaffold, Role::Scaffold)?;
        let insert = restore(&doc.insert, Role::Insert)?;
        let mut s = Session::from_states(doc.id, scaffold, insert);
        s.replay_overrides()?;
        for (id, state) in &doc.triage {
            set_triage_in_place(&mut s.scaffold.loops, id, *state)?;
        }
        s.pairings = doc.pairings;
        s.graft_specs = doc.graft_specs;
        s.model_ids = doc.model_ids;
        s.completion = doc.completion;
        s.phase = doc.phase;
        if let Some(why) = s.gate_failure(s.phase) {
            return Err(OrchestrationError::GateUnsatisfied(why));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestration::session::tests::{provider, session};
    use crate::secondary_structure::SsClass;

    fn edited() -> Session {
        let mut s = session();
        s.override_ss(
            Role::Scaffold,
            SsOverride {
                start: 13,
                end: 14,
                class: SsClass::E,
            },
        )
        .unwrap();
        s.override_ss(
            Role::Insert,
            SsOverride {
                start: 2,
                end: 3,
                class: SsClass::C,
            },
        )
        .unwrap();
        let ids: Vec<String> = s.scaffold.loops.loops().map(|l| l.id.clone()).collect();
        s.set_triage(&ids[0], TriageState::Candidate).unwrap();
        s.set_triage(&ids[1], TriageState::Unsuitable).unwrap();
        s.add_custom_loop(Role::Scaffold, 40, 43).unwrap();
        s.accept_default_pairings().unwrap();
        s.advance_phase(Phase::P6).unwrap();
        s
    }

    #[test]
    fn save_load_round_trip() {
        let s = edited();
        let bytes = s.save();
        let t = Session::load(&bytes, &provider()).unwrap();
        assert_eq!(t.to_document(), s.to_document());
        assert_eq!(t.scaffold.assignment, s.scaffold.assignment);
        assert_eq!(t.scaffold.loops.states(), s.scaffold.loops.states());
        assert_eq!(t.phase, Phase::P6);
    }

    #[test]
    fn truncated_document_rejected() {
        let bytes = edited().save();
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 2] {
            let err = Session::load(&bytes[..cut], &provider()).unwrap_err();
            assert!(matches!(
                err,
                OrchestrationError::Persistence(_) | OrchestrationError::SchemaVersionMismatch { .. }
            ));
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut v: serde_json::Value = serde_json::from_slice(&edited().save()).unwrap();
        v["schema_version"] = 2.into();
        let err = Session::load(&serde_json::to_vec(&v).unwrap(), &provider()).unwrap_err();
        assert!(matches!(
            err,
            OrchestrationError::SchemaVersionMismatch {
                found: Some(2),
                expected: 1
            }
        ));
    }

    #[test]
    fn unknown_fields_tolerated() {
        let s = edited();
        let mut v: serde_json::Value = serde_json::from_slice(&s.save()).unwrap();
        v["ui_layout"] = serde_json::json!({"tabs": [1, 2]});
        v["scaffold"]["color"] = "red".into();
        let t = Session::load(&serde_json::to_vec(&v).unwrap(), &provider()).unwrap();
        assert_eq!(t.to_document(), s.to_document());
    }

    #[test]
    fn changed_structure_detected() {
        let s = edited();
        let p = provider();
        let other = crate::builder::layout_structure("1SCF", 'A', 1, &"H".repeat(30));
        p.insert("1scf", crate::structure_io::write_pdb(&other)).unwrap();
        assert!(matches!(
            Session::load(&s.save(), &p),
            Err(OrchestrationError::StructureChanged { .. })
        ));
    }
}

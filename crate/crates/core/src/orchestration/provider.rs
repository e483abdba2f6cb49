use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::structure_io::{normalize_pdb_id, parse_pdb, Archive, Structure, StructureError};

/// Source of raw structure files by PDB id.
pub trait StructureProvider: Send + Sync {
    /// Raw legacy-PDB bytes for `pdb_id`.
    fn fetch_bytes(&self, pdb_id: &str) -> Result<Vec<u8>, StructureError>;

    fn load(&self, pdb_id: &str) -> Result<(Structure, Vec<u8>), StructureError> {
        let bytes = self.fetch_bytes(pdb_id)?;
        let mut s = parse_pdb(&bytes)?;
        s.pdb_id = normalize_pdb_id(pdb_id)?.to_ascii_uppercase();
        Ok((s, bytes))
    }
}

/// Remote archive with a local file cache.
pub struct ArchiveProvider(pub Archive);

impl StructureProvider for ArchiveProvider {
    fn fetch_bytes(&self, pdb_id: &str) -> Result<Vec<u8>, StructureError> {
        self.0.fetch_bytes(pdb_id)
    }
}

/// In-memory structures keyed by normalized id.
#[derive(Default, Clone)]
pub struct MemoryProvider {
    files: Arc<RwLock<HashMap<String, Vec<u8>>>>,
}

impl MemoryProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, pdb_id: &str, bytes: impl Into<Vec<u8>>) -> Result<(), StructureError> {
        let id = normalize_pdb_id(pdb_id)?;
        self.files
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, bytes.into());
        Ok(())
    }
}

impl StructureProvider for MemoryProvider {
    fn fetch_bytes(&self, pdb_id: &str) -> Result<Vec<u8>, StructureError> {
        let id = normalize_pdb_id(pdb_id)?;
        self.files
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
            .ok_or(StructureError::NotFound(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::layout_structure;
    use crate::structure_io::write_pdb;

    #[test]
    fn memory_provider_round_trip() {
        let p = MemoryProvider::new();
        let s = layout_structure("1ABC", 'A', 1, "HHHHHHCCCEEEEE");
        p.insert("1abc", write_pdb(&s)).unwrap();
        let (loaded, _) = p.load("1ABC").unwrap();
        assert_eq!(loaded.pdb_id, "1ABC");
        assert_eq!(loaded.chains[0].residues.len(), 14);
        assert!(matches!(p.load("9xyz"), Err(StructureError::NotFound(_))));
    }
}

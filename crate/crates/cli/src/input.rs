use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use loopgraft_core::orchestration::{ArchiveProvider, Config, MemoryProvider, ProteinState, Role, StructureProvider};
use loopgraft_core::structure_io::{normalize_pdb_id, StructureError};

use crate::CliError;

/// `<pdb id or file>:<chain>`, e.g. `1isp:A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProteinArg {
    pub source: String,
    pub chain: char,
}

impl FromStr for ProteinArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (source, chain) = s
            .rsplit_once(':')
            .ok_or_else(|| format!("expected <id>:<chain>, got {s:?}"))?;
        let mut cs = chain.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) if !source.is_empty() => Ok(Self {
                source: source.to_string(),
                chain: c,
            }),
            _ => Err(format!("expected <id>:<chain>, got {s:?}")),
        }
    }
}

pub fn parse_chain(s: &str) -> Result<char, String> {
    let mut cs = s.chars();
    match (cs.next(), cs.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("chain must be a single character, got {s:?}")),
    }
}

/// Local files first, then the configured archive and its cache.
pub struct LocalFirstProvider {
    local: MemoryProvider,
    archive: ArchiveProvider,
}

impl LocalFirstProvider {
    pub fn new(config: &Config) -> Self {
        Self {
            local: MemoryProvider::new(),
            archive: ArchiveProvider(config.archive()),
        }
    }

    /// Registers `source` if it names a file and returns the id to load it by.
    pub fn register(&self, source: &str) -> Result<String, CliError> {
        let path = Path::new(source);
        if !path.is_file() {
            return Ok(normalize_pdb_id(source)?);
        }
        let bytes = std::fs::read(path).map_err(StructureError::Io)?;
        let id = id_for_file(path, &bytes)?;
        self.local.insert(&id, bytes)?;
        Ok(id)
    }
}

impl StructureProvider for LocalFirstProvider {
    fn fetch_bytes(&self, pdb_id: &str) -> Result<Vec<u8>, StructureError> {
        match self.local.fetch_bytes(pdb_id) {
            Err(StructureError::NotFound(_)) => self.archive.fetch_bytes(pdb_id),
            other => other,
        }
    }
}

/// File stem when it is a valid id, else the HEADER id code.
fn id_for_file(path: &Path, bytes: &[u8]) -> Result<String, CliError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if let Ok(id) = normalize_pdb_id(stem) {
        return Ok(id);
    }
    let header = bytes
        .split(|b| *b == b'\n')
        .find(|l| l.starts_with(b"HEADER"))
        .and_then(|l| l.get(62..66))
        .and_then(|c| std::str::from_utf8(c).ok())
        .and_then(|c| normalize_pdb_id(c).ok());
    header.ok_or_else(|| {
        CliError::Usage(format!(
            "cannot derive a PDB id for {}; name the file <id>.pdb",
            path.display()
        ))
    })
}

pub fn load_protein(config: &Config, source: &str, chain: char) -> Result<ProteinState, CliError> {
    let provider = LocalFirstProvider::new(config);
    let id = provider.register(source)?;
    Ok(ProteinState::load(&provider, Role::Scaffold, &id, chain)?)
}

pub fn shared_provider(
    config: &Config,
    sources: &[&str],
) -> Result<(Arc<dyn StructureProvider>, Vec<String>), CliError> {
    let provider = LocalFirstProvider::new(config);
    let ids = sources
        .iter()
        .map(|s| provider.register(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Arc::new(provider), ids))
}

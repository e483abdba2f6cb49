use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use super::{parse_pdb, Structure, StructureError, StructureSource};

pub const DEFAULT_ARCHIVE_URL: &str = "https://files.rcsb.org/download";

/// Lowercases and validates a four-character archive identifier.
pub fn normalize_pdb_id(id: &str) -> Result<String, StructureError> {
    let id = id.trim().to_ascii_lowercase();
    let bytes = id.as_bytes();
    let valid = bytes.len() == 4 && bytes[0].is_ascii_digit() && bytes[1..].iter().all(|b| b.is_ascii_alphanumeric());
    if valid {
        Ok(id)
    } else {
        Err(StructureError::InvalidId(id))
    }
}

/// Remote structure archive with an on-disk cache keyed by lowercase id.
#[derive(Debug, Clone)]
pub struct Archive {
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub retries: u32,
    pub timeout: Duration,
}

fn id_locks() -> &'static Mutex<HashMap<String, Arc<Mutex<()>>>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    LOCKS.get_or_init(Default::default)
}

enum Attempt {
    Body(Vec<u8>),
    NotFound,
    Transport(String),
}

impl Archive {
    pub fn new(base_url: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_url: base_url.into(),
            cache_dir: cache_dir.into(),
            retries: 2,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn cache_path(&self, id: &str) -> Result<PathBuf, StructureError> {
        Ok(self.cache_dir.join(format!("{}.pdb", normalize_pdb_id(id)?)))
    }

    /// Raw bytes of an entry, from the cache when present, else downloaded and cached.
    pub fn fetch_bytes(&self, id: &str) -> Result<Vec<u8>, StructureError> {
        let id = normalize_pdb_id(id)?;
        let path = self.cache_dir.join(format!("{id}.pdb"));
        let lock = id_locks().lock().unwrap().entry(id.clone()).or_default().clone();
        let _guard = lock.lock().unwrap();

        if let Ok(bytes) = fs::read(&path) {
            return Ok(bytes);
        }
        let body = self.download(&id)?;
        fs::create_dir_all(&self.cache_dir)?;
        let tmp = path.with_extension("pdb.part");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&body)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(body)
    }

    pub fn fetch_structure(&self, id: &str) -> Result<Structure, StructureError> {
        let bytes = self.fetch_bytes(id)?;
        let mut s = parse_pdb(&bytes)?;
        s.pdb_id = normalize_pdb_id(id)?.to_ascii_uppercase();
        s.source = StructureSource::RemoteFetch;
        Ok(s)
    }

    fn download(&self, id: &str) -> Result<Vec<u8>, StructureError> {
        let url = format!(
            "{}/{}.pdb",
            self.base_url.trim_end_matches('/'),
            id.to_ascii_uppercase()
        );
        let config = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build();
        let agent = ureq::Agent::new_with_config(config);
        let attempts = self.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match Self::attempt(&agent, &url) {
                Attempt::Body(b) => return Ok(b),
                Attempt::NotFound => return Err(StructureError::NotFound(id.to_string())),
                Attempt::Transport(msg) => {
                    log::warn!("fetch {url} attempt {attempt}/{attempts} failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(StructureError::NetworkFailure {
            attempts,
            message: last,
        })
    }

    fn attempt(agent: &ureq::Agent, url: &str) -> Attempt {
        match agent.get(url).call() {
            Ok(mut resp) => match resp.body_mut().with_config().limit(64 << 20).read_to_vec() {
                Ok(body) => Attempt::Body(body),
                Err(e) => Attempt::Transport(e.to_string()),
            },
            Err(ureq::Error::StatusCode(404)) => Attempt::NotFound,
            Err(e) => Attempt::Transport(e.to_string()),
        }
    }

    /// Cache directory used when nothing is configured.
    pub fn default_cache_dir() -> PathBuf {
        std::env::var_os("HOME")
            .map(|h| Path::new(&h).join(".cache").join("loopgraft"))
            .unwrap_or_else(|| PathBuf::from(".loopgraft-cache"))
    }
}

impl Default for Archive {
    fn default() -> Self {
        Self::new(DEFAULT_ARCHIVE_URL, Self::default_cache_dir())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_normalization() {
        assert_eq!(normalize_pdb_id("1ISP").unwrap(), "1isp");
        assert_eq!(normalize_pdb_id(" 1g66 ").unwrap(), "1g66");
        assert!(normalize_pdb_id("isp1").is_err());
        assert!(normalize_pdb_id("1is").is_err());
        assert!(normalize_pdb_id("1is_").is_err());
    }

    #[test]
    fn cached_entry_is_served_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let body = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000  1.00 20.00           C\n";
        fs::write(dir.path().join("1abc.pdb"), body).unwrap();
        let archive = Archive::new("http://127.0.0.1:9", dir.path());
        let s = archive.fetch_structure("1ABC").unwrap();
        assert_eq!(s.pdb_id, "1ABC");
        assert_eq!(s.source, StructureSource::RemoteFetch);
    }
}

use std::path::PathBuf;
use std::time::Duration;

use crate::grafting::{AdapterConfig, DEFAULT_WINDOW};
use crate::structure_io::{Archive, DEFAULT_ARCHIVE_URL};

pub const ENV_ARCHIVE_URL: &str = "LOOPGRAFT_ARCHIVE_URL";
pub const ENV_CACHE_DIR: &str = "LOOPGRAFT_CACHE_DIR";
pub const ENV_ADAPTER_CMD: &str = "LOOPGRAFT_ADAPTER_CMD";
pub const ENV_ADAPTER_TIMEOUT: &str = "LOOPGRAFT_ADAPTER_TIMEOUT_SECS";
pub const ENV_JOB_THREADS: &str = "LOOPGRAFT_JOB_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Entries are fetched from `{archive_url}/{ID}.pdb`.
    pub archive_url: String,
    pub cache_dir: PathBuf,
    pub adapter: Option<AdapterConfig>,
    /// Worker threads used to evaluate graft variants.
    pub job_threads: usize,
    pub variant_window: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            archive_url: DEFAULT_ARCHIVE_URL.to_string(),
            cache_dir: Archive::default_cache_dir(),
            adapter: None,
            job_threads: std::thread::available_parallelism().map_or(2, |n| n.get()),
            variant_window: DEFAULT_WINDOW,
        }
    }
}

impl Config {
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Defaults overridden by whatever `lookup` returns for the known variables.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Self {
        let mut c = Self::default();
        if let Some(v) = lookup(ENV_ARCHIVE_URL).filter(|v| !v.is_empty()) {
            c.archive_url = v;
        }
        if let Some(v) = lookup(ENV_CACHE_DIR).filter(|v| !v.is_empty()) {
            c.cache_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_JOB_THREADS).and_then(|v| v.parse::<usize>().ok()) {
            c.job_threads = v.max(1);
        }
        c.adapter = lookup(ENV_ADAPTER_CMD).and_then(|v| AdapterConfig::from_command_line(&v));
        if let (Some(a), Some(secs)) = (
            c.adapter.as_mut(),
            lookup(ENV_ADAPTER_TIMEOUT).and_then(|v| v.parse::<u64>().ok()),
        ) {
            a.timeout = Duration::from_secs(secs);
        }
        if let Some(a) = c.adapter.as_mut() {
            a.max_concurrent = c.job_threads;
        }
        c
    }

    pub fn archive(&self) -> Archive {
        Archive::new(self.archive_url.clone(), self.cache_dir.clone())
    }
}

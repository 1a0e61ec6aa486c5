//! Run manifests: a `key = value` record written next to every output.
//!
//! The manifest is written before any result file and rewritten once the
//! results exist, so an interrupted run leaves `status = running` behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

/// Manifest path for an output file: `<output>.manifest`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("started", unix_time());
        m.set("status", "running");
        m
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Echoes a key set under `prefix.` (or bare when `prefix` is empty).
    pub fn echo(&mut self, prefix: &str, keys: &BTreeMap<String, String>) {
        for (k, v) in keys {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            self.set(&key, v);
        }
    }

    pub fn finish(&mut self) {
        self.set("finished", unix_time());
        self.set("status", "ok");
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render())
            .map_err(|e| CliError::runtime(format!("cannot write manifest {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m = Self::default();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                m.set(k.trim(), v.trim());
            }
        }
        Ok(m)
    }
}

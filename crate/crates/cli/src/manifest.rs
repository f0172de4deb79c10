//! Run manifests: the resolved configuration plus content hashes of every
//! input and output, so identical manifests certify identical runs.

use crate::config::Config;
use cavity_core::Result;
use std::fmt::Write as _;
use std::path::Path;

/// FNV-1a over the byte content.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, config: &Config) -> Manifest {
        let mut lines = vec![
            format!("tool = cavity {}", env!("CARGO_PKG_VERSION")),
            format!("experiment = {experiment}"),
        ];
        for (k, v) in config.entries() {
            lines.push(format!("config.{k} = {v}"));
        }
        Manifest { lines }
    }

    pub fn record_input(&mut self, label: &str, bytes: &[u8]) {
        self.lines.push(format!(
            "input.{label} = fnv64:{:016x}",
            content_hash(bytes)
        ));
    }

    pub fn record_output(&mut self, label: &str, bytes: &[u8]) {
        self.lines.push(format!(
            "output.{label} = fnv64:{:016x}",
            content_hash(bytes)
        ));
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = String::new();
        for line in &self.lines {
            writeln!(text, "{line}").unwrap();
        }
        std::fs::write(dir.join("manifest"), text)?;
        Ok(())
    }
}

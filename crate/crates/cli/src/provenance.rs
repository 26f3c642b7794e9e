use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const PROVENANCE_FILE: &str = "provenance.json";

/// Written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the serialized `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    /// Hashes of the inputs the command read, keyed by role.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_hash = r2d2_core::rawio::sha256_hex(&serde_json::to_vec(&config)?);
        Ok(Self {
            command,
            version: env!("R2D2_BUILD_VERSION"),
            seed,
            config_hash,
            config,
            inputs: BTreeMap::new(),
        })
    }

    pub fn input(mut self, role: &str, hash: String) -> Self {
        self.inputs.insert(role.to_string(), hash);
        self
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join(PROVENANCE_FILE);
        r2d2_core::rawio::write_json(&p, self).with_context(|| format!("writing {}", p.display()))
    }
}

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use hardy_core::MeshSummary;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// Provenance block embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub sequential: bool,
    pub mesh: Vec<MeshSummary>,
}

impl Meta {
    pub fn new<C: Serialize>(
        command: &'static str,
        config: &C,
        seed: u64,
        sequential: bool,
        mesh: Vec<MeshSummary>,
    ) -> Result<Self, CliError> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool: "hardy",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: config_hash(config)?,
            seed,
            sequential,
            mesh,
        })
    }
}

/// SHA-256 of the effective configuration serialised as compact JSON.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&Envelope { meta, body }).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

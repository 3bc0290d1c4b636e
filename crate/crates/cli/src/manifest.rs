//! Run manifests: everything needed to rerun a command bit-for-bit.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::io::{sha256_file, write_json_atomic};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    /// SHA-256 of every input file, keyed by path.
    pub input_digests: BTreeMap<String, String>,
    pub threads: usize,
    pub duration_secs: f64,
    pub exit_code: i32,
}

pub struct ManifestBuilder {
    command: String,
    config: Value,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            config: Value::Null,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, config: Value) -> &mut Self {
        self.config = config;
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(self)
    }

    pub fn write(&self, path: &Path, exit_code: i32) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: std::env::args().collect(),
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            input_digests: self.inputs.clone(),
            threads: rayon::current_num_threads(),
            duration_secs: self.started.elapsed().as_secs_f64(),
            exit_code,
        };
        write_json_atomic(path, &manifest)
    }
}

/// The given seed, or a fresh one from system entropy.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

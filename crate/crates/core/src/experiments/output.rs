//! Output artifacts: schema-tagged CSV tables, NDJSON event logs and the
//! run manifest.
//!
//! Every CSV starts with one comment line
//! `# schema=<name>/<version> config_hash=<hex> seed=<u64>` followed by the
//! header row. Numbers are written with Rust's shortest round-trip
//! formatting, so the bytes depend only on the values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical (re-serialized) config.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

/// A CSV table built in memory and written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    schema: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, schema: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            schema: schema.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self, config_hash: &str, seed: u64) -> Result<Vec<u8>> {
        let mut out = format!(
            "# schema={}/{} config_hash={config_hash} seed={seed}\n",
            self.schema, SCHEMA_VERSION
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }
}

/// CSV cell text. Floats use the shortest round-trip form, switching to
/// exponent notation for very large or small magnitudes.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_cell!(u64, u32, usize, i64, i32, bool, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

/// Builds a row of cells.
#[macro_export]
#[doc(hidden)]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::experiments::Cell::cell(&$x)),*] };
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub subcommand: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    /// `Some` for subcommands that check against a tolerance.
    pub passed: Option<bool>,
    pub outputs: Vec<OutputFile>,
    pub summary: serde_json::Value,
}

pub const SEED_RULE: &str = "replicate seed = splitmix64_finalize(domain_master + 0x9E3779B97F4A7C15 * (index + 1)); \
domain_master = splitmix64_finalize(master ^ splitmix64_finalize(domain_id)) for domains 1 particle, 2 diffusion, \
3 duality-left, 4 duality-right; each seed keys a ChaCha8 stream";

pub fn version_string() -> String {
    format!("catalytic {}", env!("CARGO_PKG_VERSION"))
}

/// Writes artifacts into one directory and records their digests.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            config_hash: config_hash.into(),
            seed,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(file);
        fs::write(&path, bytes)?;
        self.files.push(OutputFile {
            file: file.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    /// Record a file written elsewhere into this directory.
    pub fn register(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let file = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.files.push(OutputFile {
            file,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_table(&mut self, table: &Table) -> Result<PathBuf> {
        let bytes = table.to_bytes(&self.config_hash, self.seed)?;
        self.write_bytes(&format!("{}.csv", table.name), &bytes)
    }

    /// One JSON object per line; the first line is a schema record.
    pub fn write_ndjson<T: Serialize>(&mut self, file: &str, schema: &str, records: &[T]) -> Result<PathBuf> {
        let mut out = serde_json::to_vec(&serde_json::json!({
            "schema": format!("{schema}/{SCHEMA_VERSION}"),
            "config_hash": self.config_hash,
            "seed": self.seed,
        }))?;
        out.push(b'\n');
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        self.write_bytes(file, &out)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn into_files(self) -> Vec<OutputFile> {
        self.files
    }
}

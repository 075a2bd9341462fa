//! CSV tables, round-trip number formatting and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use rdsjump_core::ReactionNetwork;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Formats a float so that parsing it back yields the same bits.
///
/// Rust's `Display` and `LowerExp` both print the shortest round-trip
/// digits; exponent form is used outside a readable range.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        fmt_f64(*self)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
int_cell!(u64, i64, usize, bool);

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::output::Cell::cell(&$v)),*]
    };
}
pub(crate) use row;

/// An in-memory CSV table; rendered once so it can be hashed and written.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    rows: usize,
    sha256: String,
}

#[derive(Serialize)]
struct NetworkRecord {
    name: String,
    species: Vec<String>,
    sha256: String,
    definition: Value,
}

#[derive(Serialize)]
struct SeedRecord {
    first: u64,
    count: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command_line: &'a [String],
    subcommand: &'a str,
    seeds: Option<&'a SeedRecord>,
    network: Option<&'a NetworkRecord>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    outputs: &'a [OutputRecord],
    summary: &'a Map<String, Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Collects everything one invocation writes and stamps it into a manifest.
pub struct Session {
    argv: Vec<String>,
    subcommand: String,
    started: u128,
    seeds: Option<SeedRecord>,
    network: Option<NetworkRecord>,
    outputs: Vec<OutputRecord>,
    manifest_dir: Option<PathBuf>,
    summary: Map<String, Value>,
}

impl Session {
    pub fn new(argv: Vec<String>, subcommand: &str) -> Self {
        Session {
            argv,
            subcommand: subcommand.to_string(),
            started: unix_ms(),
            seeds: None,
            network: None,
            outputs: Vec::new(),
            manifest_dir: None,
            summary: Map::new(),
        }
    }

    pub fn seeds(&mut self, first: u64, count: u64) {
        self.seeds = Some(SeedRecord { first, count });
    }

    pub fn network(&mut self, net: &ReactionNetwork) -> Result<()> {
        let definition = serde_json::to_value(net.to_definition())?;
        let canonical = serde_json::to_vec(&definition)?;
        self.network = Some(NetworkRecord {
            name: net.name().to_string(),
            species: net.species().to_vec(),
            sha256: sha256_hex(&canonical),
            definition,
        });
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Outputs of a multi-file run go into `dir`, next to its manifest.
    pub fn use_dir(&mut self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.manifest_dir = Some(dir.to_path_buf());
        Ok(())
    }

    /// Writes `table` to `path`, or to standard output when `path` is `None`.
    pub fn emit(&mut self, path: Option<&Path>, table: &Table) -> Result<()> {
        let bytes = table.render()?;
        let Some(path) = path else {
            std::io::stdout().lock().write_all(&bytes)?;
            return Ok(());
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        let dir = self.manifest_dir.get_or_insert_with(|| {
            path.parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."))
        });
        let rel = path.strip_prefix(&*dir).unwrap_or(path);
        self.outputs.push(OutputRecord {
            path: rel.display().to_string(),
            rows: table.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Prints the summary to stderr and, if anything went to disk, writes the manifest.
    pub fn finish(self) -> Result<()> {
        if !self.summary.is_empty() {
            eprintln!("{}", serde_json::to_string(&self.summary)?);
        }
        let Some(dir) = &self.manifest_dir else {
            return Ok(());
        };
        let manifest = Manifest {
            tool: "rdsjump",
            version: env!("CARGO_PKG_VERSION"),
            command_line: &self.argv,
            subcommand: &self.subcommand,
            seeds: self.seeds.as_ref(),
            network: self.network.as_ref(),
            started_unix_ms: self.started,
            finished_unix_ms: unix_ms(),
            outputs: &self.outputs,
            summary: &self.summary,
        };
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

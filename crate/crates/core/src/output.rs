//! CSV tables and the JSON run manifest.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! `.` as decimal separator and LF line endings, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory CSV table.
#[derive(Clone, Debug)]
pub struct Table {
    columns: usize,
    text: String,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(usize),
    S(&'a str),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table { columns: header.len(), text }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        assert_eq!(cells.len(), self.columns, "row width does not match header");
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::I(i) => write!(self.text, "{i}").unwrap(),
                Cell::S(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputEntry>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Collects output files in memory so they can be written, or compared
/// against an existing manifest, in one step.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_table(&mut self, name: impl Into<String>, table: Table) {
        self.add(name, table.text.into_bytes());
    }

    pub fn entries(&self) -> Vec<OutputEntry> {
        self.files.iter().map(|(f, b)| OutputEntry { file: f.clone(), sha256: sha256_hex(b), bytes: b.len() }).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(f, _)| f == name).map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(f, _)| f.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Internal(format!("cannot serialize manifest: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Files whose recomputed checksum differs from (or is missing in) `manifest`.
pub fn verify_against(manifest: &Manifest, fresh: &OutputSet) -> Vec<String> {
    let fresh_entries = fresh.entries();
    let mut problems = Vec::new();
    for old in &manifest.outputs {
        match fresh_entries.iter().find(|e| e.file == old.file) {
            None => problems.push(format!("{}: not produced by the re-run", old.file)),
            Some(new) if new.sha256 != old.sha256 => {
                problems.push(format!("{}: checksum {} != recorded {}", old.file, new.sha256, old.sha256))
            }
            Some(_) => {}
        }
    }
    for new in &fresh_entries {
        if !manifest.outputs.iter().any(|o| o.file == new.file) {
            problems.push(format!("{}: missing from the manifest", new.file));
        }
    }
    problems
}

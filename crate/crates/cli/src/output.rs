//! Output files: CSV tables, the binary column format, JSON reports and the
//! run manifest. Every file carries the config fingerprint and seed.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Fingerprint and seed stamped into every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub fingerprint: String,
    pub seed: u64,
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Collects the files written by one command.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    stamp: Stamp,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, stamp: Stamp) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), stamp, written: Vec::new() })
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// CSV with `# fingerprint:` and `# seed:` comment lines above the header.
    pub fn csv(&mut self, name: &str, table: &Table) -> CliResult<PathBuf> {
        let mut head = format!("# fingerprint: {}\n# seed: {}\n", self.stamp.fingerprint, self.stamp.seed).into_bytes();
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(&table.columns).map_err(to_err)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(to_err)?;
        }
        head.extend(w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?);
        self.put(name, &head)
    }

    /// Pretty JSON with the stamp merged in at the top level.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            fingerprint: &'a str,
            seed: u64,
            #[serde(flatten)]
            body: &'a T,
        }
        let s = serde_json::to_string_pretty(&Stamped { fingerprint: &self.stamp.fingerprint, seed: self.stamp.seed, body: value })
            .map_err(|e| CliError::Config(format!("json: {e}")))?;
        self.put(name, (s + "\n").as_bytes())
    }

    pub fn columns(&mut self, name: &str, table: &Table) -> CliResult<PathBuf> {
        let bytes = encode_columns(&self.stamp, table);
        self.put(name, &bytes)
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<PathBuf> {
        self.put(name, body.as_bytes())
    }

    /// Written files with their SHA-256, in write order.
    pub fn digests(&self) -> CliResult<Vec<FileDigest>> {
        self.written
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                Ok(FileDigest {
                    file: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

/// Leading bytes of a column file.
pub const COLUMN_MAGIC: [u8; 8] = *b"HSPDCOL\0";
pub const COLUMN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnHeader {
    pub fingerprint: String,
    pub seed: u64,
    pub rows: usize,
    pub columns: Vec<String>,
}

/// Layout: magic, `u32` version, `u32` header length, UTF-8 JSON header,
/// then each column as `rows` little-endian `f64` values, in header order.
pub fn encode_columns(stamp: &Stamp, table: &Table) -> Vec<u8> {
    let header = ColumnHeader {
        fingerprint: stamp.fingerprint.clone(),
        seed: stamp.seed,
        rows: table.rows.len(),
        columns: table.columns.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * table.rows.len() * table.columns.len());
    out.extend_from_slice(&COLUMN_MAGIC);
    out.extend_from_slice(&COLUMN_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for k in 0..table.columns.len() {
        for row in &table.rows {
            out.extend_from_slice(&row[k].to_le_bytes());
        }
    }
    out
}

pub fn decode_columns(bytes: &[u8]) -> CliResult<(ColumnHeader, Table)> {
    let bad = |m: &str| CliError::Config(format!("column file: {m}"));
    let mut r = bytes;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if magic != COLUMN_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(word);
    if version != COLUMN_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    r.read_exact(&mut word).map_err(|_| bad("truncated header length"))?;
    let len = u32::from_le_bytes(word) as usize;
    if r.len() < len {
        return Err(bad("truncated header"));
    }
    let header: ColumnHeader = serde_json::from_slice(&r[..len]).map_err(|e| bad(&e.to_string()))?;
    r = &r[len..];
    let ncol = header.columns.len();
    if r.len() != 8 * ncol * header.rows {
        return Err(bad("payload length does not match header"));
    }
    let mut rows = vec![vec![0.0; ncol]; header.rows];
    for (i, chunk) in r.chunks_exact(8).enumerate() {
        let (k, n) = (i / header.rows, i % header.rows);
        rows[n][k] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    let table = Table { columns: header.columns.clone(), rows };
    Ok((header, table))
}

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub wall_clock_seconds: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, checks: Vec<Check>, wall_clock_seconds: f64, files: Vec<FileDigest>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            wall_clock_seconds,
            pass: checks.iter().all(|c| c.pass),
            checks,
            files,
        }
    }
}

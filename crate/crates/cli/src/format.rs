//! Deterministic number formatting, file writing and run metadata.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use jtchain::{Boundary, ModelParams};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Significant digits for floats (1..=17).
pub const PRECISION_VAR: &str = "JTCHAIN_PRECISION";
/// Worker threads for point evaluation. Output never depends on it.
pub const THREADS_VAR: &str = "JTCHAIN_THREADS";
/// Fixed unix timestamp for the metadata sidecar.
pub const EPOCH_VAR: &str = "SOURCE_DATE_EPOCH";

pub const DEFAULT_PRECISION: usize = 17;

pub fn precision_from_env() -> CliResult<usize> {
    match std::env::var(PRECISION_VAR) {
        Err(_) => Ok(DEFAULT_PRECISION),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(p) if (1..=17).contains(&p) => Ok(p),
            _ => Err(CliError::config(format!("{PRECISION_VAR} must be an integer in 1..=17, got '{v}'"))),
        },
    }
}

pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

/// Runs `f` on a pool sized by [`THREADS_VAR`] (rayon's default otherwise).
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> CliResult<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from_env()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Float formatter with a fixed number of significant digits.
#[derive(Debug, Clone, Copy)]
pub struct Fmt {
    pub digits: usize,
}

impl Default for Fmt {
    fn default() -> Self {
        Self { digits: DEFAULT_PRECISION }
    }
}

impl Fmt {
    pub fn from_env() -> CliResult<Self> {
        Ok(Self { digits: precision_from_env()? })
    }

    /// Scientific notation; `inf`, `-inf` and `nan` for non-finite values.
    pub fn float(&self, x: f64) -> String {
        if x.is_nan() {
            "nan".into()
        } else if x.is_infinite() {
            if x > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            }
        } else {
            format!("{:.*e}", self.digits - 1, x)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// In-memory CSV table written in one go.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsEcho {
    pub n_sites: usize,
    pub omega0: f64,
    pub t: f64,
    pub g: f64,
    pub omega: f64,
    pub boundary: &'static str,
}

pub fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::Open => "open",
        Boundary::Custom => "custom",
    }
}

impl From<&ModelParams> for ParamsEcho {
    fn from(p: &ModelParams) -> Self {
        Self {
            n_sites: p.n_sites,
            omega0: p.omega0,
            t: p.t,
            g: p.g,
            omega: p.omega,
            boundary: boundary_name(p.boundary),
        }
    }
}

/// Sidecar describing how a set of CSVs was produced.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub timestamp: u64,
    pub precision: usize,
    pub base: ParamsEcho,
    pub axis: String,
    pub files: Vec<String>,
    pub assumptions: Vec<String>,
    pub overrides: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(config_bytes: &[u8], base: &ModelParams, axis: &str, fmt: Fmt) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(config_bytes),
            timestamp: timestamp(),
            precision: fmt.digits,
            base: base.into(),
            axis: axis.to_string(),
            files: Vec::new(),
            assumptions: Vec::new(),
            overrides: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("metadata serializes");
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}

/// Unix seconds, or [`EPOCH_VAR`] when set.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var(EPOCH_VAR).ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn meta_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.meta.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let f = Fmt::default();
        for x in [0.1, 1.0 / 3.0, 0.03363435515341401, 1e-300, -2.5e17, 0.0] {
            assert_eq!(f.float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(f.float(f64::INFINITY), "inf");
        assert_eq!(f.float(f64::NEG_INFINITY), "-inf");
        assert_eq!(f.float(f64::NAN), "nan");
        assert_eq!(Fmt { digits: 3 }.float(0.123456), "1.23e-1");
    }

    #[test]
    fn table_bytes_are_stable() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec!["1".into(), "inf".into()]);
        assert_eq!(t.to_bytes(), b"a,b\n1,inf\n");
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}

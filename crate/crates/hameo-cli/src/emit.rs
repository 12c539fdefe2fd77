//! Result emission: every subcommand reports through this module so that
//! outputs share one reproducibility contract.
//!
//! * JSON documents carry a `config_hash` (16 hex digits of SHA-256 over
//!   the canonical run description) and the `seed`, and contain no
//!   timestamps, so identical runs produce byte-identical payloads.
//! * CSV tables open with a `# config <hash> seed <n>` comment line,
//!   then a column-header line, then one row per record. Floats are
//!   written in scientific notation with the shortest round-trip
//!   mantissa, which plotting tools parse directly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hameo::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Reproducibility stamp embedded in every output: a truncated SHA-256
/// of the canonical run description plus the seed in force.
#[derive(Clone, Debug, Serialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    /// Hash the canonical description of the run (config JSON plus any
    /// subcommand parameters folded in by the caller) together with the
    /// seed. Truncated to 64 bits of hex: collision resistance is not
    /// required, only a stable run fingerprint.
    pub fn new(canonical: &str, seed: u64) -> Stamp {
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hasher.update(seed.to_le_bytes());
        let digest = hasher.finalize();
        let mut hash = String::with_capacity(16);
        for byte in &digest[..8] {
            write!(hash, "{byte:02x}").expect("write to String cannot fail");
        }
        Stamp { config_hash: hash, seed }
    }
}

/// One CSV cell. Callers keep natural types; formatting is centralized
/// here so every table renders numbers the same way.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    Float(f64),
    /// A float that may be absent (e.g. the first row of a refinement
    /// ladder has no observed order). Renders as an empty cell.
    OptFloat(Option<f64>),
    Str(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:e}"),
            Cell::OptFloat(Some(v)) => format!("{v:e}"),
            Cell::OptFloat(None) => String::new(),
            Cell::Str(s) => s.clone(),
        }
    }
}

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("{}: {err}", path.display()),
    ))
}

/// Serialize `value` as pretty JSON with a trailing newline and write it
/// to `out`, or to stdout when no path is given.
pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(format!("serializing report: {e}"))))?;
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| io_err(path, e))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Write a stamped CSV table. The first line is a `#` comment embedding
/// the config hash and seed, the second line names the columns.
pub fn write_csv(path: &Path, stamp: &Stamp, columns: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut text = format!(
        "# config {} seed {}\n{}\n",
        stamp.config_hash,
        stamp.seed,
        columns.join(",")
    );
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let rendered: Vec<String> = row.iter().map(Cell::render).collect();
        text.push_str(&rendered.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Resolve an `--out` path into (JSON path, CSV path). A `.csv` path
/// puts the table there and the JSON document beside it; any other path
/// receives the JSON with the CSV as a `.csv` sibling. No path: JSON to
/// stdout, no CSV (stdout stays a single machine-readable document).
pub fn split_out(out: Option<&Path>) -> (Option<PathBuf>, Option<PathBuf>) {
    match out {
        None => (None, None),
        Some(p) if p.extension().and_then(|e| e.to_str()) == Some("csv") => {
            (Some(p.with_extension("json")), Some(p.to_path_buf()))
        }
        Some(p) => (Some(p.to_path_buf()), Some(p.with_extension("csv"))),
    }
}

/// Emit a JSON report plus, when a report path is given, the companion
/// CSV next to it.
pub fn emit_report<T: Serialize>(
    out: Option<&Path>,
    value: &T,
    stamp: &Stamp,
    columns: &[&str],
    rows: &[Vec<Cell>],
) -> Result<()> {
    let (json_path, csv_path) = split_out(out);
    write_json(json_path.as_deref(), value)?;
    if let Some(path) = csv_path {
        write_csv(&path, stamp, columns, rows)?;
    }
    Ok(())
}

//! Ledger output as CSV (one column per quantity) or JSON lines.

use std::path::Path;

use bdns_core::{EntropyLedger, LedgerRow};

use crate::error::{CliError, Result};

pub fn write_csv(path: &Path, ledger: &EntropyLedger, dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LedgerRow::columns(dim))?;
    for row in &ledger.rows {
        w.write_record(row.values().iter().map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_jsonl(path: &Path, ledger: &EntropyLedger) -> Result<()> {
    let mut text = String::new();
    for row in &ledger.rows {
        text.push_str(&serde_json::to_string(row).map_err(|source| CliError::Json { path: path.into(), source })?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes CSV unless the extension is `.jsonl`.
pub fn write(path: &Path, ledger: &EntropyLedger, dim: usize) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => write_jsonl(path, ledger),
        _ => write_csv(path, ledger, dim),
    }
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("{}: bad number `{s}`", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    Ok((header, rows))
}

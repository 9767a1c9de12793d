//! Deterministic serialization: shortest round-trip floats, RFC 4180 CSV
//! and pretty JSON.

use std::path::Path;

use num_bigint::BigInt;
use num_complex::Complex64;
use serde_json::Value;

use crate::error::CliError;

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `[re, im]`.
pub fn complex_json(z: Complex64) -> Value {
    serde_json::json!([z.re, z.im])
}

/// Integer as a JSON number when it fits in `i64`, else as a string.
pub fn big_json(x: &BigInt) -> Value {
    match i64::try_from(x) {
        Ok(v) => Value::from(v),
        Err(_) => Value::String(x.to_string()),
    }
}

/// CSV text with a header row.
pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io { path: String::from("csv"), message: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| CliError::Io { path: String::from("csv"), message: e.to_string() })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error, p: &Path| CliError::Io { path: p.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io(e, &path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes CSV text to `dir/name`.
pub fn write_csv(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    write(dir, name, text)
}

/// Writes pretty JSON to `dir/name`.
pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io { path: name.to_string(), message: e.to_string() })?;
    s.push('\n');
    write(dir, name, &s)
}

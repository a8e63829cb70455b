//! Delimited-text input.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use reclink::comparison::{DataFile, FieldKind, Record, Value};

use crate::config::FieldConfig;

/// A row that could not be typed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub file: DataFile,
    pub rejects: Vec<Reject>,
}

fn coerce(raw: &str, field: &FieldConfig) -> std::result::Result<Value, String> {
    let raw = raw.trim();
    match field.spec.kind {
        FieldKind::Numeric => raw
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("field `{}`: `{raw}` is not an integer", field.spec.name)),
        FieldKind::String | FieldKind::Categorical => Ok(Value::Text(raw.to_string())),
    }
}

/// Reads a headed CSV file. Rows whose values cannot be typed are reported,
/// not fatal; a missing column, unreadable file or an input without rows is.
pub fn ingest(path: &Path, fields: &[FieldConfig], id_column: Option<&str>, delimiter: char) -> Result<Ingested> {
    if !delimiter.is_ascii() {
        bail!("delimiter must be an ASCII character");
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{}: no column `{name}`", path.display()))
    };
    let columns = fields.iter().map(|f| find(f.column())).collect::<Result<Vec<_>>>()?;
    let id_col = id_column.map(find).transpose()?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.position().map_or(row as u64 + 2, |p| p.line());
        let id = match id_col {
            Some(c) => rec.get(c).unwrap_or("").trim().to_string(),
            None => (row + 1).to_string(),
        };
        if id.is_empty() {
            rejects.push(Reject {
                line,
                reason: "empty record id".into(),
            });
            continue;
        }
        let values: std::result::Result<Vec<Value>, String> = fields
            .iter()
            .zip(&columns)
            .map(|(f, &c)| coerce(rec.get(c).unwrap_or(""), f))
            .collect();
        match values {
            Ok(values) => {
                if !seen.insert(id.clone()) {
                    bail!("{}: duplicate record id `{id}` on line {line}", path.display());
                }
                records.push(Record { id, values });
            }
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    }
    if records.is_empty() && rejects.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    if records.is_empty() {
        bail!("{}: every row was rejected", path.display());
    }
    Ok(Ingested {
        file: DataFile::new(records),
        rejects,
    })
}

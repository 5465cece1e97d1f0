//! On-disk formats.
//!
//! Distribution file (UTF-8 JSON):
//!
//! ```text
//! {"variables":[{"name":"A","cardinality":2},...],"probabilities":[...]}
//! ```
//!
//! `probabilities` is the row-major table, last variable fastest. Numbers are written
//! in shortest round-trip form, so a write/read cycle is bit-exact.
//!
//! Dataset file (CSV): a header row with the variable names in order, then one row
//! per sample holding decimal category indices.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Provenance, SampleDataset};
use crate::dist::{JointDistribution, VariableSpec};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistFile {
    variables: Vec<VariableSpec>,
    probabilities: Vec<f64>,
}

pub fn dist_to_json(dist: &JointDistribution) -> String {
    let file = DistFile {
        variables: dist.variables().to_vec(),
        probabilities: dist.probabilities().to_vec(),
    };
    let mut s = serde_json::to_string(&file).expect("distribution serializes");
    s.push('\n');
    s
}

pub fn dist_from_json(text: &str) -> Result<JointDistribution> {
    let file: DistFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    JointDistribution::new(file.variables, file.probabilities)
}

pub fn read_dist(path: impl AsRef<Path>) -> Result<JointDistribution> {
    dist_from_json(&fs::read_to_string(path)?)
}

pub fn write_dist(dist: &JointDistribution, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dist_to_json(dist))?;
    Ok(())
}

pub fn data_to_csv(data: &SampleDataset) -> String {
    let mut out = String::new();
    let names: Vec<&str> = data.variables().iter().map(|v| v.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses a dataset. With a `schema`, the header must list exactly its names in order
/// and indices are range-checked against its cardinalities; without one, each
/// cardinality is inferred as `max index + 1`.
pub fn data_from_csv(text: &str, schema: Option<&[VariableSpec]>) -> Result<SampleDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header must list variable names".into(),
        });
    }
    if let Some(schema) = schema {
        let expected: Vec<&str> = schema.iter().map(|v| v.name.as_str()).collect();
        if header.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("header {header:?} does not match variables {expected:?}"),
            });
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, rows.len() + 2))?;
        let line = record.position().map_or(rows.len() + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(header.len());
        for (col, field) in record.iter().enumerate() {
            let value: usize = field.parse().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("`{field}` is not a category index"),
            })?;
            if let Some(schema) = schema {
                if value >= schema[col].cardinality {
                    return Err(Error::Parse {
                        line,
                        column: col + 1,
                        message: format!(
                            "index {value} out of range for `{}` (cardinality {})",
                            schema[col].name, schema[col].cardinality
                        ),
                    });
                }
            }
            row.push(value);
        }
        rows.push(row);
    }

    let variables = match schema {
        Some(s) => s.to_vec(),
        None => header
            .iter()
            .enumerate()
            .map(|(col, name)| {
                let card = rows.iter().map(|r| r[col] + 1).max().unwrap_or(1);
                VariableSpec::new(name.clone(), card)
            })
            .collect(),
    };
    SampleDataset::new(variables, rows, Provenance::FixedN, 0)
}

fn csv_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 1,
        message: e.to_string(),
    }
}

pub fn read_data(path: impl AsRef<Path>, schema: Option<&[VariableSpec]>) -> Result<SampleDataset> {
    data_from_csv(&fs::read_to_string(path)?, schema)
}

pub fn write_data(data: &SampleDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, data_to_csv(data))?;
    Ok(())
}

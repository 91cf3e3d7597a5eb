//! Machine-readable result records.
//!
//! Every command emits one record carrying its named outputs, the toolkit
//! version and a digest of everything that influenced the run. Both encodings
//! (JSON-lines and CSV) print numbers as shortest round-trip decimals, so the
//! two formats carry byte-identical values; non-finite values appear as the
//! strings `inf`/`-inf`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::trace_io::{write_file, TraceIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub command: String,
    pub version: String,
    pub input_digest: String,
    pub label: Option<String>,
    pub seed: u64,
    outputs: Vec<(String, Value)>,
}

impl ResultRecord {
    pub fn new(command: &str, digest: &str, label: Option<&str>, seed: u64) -> Self {
        ResultRecord {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: digest.to_string(),
            label: label.map(|s| s.to_string()),
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn num(&mut self, name: &str, value: f64) -> &mut Self {
        let v = if value.is_finite() {
            Value::Num(value)
        } else {
            Value::Text(value.to_string())
        };
        self.outputs.push((name.to_string(), v));
        self
    }

    pub fn text(&mut self, name: &str, value: &str) -> &mut Self {
        self.outputs
            .push((name.to_string(), Value::Text(value.to_string())));
        self
    }

    /// Write the record as `<command>.jsonl` or `<command>.csv` under `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf, TraceIoError> {
        let (name, contents) = match format {
            Format::Jsonl => (format!("{}.jsonl", self.command), self.to_jsonl()),
            Format::Csv => (format!("{}.csv", self.command), self.to_csv()),
        };
        let path = dir.join(name);
        write_file(&path, &contents)?;
        Ok(path)
    }

    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            command: &'a str,
            version: &'a str,
            input_digest: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            label: &'a Option<String>,
            seed: u64,
            outputs: serde_json::Map<String, serde_json::Value>,
        }
        let mut outputs = serde_json::Map::new();
        for (k, v) in &self.outputs {
            let jv = match v {
                Value::Num(x) => serde_json::json!(x),
                Value::Text(s) => serde_json::json!(s),
            };
            outputs.insert(k.clone(), jv);
        }
        let wire = Wire {
            command: &self.command,
            version: &self.version,
            input_digest: &self.input_digest,
            label: &self.label,
            seed: self.seed,
            outputs,
        };
        let mut line = serde_json::to_string(&wire).expect("record serialization");
        line.push('\n');
        line
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value\n");
        let _ = writeln!(out, "command,{}", self.command);
        let _ = writeln!(out, "version,{}", self.version);
        let _ = writeln!(out, "input_digest,{}", self.input_digest);
        if let Some(label) = &self.label {
            let _ = writeln!(out, "label,{label}");
        }
        let _ = writeln!(out, "seed,{}", self.seed);
        for (k, v) in &self.outputs {
            match v {
                Value::Num(x) => {
                    let _ = writeln!(out, "{k},{x}");
                }
                Value::Text(s) => {
                    let _ = writeln!(out, "{k},{s}");
                }
            }
        }
        out
    }
}

/// Digest of everything that determines a run's outputs.
pub fn input_digest(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let bytes = hasher.finalize();
    let mut hex = String::with_capacity(16);
    for b in bytes.iter().take(8) {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Plain CSV table with a header row; numbers in shortest round-trip form.
pub fn csv_table(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

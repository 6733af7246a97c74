//! Output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use incoh_core::io::{validate_csv, Cell, Schema, Table};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}; use csv or json")),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn cell_json(c: &Cell) -> Value {
    match c {
        // non-finite floats have no JSON number; keep the CSV spelling
        Cell::Float(x) if !x.is_finite() => Value::String(incoh_core::io::fmt_f64(*x)),
        Cell::Float(x) => json!(x),
        Cell::Int(i) => json!(i),
        Cell::Bool(b) => json!(b),
        Cell::Text(s) => json!(s),
    }
}

/// Rows as an array of objects keyed by column name.
pub fn table_json(t: &Table) -> Value {
    Value::Array(
        t.rows
            .iter()
            .map(|r| Value::Object(t.header.iter().cloned().zip(r.iter().map(cell_json)).collect::<Map<_, _>>()))
            .collect(),
    )
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Collects the files of one run; written in call order by a single thread.
pub struct Output {
    dir: PathBuf,
    format: Format,
    files: Vec<Value>,
    written: Vec<(PathBuf, Option<&'static Schema>)>,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), format, files: vec![], written: vec![] })
    }

    fn write(&mut self, name: &str, text: &str, extra: Value) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut rec = json!({ "file": name, "sha256": sha256_hex(text.as_bytes()) });
        if let (Value::Object(r), Value::Object(e)) = (&mut rec, extra) {
            r.extend(e);
        }
        self.files.push(rec);
        Ok(path)
    }

    /// A data table as `<stem>.csv` or `<stem>.json` depending on the format.
    pub fn table(&mut self, stem: &str, schema: &'static Schema, t: &Table) -> Result<(), Failure> {
        let extra = json!({ "schema": schema.name, "rows": t.rows.len() });
        match self.format {
            Format::Csv => {
                let path = self.write(&format!("{stem}.csv"), &t.to_csv(), extra)?;
                self.written.push((path, Some(schema)));
            }
            Format::Json => {
                self.write(&format!("{stem}.json"), &pretty(&table_json(t)), extra)?;
            }
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), Failure> {
        self.write(name, &pretty(v), json!({}))?;
        Ok(())
    }

    /// Re-read every CSV written so far and validate it against its schema.
    pub fn validate(&self) -> Vec<String> {
        let mut bad = vec![];
        for (path, schema) in &self.written {
            let Some(schema) = schema else { continue };
            match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| validate_csv(&t, schema).map_err(|e| e.to_string())) {
                Ok(_) => {}
                Err(e) => bad.push(format!("{}: {e}", path.display())),
            }
        }
        bad
    }

    /// `manifest.json`: tool version, resolved parameters, and output hashes.
    pub fn finish(self, command: &str, params: Value, summary: Value) -> Result<PathBuf, Failure> {
        let manifest = json!({
            "tool": "incoh",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "params": params,
            "summary": summary,
            "outputs": self.files,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, pretty(&manifest)).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

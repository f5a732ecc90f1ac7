//! Result records and their CSV / JSON-lines encodings.

use crate::failure::{CliResult, Failure};
use cohpath_core::C64;
use serde_json::{Map, Number, Value as Json};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Missing,
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}
impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}
impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}
impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}
impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}
impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}
impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Missing, Into::into)
    }
}

/// One output row; column order is the insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new() -> Self {
        Record::default()
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.fields.push((key.to_string(), v.into()));
        self
    }

    /// `<key>_re`, `<key>_im`.
    pub fn complex(self, key: &str, z: Option<C64>) -> Self {
        self.with(&format!("{key}_re"), z.map(|z| z.re)).with(&format!("{key}_im"), z.map(|z| z.im))
    }

    pub fn columns(&self) -> Vec<&str> {
        self.fields.iter().map(|(k, _)| k.as_str()).collect()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        Value::Int(i) => i.to_string(),
        // 17 significant digits: exact round trip
        Value::Float(x) => format!("{x:.16e}"),
        Value::Bool(b) => b.to_string(),
        Value::Missing => String::new(),
    }
}

fn json_value(v: &Value) -> Json {
    match v {
        Value::Str(s) => Json::String(s.clone()),
        Value::Int(i) => Json::Number((*i).into()),
        Value::Float(x) => Number::from_f64(*x).map_or(Json::Null, Json::Number),
        Value::Bool(b) => Json::Bool(*b),
        Value::Missing => Json::Null,
    }
}

pub fn encode(records: &[Record], format: Format) -> CliResult<Vec<u8>> {
    let first = records.first().ok_or_else(|| Failure::io("empty result set, nothing written"))?;
    let cols = first.columns();
    if records.iter().any(|r| r.columns() != cols) {
        return Err(Failure::new(crate::failure::EXIT_IO, "emit", "records of one result set must share their columns"));
    }
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&cols).map_err(|e| Failure::io(e.to_string()))?;
            for r in records {
                w.write_record(r.fields.iter().map(|(_, v)| csv_cell(v))).map_err(|e| Failure::io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::io(e.to_string()))
        }
        Format::JsonLines => {
            let mut out = Vec::new();
            for r in records {
                let obj: Map<String, Json> = r.fields.iter().map(|(k, v)| (k.clone(), json_value(v))).collect();
                serde_json::to_writer(&mut out, &obj).map_err(|e| Failure::io(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

/// Writes to `path`, or stdout when absent. Nothing is created for an empty set.
pub fn emit(records: &[Record], format: Format, path: Option<&Path>) -> CliResult<()> {
    let bytes = encode(records, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|e| Failure::io(e.to_string())),
    }
}

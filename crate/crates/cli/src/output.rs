//! One record writer for both output formats.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<i8> for Value {
    fn from(v: i8) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

/// 17 significant digits, e.g. `-7.0710678118654746e-1`.
pub fn fmt_float(v: f64) -> Option<String> {
    v.is_finite().then(|| format!("{v:.16e}"))
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::UInt(v) => v.to_string(),
            Value::Float(v) => fmt_float(*v).unwrap_or_else(|| v.to_string()),
            Value::Str(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Null => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::UInt(v) => v.to_string(),
            Value::Float(v) => fmt_float(*v).unwrap_or_else(|| "null".into()),
            Value::Str(s) => serde_json::to_string(s).expect("string serializes"),
            Value::Bool(b) => b.to_string(),
            Value::Null => "null".into(),
        }
    }
}

pub struct RecordWriter {
    format: Format,
    columns: Vec<String>,
    csv: Option<csv::Writer<Box<dyn Write>>>,
    raw: Option<Box<dyn Write>>,
}

pub fn open_sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

impl RecordWriter {
    pub fn new(sink: Box<dyn Write>, format: Format, columns: &[&str]) -> io::Result<Self> {
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        let mut w = RecordWriter { format, columns, csv: None, raw: None };
        match format {
            Format::Csv => {
                let mut c = csv::Writer::from_writer(sink);
                c.write_record(&w.columns)?;
                w.csv = Some(c);
            }
            Format::Jsonl => w.raw = Some(sink),
        }
        Ok(w)
    }

    pub fn write(&mut self, values: &[Value]) -> io::Result<()> {
        assert_eq!(values.len(), self.columns.len(), "record width");
        match self.format {
            Format::Csv => self.csv.as_mut().unwrap().write_record(values.iter().map(Value::csv_field))?,
            Format::Jsonl => {
                let w = self.raw.as_mut().unwrap();
                let body: Vec<String> = self
                    .columns
                    .iter()
                    .zip(values)
                    .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).unwrap(), v.json()))
                    .collect();
                writeln!(w, "{{{}}}", body.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> io::Result<()> {
        if let Some(mut c) = self.csv {
            c.flush()?;
        }
        if let Some(mut r) = self.raw {
            r.flush()?;
        }
        Ok(())
    }
}

//! JSONL and CSV record writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

/// Serializes a record and tags it with its kind as the first field.
pub fn record(kind: &str, body: &impl Serialize) -> Value {
    let mut m = Map::new();
    m.insert("record".into(), Value::String(kind.into()));
    match serde_json::to_value(body).expect("records serialize") {
        Value::Object(fields) => m.extend(fields),
        other => {
            m.insert("value".into(), other);
        }
    }
    Value::Object(m)
}

pub fn render(records: &[Value], format: Format) -> String {
    match format {
        Format::Jsonl => {
            let mut s = String::new();
            for r in records {
                s.push_str(&serde_json::to_string(r).expect("json values serialize"));
                s.push('\n');
            }
            s
        }
        Format::Csv => render_csv(records),
    }
}

fn render_csv(records: &[Value]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for r in records {
        if let Value::Object(m) = r {
            for k in m.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns).expect("in-memory write");
    for r in records {
        let row = columns.iter().map(|c| match r.get(c) {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
        });
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(records: &[Value], format: Format, out: Option<&Path>) -> io::Result<()> {
    let text = render(records, format);
    match out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()
        }
    }
}

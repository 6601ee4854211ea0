//! JSON and plain-table rendering of command results.

use std::io::Write;

use clap::ValueEnum;
use codegraph::Error;
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

pub struct Printer {
    format: Format,
}

fn write_out(text: &str) -> Result<(), Error> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    lock.write_all(text.as_bytes())?;
    lock.flush()?;
    Ok(())
}

/// Short text for one table cell. Nested nodes collapse to their
/// qualified name.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Object(o) if o.contains_key("qualified_name") => cell(&o["qualified_name"]),
        Value::Object(o) if o.contains_key("node") => cell(&o["node"]),
        Value::Array(items) if items.iter().all(Value::is_object) => {
            items.iter().map(cell).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string(),
    }
}

fn table(columns: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(columns);
    out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in rows {
        out += &line(r);
    }
    out
}

fn object_table(items: &[Value]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for item in items {
        if let Value::Object(o) = item {
            for k in o.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
    }
    let rows: Vec<Vec<String>> = items
        .iter()
        .map(|item| columns.iter().map(|c| item.get(c).map(cell).unwrap_or_default()).collect())
        .collect();
    table(&columns, &rows)
}

fn render(v: &Value) -> String {
    match v {
        Value::Array(items) if items.iter().all(Value::is_object) && !items.is_empty() => object_table(items),
        Value::Array(items) if items.is_empty() => "(none)\n".to_string(),
        Value::Object(o) => render_object(o),
        other => cell(other) + "\n",
    }
}

fn render_object(o: &Map<String, Value>) -> String {
    let mut head = String::new();
    let mut sections = String::new();
    for (k, v) in o {
        match v {
            Value::Array(items) if items.iter().any(Value::is_object) => {
                sections += &format!("\n{k}:\n{}", render(v));
            }
            Value::Object(inner) if !inner.contains_key("qualified_name") && inner.values().any(|x| x.is_object() || x.is_array()) => {
                sections += &format!("\n{k}:\n{}", render_object(inner));
            }
            _ => head += &format!("{k}: {}\n", cell(v)),
        }
    }
    head + &sections
}

impl Printer {
    pub fn new(format: Format) -> Self {
        Printer { format }
    }

    pub fn value(&self, v: &Value) -> Result<(), Error> {
        match self.format {
            Format::Json => write_out(&(serde_json::to_string_pretty(v)? + "\n")),
            Format::Table => write_out(&render(v)),
        }
    }

    /// Query rows: one JSON object per line, or an aligned table.
    pub fn rows(&self, columns: &[String], rows: &[Vec<Value>]) -> Result<(), Error> {
        match self.format {
            Format::Json => {
                let mut text = String::new();
                for r in rows {
                    let obj: Map<String, Value> = columns.iter().cloned().zip(r.iter().cloned()).collect();
                    text += &serde_json::to_string(&obj)?;
                    text.push('\n');
                }
                write_out(&text)
            }
            Format::Table => {
                let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(cell).collect()).collect();
                write_out(&table(columns, &cells))
            }
        }
    }
}

/// Reports a failure on stderr.
pub fn error(format: Format, e: &Error) {
    let suggestions = match e {
        Error::NotFound { suggestions, .. } => suggestions.clone(),
        _ => Vec::new(),
    };
    match format {
        Format::Json => {
            let v = json!({"error": {"kind": e.kind(), "message": e.to_string(), "suggestions": suggestions}});
            eprintln!("{v}");
        }
        Format::Table => {
            eprintln!("error: {e}");
            for s in suggestions {
                eprintln!("  hint: {s}");
            }
        }
    }
}

//! Tables and their CSV or JSON serialization, each preceded by a header
//! that records the schema version, the full configuration and the seed.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
}

impl Cell {
    /// 17 significant digits, enough to round-trip any double.
    fn csv(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) if v.is_infinite() => if v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }

    fn json(self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            other => json!(other.csv()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

fn header_lines(cfg: &RunConfig) -> Vec<String> {
    let mut lines = vec![
        format!("kitaev-ness {} schema={}/v{SCHEMA_VERSION}", env!("CARGO_PKG_VERSION"), cfg.command.name()),
        format!("config: {}", cfg.describe()),
        format!("seed: {}", cfg.seed),
    ];
    if !cfg.reproducible {
        lines.push(format!("generated: unix {}", unix_now()));
    }
    lines
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn header_json(cfg: &RunConfig) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), json!(format!("{}/v{SCHEMA_VERSION}", cfg.command.name())));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), json!(cfg.describe()));
    m.insert("seed".into(), json!(cfg.seed));
    if !cfg.reproducible {
        m.insert("generated_unix".into(), json!(unix_now()));
    }
    Value::Object(m)
}

pub fn write_table(w: &mut dyn Write, cfg: &RunConfig, table: &Table) -> std::io::Result<()> {
    match cfg.format {
        Format::Csv => {
            for line in header_lines(cfg) {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|c| c.csv()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> =
                        table.columns.iter().zip(r).map(|(k, c)| (k.to_string(), c.json())).collect();
                    Value::Object(m)
                })
                .collect();
            let doc = json!({ "header": header_json(cfg), "columns": table.columns, "rows": rows });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))?;
        }
    }
    Ok(())
}

pub fn write_json(w: &mut dyn Write, cfg: &RunConfig, body: Value) -> std::io::Result<()> {
    let mut doc = json!({ "header": header_json(cfg) });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("serializable"))
}

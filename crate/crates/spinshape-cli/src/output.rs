//! CSV and JSON writers. CSV carries 17 significant digits, '.' decimal
//! separator, one header row, and '#'-prefixed metadata lines.

use anyhow::Context;
use std::io::Write;
use std::path::Path;

/// 17 significant digits, round-trip exact for f64.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut out = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        for (k, v) in &self.metadata {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> anyhow::Result<()> {
        let mut obj = serde_json::Map::new();
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        obj.insert("metadata".into(), serde_json::Value::Object(meta));
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = serde_json::Map::new();
                for (c, cell) in self.columns.iter().zip(row) {
                    // numbers stay numbers where they parse
                    let v = cell
                        .parse::<f64>()
                        .map(|x| {
                            serde_json::Number::from_f64(x)
                                .map(serde_json::Value::Number)
                                .unwrap_or(serde_json::Value::String(cell.clone()))
                        })
                        .unwrap_or(serde_json::Value::String(cell.clone()));
                    m.insert(c.clone(), v);
                }
                serde_json::Value::Object(m)
            })
            .collect();
        obj.insert("rows".into(), serde_json::Value::Array(rows));
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

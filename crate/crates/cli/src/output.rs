//! Config loading and artifact writing.
//!
//! JSON reports have the shape `{"config": .., "result": ..}`. Tables are
//! written as `<name>.csv` with a `<name>.meta.json` sidecar holding the config,
//! or as `<name>.json` with `{"config", "columns", "rows"}` under `--format json`.

use std::fs;
use std::path::{Path, PathBuf};

use fractal_riesz::io::write_json;
use fractal_riesz::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::{Common, Format};

pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Output directory, configuration and format shared by a subcommand run.
pub struct Run {
    pub out: PathBuf,
    pub format: Format,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
}

impl Run {
    pub fn new(common: &Common) -> Result<Self> {
        fs::create_dir_all(&common.out)?;
        let base = common
            .config
            .as_ref()
            .and_then(|p| p.parent().map(Path::to_path_buf))
            .unwrap_or_default();
        Ok(Run {
            out: common.out.clone(),
            format: common.format,
            base,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn input(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    pub fn report<T: Serialize>(&self, name: &str, config: &Value, result: &T) -> Result<PathBuf> {
        let path = self.path(&format!("{name}.json"));
        write_json(&path, &json!({ "config": config, "result": result }))?;
        Ok(path)
    }

    pub fn table(&self, name: &str, config: &Value, table: &Table) -> Result<PathBuf> {
        match self.format {
            Format::Csv => {
                let path = self.path(&format!("{name}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&table.columns)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
                w.flush()?;
                write_json(
                    &self.path(&format!("{name}.meta.json")),
                    &json!({ "config": config, "columns": table.columns }),
                )?;
                Ok(path)
            }
            Format::Json => {
                let path = self.path(&format!("{name}.json"));
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|r| {
                        let m: Map<String, Value> =
                            table.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect();
                        Value::Object(m)
                    })
                    .collect();
                write_json(&path, &json!({ "config": config, "columns": table.columns, "rows": rows }))?;
                Ok(path)
            }
        }
    }
}

/// Read the JSON config (an empty object when none is given), apply the
/// overrides, and deserialize. Returns the typed config and its resolved JSON.
pub fn load_config<T: DeserializeOwned + Serialize>(
    path: Option<&Path>,
    overrides: Vec<(&str, Value)>,
) -> Result<(T, Value)> {
    let mut raw = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Error::input(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => json!({}),
    };
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| Error::input("config must be a JSON object"))?;
    for (k, v) in overrides {
        if !v.is_null() {
            obj.insert(k.to_string(), v);
        }
    }
    let typed: T = serde_json::from_value(raw).map_err(|e| Error::input(format!("config: {e}")))?;
    let resolved = serde_json::to_value(&typed)?;
    Ok((typed, resolved))
}

//! CSV and JSON artifacts: measures, fields, grid BV functions and problem configs.
//!
//! Fields are written as CSV with columns `t_1..t_k, x_1..x_n`, one row per grid
//! point in flat order, plus a JSON sidecar holding the shape, metadata and the
//! resolved configuration that produced them. Measures use columns
//! `x_1..x_n, weight`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::composition::BVGridFunction;
use crate::error::{Error, Result};
use crate::field::{FieldMeta, SampledField};
use crate::measure::DiscreteMeasure;
use crate::minimize::{MinimizeOptions, Objective, PotentialCap, ProblemSpec};

fn fmt(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v:?}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_measure_csv(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=mu.n).map(|d| format!("x_{d}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for i in 0..mu.len() {
        let mut row: Vec<String> = mu.atom(i).iter().map(|&v| fmt(v)).collect();
        row.push(fmt(mu.weights[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn numeric_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| {
                    Error::input(format!("{}: row {}: not a number: {c:?}", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::input(format!("{}: row {} has the wrong width", path.display(), line + 1)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Read a measure; a missing `weight` column means uniform probability weights.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let (header, rows) = numeric_rows(path)?;
    let wcol = header.iter().position(|h| h == "weight");
    let xcols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != wcol).collect();
    if xcols.is_empty() || rows.is_empty() {
        return Err(Error::input(format!("{}: no atoms", path.display())));
    }
    let n = xcols.len();
    let mut atoms = Vec::with_capacity(rows.len() * n);
    let mut weights = Vec::with_capacity(rows.len());
    for row in &rows {
        atoms.extend(xcols.iter().map(|&c| row[c]));
        weights.push(wcol.map_or(1.0 / rows.len() as f64, |c| row[c]));
    }
    DiscreteMeasure::new(n, atoms, weights)
}

/// Read a point set; every column is a coordinate.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = numeric_rows(path)?;
    let cols: Vec<usize> = (0..header.len()).filter(|&c| header[c] != "weight").collect();
    Ok(rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect())
}

pub fn write_field_csv(path: &Path, field: &SampledField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=field.k).map(|d| format!("t_{d}")).collect();
    header.extend((1..=field.n).map(|d| format!("x_{d}")));
    w.write_record(&header)?;
    for p in 0..field.len() {
        let mut row: Vec<String> = field.param(p).iter().map(|&v| fmt(v)).collect();
        row.extend(field.point(p).iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub origin_pinned: bool,
    pub meta: FieldMeta,
    #[serde(default)]
    pub config: Value,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write `field` as CSV plus a `.json` sidecar embedding `config`.
pub fn write_field(csv_path: &Path, field: &SampledField, config: &Value) -> Result<()> {
    write_field_csv(csv_path, field)?;
    write_json(
        &sidecar_path(csv_path),
        &FieldSidecar {
            k: field.k,
            n: field.n,
            m: field.m,
            origin_pinned: field.origin_pinned,
            meta: field.meta.clone(),
            config: config.clone(),
        },
    )
}

/// Read a field CSV; metadata comes from the sidecar when present.
pub fn read_field(csv_path: &Path) -> Result<SampledField> {
    let (header, rows) = numeric_rows(csv_path)?;
    let k = header.iter().filter(|h| h.starts_with("t_")).count();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    if k == 0 || n == 0 || k + n != header.len() {
        return Err(Error::input(format!(
            "{}: expected columns t_1..t_k, x_1..x_n",
            csv_path.display()
        )));
    }
    let m = (rows.len() as f64).powf(1.0 / k as f64).round() as usize;
    if m.checked_pow(k as u32) != Some(rows.len()) {
        return Err(Error::input(format!(
            "{}: {} rows is not a full grid in dimension {k}",
            csv_path.display(),
            rows.len()
        )));
    }
    let values: Vec<f64> = rows.iter().flat_map(|r| r[k..].to_vec()).collect();
    let mut field = SampledField::new(k, n, m, values)?;
    let side = sidecar_path(csv_path);
    if side.exists() {
        let sc: FieldSidecar = read_json(&side)?;
        field.meta = sc.meta;
    }
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMeta {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default)]
    pub outside: f64,
}

/// Grid CSV: one row per index of the first axis, one column per cell of the
/// second (a single row in dimension 1), with a box JSON alongside.
pub fn write_bv(csv_path: &Path, json_path: &Path, phi: &BVGridFunction) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(csv_path)?;
    let width = if phi.n == 2 { phi.cells[1] } else { phi.cells[0] };
    for row in phi.values.chunks(width) {
        w.write_record(row.iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    write_json(
        json_path,
        &BoxMeta {
            lo: phi.lo.clone(),
            hi: phi.hi.clone(),
            cells: phi.cells.clone(),
            outside: phi.outside,
        },
    )
}

pub fn read_bv(csv_path: &Path, json_path: &Path) -> Result<BVGridFunction> {
    let meta: BoxMeta = read_json(json_path)?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(csv_path)?;
    let mut values = Vec::new();
    for rec in r.records() {
        for c in rec?.iter() {
            values.push(
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(format!("{}: not a number: {c:?}", csv_path.display())))?,
            );
        }
    }
    BVGridFunction::new(meta.lo, meta.hi, meta.cells, values, meta.outside)
}

/// Minimization problem as read from JSON. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `self_interaction`, `mutual_interaction` or `p_potential`.
    pub objective: String,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub medium_csv: Option<String>,
    #[serde(default)]
    pub p_power: Option<f64>,
    #[serde(default, rename = "cap_M")]
    pub cap_m: Option<f64>,
    #[serde(default)]
    pub cap_points_csv: Option<String>,
    #[serde(default)]
    pub endpoint: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub optimizer: Option<MinimizeOptions>,
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Build the problem and optimizer options, loading referenced CSVs
    /// relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<(ProblemSpec, MinimizeOptions)> {
        let load_medium = || -> Result<DiscreteMeasure> {
            let p = self
                .medium_csv
                .as_ref()
                .ok_or_else(|| Error::input(format!("objective {} needs medium_csv", self.objective)))?;
            read_measure_csv(&base.join(p))
        };
        let objective = match self.objective.as_str() {
            "self_interaction" => Objective::SelfInteraction,
            "mutual_interaction" => Objective::MutualInteraction { medium: load_medium()? },
            "p_potential" => Objective::PPotential {
                medium: load_medium()?,
                p_power: self
                    .p_power
                    .ok_or_else(|| Error::input("objective p_potential needs p_power"))?,
            },
            other => return Err(Error::input(format!("unknown objective {other:?}"))),
        };
        let potential_cap = match (self.cap_m, &self.cap_points_csv) {
            (None, None) => None,
            (Some(bound), Some(p)) => Some(PotentialCap {
                bound,
                eval_points: read_points_csv(&base.join(p))?,
            }),
            (Some(bound), None) => match &objective {
                Objective::MutualInteraction { medium } | Objective::PPotential { medium, .. } => {
                    Some(PotentialCap {
                        bound,
                        eval_points: (0..medium.len()).map(|i| medium.atom(i).to_vec()).collect(),
                    })
                }
                Objective::SelfInteraction => {
                    return Err(Error::input("cap_M without a medium needs cap_points_csv"))
                }
            },
            (None, Some(_)) => return Err(Error::input("cap_points_csv given without cap_M")),
        };
        let problem = ProblemSpec {
            objective,
            alpha: self.alpha,
            gamma: self.gamma,
            rho: self.rho,
            k: self.k,
            n: self.n,
            m: self.m,
            potential_cap,
            endpoint: self.endpoint.clone(),
        };
        problem.validate()?;
        let mut opts = self.optimizer.unwrap_or_default();
        if let Some(seed) = self.seed {
            opts.seed = seed;
        }
        Ok((problem, opts))
    }
}

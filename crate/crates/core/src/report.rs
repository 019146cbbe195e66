//! Experiment reports and their byte-stable serialisation.
//!
//! Floats are written with 17 significant digits in exponent form through a
//! locale-independent formatter, so identical numbers give identical bytes.
//! Files are written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::empirical::MomentEstimate;
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The experiment's hypotheses could not be certified.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) => fmt_f64(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

/// 17 significant digits, exponent form; `nan`, `inf`, `-inf` otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// One line of the estimates CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub family: String,
    pub p: Option<f64>,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: String,
}

impl EstimateRow {
    pub fn new(quantity: &str, family: &str, est: &MomentEstimate, seed: &crate::Seed) -> Self {
        EstimateRow {
            quantity: quantity.into(),
            family: family.into(),
            p: est.p,
            value: est.value,
            stderr: est.stderr,
            n: est.n,
            seed: format!("{}:{}", seed.root, seed.stream),
        }
    }
}

pub fn estimates_table(rows: &[EstimateRow]) -> Table {
    let mut t = Table::new(&["quantity", "family", "p", "value", "stderr", "n", "seed"]);
    for r in rows {
        t.push(vec![
            r.quantity.clone().into(),
            r.family.clone().into(),
            r.p.map_or(Cell::Text(String::new()), Cell::Num),
            r.value.into(),
            r.stderr.into(),
            r.n.into(),
            r.seed.clone().into(),
        ]);
    }
    t
}

/// Outcome of one experiment run. Every number is a function of the
/// echoed configuration, so re-running it reproduces the report bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub config: serde_json::Value,
    pub status: Status,
    pub certified_a: Option<f64>,
    pub sup_diff: Option<MomentEstimate>,
    pub kappa_hat: Option<f64>,
    pub kappa_stderr: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub table: Option<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &impl Serialize) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            version: VERSION.into(),
            config: serde_json::to_value(config).expect("configs serialise"),
            status: Status::Pass,
            certified_a: None,
            sup_diff: None,
            kappa_hat: None,
            kappa_stderr: None,
            metrics: BTreeMap::new(),
            flags: BTreeMap::new(),
            notes: Vec::new(),
            table: None,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    /// Records a pass flag; a false flag fails the report.
    pub fn check(&mut self, name: &str, ok: bool) {
        self.flags.insert(name.into(), ok);
        if !ok && self.status == Status::Pass {
            self.status = Status::Fail;
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// The report's table, or a one-row-per-quantity estimates table.
    pub fn to_csv(&self) -> String {
        if let Some(t) = &self.table {
            return t.to_csv();
        }
        let mut t = Table::new(&["quantity", "value"]);
        if let Some(a) = self.certified_a {
            t.push(vec!["certified_a".into(), a.into()]);
        }
        if let Some(s) = &self.sup_diff {
            t.push(vec!["sup_diff".into(), s.value.into()]);
            t.push(vec!["sup_diff_stderr".into(), s.stderr.into()]);
        }
        if let Some(k) = self.kappa_hat {
            t.push(vec!["kappa_hat".into(), k.into()]);
        }
        if let Some(k) = self.kappa_stderr {
            t.push(vec!["kappa_stderr".into(), k.into()]);
        }
        for (k, v) in &self.metrics {
            t.push(vec![k.clone().into(), (*v).into()]);
        }
        t.to_csv()
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, force: bool) -> Result<Vec<PathBuf>> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        write_atomic(&json, self.to_json().as_bytes(), force)?;
        write_atomic(&csv, self.to_csv().as_bytes(), force)?;
        Ok(vec![json, csv])
    }
}

struct FixedFloat;

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// JSON with fixed float formatting and two-space indentation.
pub fn to_json_string(value: &impl Serialize) -> String {
    // Pretty-print through a generic value first so keys keep their order.
    let v = serde_json::to_value(value).expect("serialisable");
    let mut buf = Vec::new();
    write_value(&mut buf, &v, 0);
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf8")
}

fn write_value(out: &mut Vec<u8>, v: &serde_json::Value, depth: usize) {
    use serde_json::Value;
    let pad = |out: &mut Vec<u8>, d: usize| out.extend(std::iter::repeat(b' ').take(2 * d));
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.extend(i.to_string().as_bytes());
            } else if let Some(u) = n.as_u64() {
                out.extend(u.to_string().as_bytes());
            } else {
                let mut ser = serde_json::Serializer::with_formatter(&mut *out, FixedFloat);
                n.serialize(&mut ser).expect("in-memory write");
            }
        }
        Value::Array(items) if !items.is_empty() => {
            out.extend(b"[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.extend(if i + 1 < items.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            pad(out, depth);
            out.push(b']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.extend(b"{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.extend(serde_json::to_string(k).expect("string").as_bytes());
                out.extend(b": ");
                write_value(out, item, depth + 1);
                out.extend(if i + 1 < map.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            pad(out, depth);
            out.push(b'}');
        }
        other => out.extend(serde_json::to_string(other).expect("scalar").as_bytes()),
    }
}

/// Writes through a temporary sibling file and renames it into place.
/// Refuses to replace an existing file unless `force`.
pub fn write_atomic(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", path.display()),
        )));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

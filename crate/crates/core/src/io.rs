//! Text and JSON artifact formats.
//!
//! Every table starts with a single `# {json}` metadata line followed by
//! tab-separated columns. Floating-point values are written with 17
//! significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::SimConfig;
use crate::ensemble::CorrelationEstimate;
use crate::phase_space::{Distribution, GridSpec, WignerGrid};
use crate::trajectory::{Snapshot, CavityState, TrajectoryRecord};

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(ErrorKind::InvalidData, msg.into())
}

/// Exact decimal rendering of an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(meta: &Value) -> String {
    format!("# {meta}\n")
}

fn split_header(text: &str) -> io::Result<(Value, impl Iterator<Item = &str>)> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| invalid("empty file"))?;
    let json = first.strip_prefix("# ").ok_or_else(|| invalid("missing metadata line"))?;
    let meta = serde_json::from_str(json).map_err(|e| invalid(e.to_string()))?;
    Ok((meta, lines.filter(|l| !l.is_empty() && !l.starts_with('#'))))
}

fn parse_row(line: &str, width: usize) -> io::Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split('\t')
        .map(|f| f.parse::<f64>().map_err(|e| invalid(format!("{e}: {f:?}"))))
        .collect::<io::Result<_>>()?;
    if width != 0 && row.len() != width {
        return Err(invalid(format!("expected {width} columns, found {}", row.len())));
    }
    Ok(row)
}

/// Column names of the trajectory table.
pub const RECORD_COLUMNS: [&str; 5] = ["t", "Q", "I", "n", "quad"];

/// Series of a trajectory table.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordTable {
    pub meta: Value,
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub i: Vec<f64>,
    pub n: Vec<f64>,
    pub quad: Vec<f64>,
}

pub fn record_table(record: &TrajectoryRecord, cfg: &SimConfig) -> String {
    let meta = json!({
        "kind": "trajectory",
        "config": cfg,
        "seed": record.seed,
        "index": record.index,
        "columns": RECORD_COLUMNS,
    });
    let mut out = header(&meta);
    for k in 0..record.t_grid.len() {
        let row = [
            record.t_grid[k],
            record.q_series[k],
            record.i_series[k],
            record.n_series[k],
            record.quad_series[k],
        ];
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn parse_record_table(text: &str) -> io::Result<RecordTable> {
    let (meta, rows) = split_header(text)?;
    let mut table = RecordTable { meta, t: vec![], q: vec![], i: vec![], n: vec![], quad: vec![] };
    for line in rows {
        let r = parse_row(line, RECORD_COLUMNS.len())?;
        table.t.push(r[0]);
        table.q.push(r[1]);
        table.i.push(r[2]);
        table.n.push(r[3]);
        table.quad.push(r[4]);
    }
    Ok(table)
}

/// Click sidecar: click times plus the charge at each click.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickSidecar {
    pub click_times: Vec<f64>,
    pub click_charges: Vec<f64>,
    pub steps: usize,
    pub gaussian_draws: usize,
}

/// Stored states of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub seed: u64,
    pub index: u64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: CavityState,
}

/// Writes `<stem>.tsv`, `<stem>.clicks.json` and `<stem>.states.json`.
pub fn write_record(dir: &Path, stem: &str, record: &TrajectoryRecord, cfg: &SimConfig) -> io::Result<Vec<PathBuf>> {
    let table = dir.join(format!("{stem}.tsv"));
    fs::write(&table, record_table(record, cfg))?;
    let clicks = dir.join(format!("{stem}.clicks.json"));
    let sidecar = ClickSidecar {
        click_times: record.click_times.clone(),
        click_charges: record.click_charges.clone(),
        steps: record.steps,
        gaussian_draws: record.gaussian_draws,
    };
    fs::write(&clicks, to_json(&sidecar)?)?;
    let states = dir.join(format!("{stem}.states.json"));
    let file = StateFile {
        seed: record.seed,
        index: record.index,
        snapshots: record.snapshots.clone(),
        final_state: record.final_state.clone(),
    };
    fs::write(&states, to_json(&file)?)?;
    Ok(vec![table, clicks, states])
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    serde_json::to_string(value).map_err(|e| invalid(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> io::Result<T> {
    serde_json::from_str(text).map_err(|e| invalid(e.to_string()))
}

/// Grid header followed by one row of values per `y`.
pub fn wigner_text(grid: &WignerGrid, meta: Value) -> String {
    let meta = json!({ "kind": "wigner", "grid": grid.spec, "meta": meta });
    let mut out = header(&meta);
    for iy in 0..grid.spec.ny {
        let cells: Vec<String> = grid.row(iy).iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn parse_wigner_text(text: &str) -> io::Result<WignerGrid> {
    let (meta, rows) = split_header(text)?;
    let spec: GridSpec = serde_json::from_value(meta["grid"].clone()).map_err(|e| invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(spec.nx * spec.ny);
    for line in rows {
        values.extend(parse_row(line, spec.nx)?);
    }
    if values.len() != spec.nx * spec.ny {
        return Err(invalid("grid size does not match its header"));
    }
    Ok(WignerGrid { spec, values })
}

/// Two-column `x density` table.
pub fn distribution_text(dist: &Distribution, meta: Value) -> String {
    let mut out = header(&meta);
    for (x, d) in dist.axis.iter().zip(&dist.density) {
        let _ = writeln!(out, "{}\t{}", fmt_f64(*x), fmt_f64(*d));
    }
    out
}

pub fn parse_distribution_text(text: &str) -> io::Result<(Value, Distribution)> {
    let (meta, rows) = split_header(text)?;
    let mut dist = Distribution { axis: vec![], density: vec![] };
    for line in rows {
        let r = parse_row(line, 2)?;
        dist.axis.push(r[0]);
        dist.density.push(r[1]);
    }
    Ok((meta, dist))
}

/// Three-column `tau h sem` table.
pub fn correlation_text(est: &CorrelationEstimate, meta: Value) -> String {
    let meta = json!({ "kind": "correlation", "h0": est.h0, "n_starts": est.n_starts, "meta": meta });
    let mut out = header(&meta);
    for k in 0..est.tau_grid.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            fmt_f64(est.tau_grid[k]),
            fmt_f64(est.h[k]),
            fmt_f64(est.sem[k])
        );
    }
    out
}

/// Tab-separated table with named columns; `rows` are column-major.
pub fn table_text(columns: &[&str], data: &[Vec<f64>], meta: Value) -> String {
    let meta = json!({ "columns": columns, "meta": meta });
    let mut out = header(&meta);
    let len = data.iter().map(Vec::len).min().unwrap_or(0);
    for k in 0..len {
        let cells: Vec<String> = data.iter().map(|col| fmt_f64(col[k])).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

/// Inverse of [`table_text`]: the metadata line and the columns.
pub fn parse_table_text(text: &str) -> io::Result<(Value, Vec<Vec<f64>>)> {
    let (meta, rows) = split_header(text)?;
    let width = meta["columns"].as_array().map_or(0, Vec::len);
    let mut data = vec![Vec::new(); width];
    for line in rows {
        for (col, v) in data.iter_mut().zip(parse_row(line, width)?) {
            col.push(v);
        }
    }
    Ok((meta, data))
}

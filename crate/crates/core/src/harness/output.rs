//! Plain-text snapshot tables and the newline-delimited diagnostics stream.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::HarnessError;
use crate::evolve::SimState;
use crate::grid::Grid;

pub const SNAPSHOT_COLUMNS: [&str; 9] = ["r", "z", "R", "Z", "Theta_hat", "vr", "vtheta", "vz", "q"];
pub const DIAGNOSTICS_FILE: &str = "diagnostics.ndjson";

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Node table of one state, columns in [`SNAPSHOT_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub grid: Grid,
    pub hash: String,
    pub columns: [Vec<f64>; 9],
}

impl Snapshot {
    pub fn from_state(state: &SimState, hash: &str) -> Self {
        let g = *state.grid();
        let mut columns: [Vec<f64>; 9] = Default::default();
        for c in columns.iter_mut() {
            c.reserve(g.len());
        }
        let radius = state.map.radius();
        for i in 0..g.nr {
            for j in 0..g.nz {
                let (r, z) = (g.r(i), g.z(j));
                let row = [
                    r,
                    z,
                    radius.at(i, j),
                    z + state.map.z_disp.at(i, j),
                    state.map.theta_hat.at(i, j),
                    state.kin.vr.at(i, j),
                    state.kin.vth.at(i, j),
                    state.kin.vz.at(i, j),
                    state.q.at(i, j),
                ];
                for (c, v) in columns.iter_mut().zip(row) {
                    c.push(v);
                }
            }
        }
        Self {
            t: state.t,
            grid: g,
            hash: hash.to_string(),
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(s, "# t = {}", num(self.t));
        let _ = writeln!(s, "# grid = Nr={} Nz={} R0={} Lz={}", g.nr, g.nz, num(g.r0), num(g.lz));
        let _ = writeln!(s, "# config_sha256 = {}", self.hash);
        let _ = writeln!(s, "# rows = {}", self.rows());
        let _ = writeln!(s, "# columns = {}", SNAPSHOT_COLUMNS.join(","));
        for k in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| num(c[k])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut t = None;
        let mut grid = None;
        let mut hash = None;
        let mut rows = None;
        let mut columns: [Vec<f64>; 9] = Default::default();
        for (n, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                let (key, value) = h
                    .split_once('=')
                    .ok_or_else(|| format!("line {}: malformed header", n + 1))?;
                let value = value.trim();
                match key.trim() {
                    "t" => t = Some(value.parse::<f64>().map_err(|e| format!("header t: {e}"))?),
                    "grid" => grid = Some(parse_grid(value)?),
                    "config_sha256" => hash = Some(value.to_string()),
                    "rows" => rows = Some(value.parse::<usize>().map_err(|e| format!("header rows: {e}"))?),
                    "columns" => {
                        if value != SNAPSHOT_COLUMNS.join(",") {
                            return Err(format!("unexpected columns `{value}`"));
                        }
                    }
                    other => return Err(format!("unknown header `{other}`")),
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != SNAPSHOT_COLUMNS.len() {
                return Err(format!("line {}: {} columns, expected {}", n + 1, cells.len(), SNAPSHOT_COLUMNS.len()));
            }
            for (c, cell) in columns.iter_mut().zip(cells) {
                c.push(cell.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1))?);
            }
        }
        let grid = grid.ok_or("missing grid header")?;
        let rows = rows.ok_or("missing rows header")?;
        if rows != columns[0].len() || rows != grid.len() {
            return Err(format!(
                "row count {} disagrees with header {rows} and grid size {}",
                columns[0].len(),
                grid.len()
            ));
        }
        Ok(Self {
            t: t.ok_or("missing t header")?,
            grid,
            hash: hash.ok_or("missing config_sha256 header")?,
            columns,
        })
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut nr = None;
    let mut nz = None;
    let mut r0 = None;
    let mut lz = None;
    for part in s.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad grid field `{part}`"))?;
        let bad = |e: &dyn std::fmt::Display| format!("grid {k}: {e}");
        match k {
            "Nr" => nr = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "Nz" => nz = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "R0" => r0 = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "Lz" => lz = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            _ => return Err(format!("unknown grid field `{k}`")),
        }
    }
    match (nr, nz, r0, lz) {
        (Some(nr), Some(nz), Some(r0), Some(lz)) => Grid::new(nr, nz, r0, lz).map_err(|e| e.to_string()),
        _ => Err("incomplete grid header".into()),
    }
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.csv"))
}

pub fn write_snapshot(dir: &Path, step: usize, snap: &Snapshot) -> Result<PathBuf, HarnessError> {
    let path = snapshot_path(dir, step);
    fs::write(&path, snap.to_text()).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Snapshot::parse(&text).map_err(|message| HarnessError::Snapshot {
        path: path.to_path_buf(),
        message,
    })
}

pub fn diagnostics_text(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), HarnessError> {
    fs::write(path, diagnostics_text(records)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Snapshot {
                path: path.to_path_buf(),
                message: format!("record {}: {e}", n + 1),
            })
        })
        .collect()
}

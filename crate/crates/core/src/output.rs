//! CSV and plot-script writers.
//!
//! Values are written with 17 significant digits and LF line endings, so
//! identical runs produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsSeries;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scheme::{Snapshot, Trajectory};

pub const SNAPSHOT_HEADER: &str = "x,rho";
pub const SERIES_HEADER: &str = "t,l1,linf,tv,entropy_residual,bound_linf,bound_tv";

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn snapshot_csv(grid: &Grid, snapshot: &Snapshot) -> String {
    let mut out = String::with_capacity(48 * (snapshot.rho.len() + 1));
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (j, rho) in snapshot.rho.iter().enumerate() {
        out.push_str(&format_value(grid.cell_center(j as isize)));
        out.push(',');
        out.push_str(&format_value(*rho));
        out.push('\n');
    }
    out
}

pub fn series_csv(series: &DiagnosticsSeries) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in &series.rows {
        let fields = [r.t, r.l1, r.linf, r.tv, r.entropy_residual, r.bound_linf, r.bound_tv];
        let line: Vec<String> = fields.iter().map(|v| format_value(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_snapshot_csv(path: &Path, grid: &Grid, snapshot: &Snapshot) -> Result<()> {
    write_text(path, &snapshot_csv(grid, snapshot))
}

pub fn write_series_csv(path: &Path, series: &DiagnosticsSeries) -> Result<()> {
    write_text(path, &series_csv(series))
}

pub fn snapshot_file_name(index: usize, snapshot: &Snapshot) -> String {
    format!("snapshot_{index:02}_t{:.4}.csv", snapshot.requested_t)
}

/// Writes every snapshot and, when recorded, the diagnostics series of a run.
pub fn write_trajectory(dir: &Path, trajectory: &Trajectory) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, s) in trajectory.snapshots.iter().enumerate() {
        let path = dir.join(snapshot_file_name(i, s));
        write_snapshot_csv(&path, &trajectory.grid, s)?;
        written.push(path);
    }
    if !trajectory.diagnostics.rows.is_empty() {
        let path = dir.join("diagnostics.csv");
        write_series_csv(&path, &trajectory.diagnostics)?;
        written.push(path);
    }
    Ok(written)
}

//! Named experiment recipes.
//!
//! Each recipe expands to plain configuration documents; running a recipe is
//! the same as running its documents through [`run`](crate::scheme::run), and
//! the rendered documents are stored next to the outputs as `config.txt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{ConfigDoc, RunConfig};
use crate::diagnostics::l1_distance_interior;
use crate::error::{Error, Result};
use crate::output::{self, format_value, snapshot_file_name, write_text};
use crate::scheme::{run, Trajectory};

pub const TRAFFIC_TIMES: [f64; 5] = [0.05, 2.5, 5.01, 7.5, 10.0];
pub const TV_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const TV_KERNELS: [(f64, f64); 3] = [(0.0, 0.2), (-0.1, 0.1), (-0.2, 0.0)];
pub const LIMIT_TIMES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
/// Values of `1/a` in the kernel-width sweep.
pub const LIMIT_INV_WIDTHS: [f64; 15] = [
    4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 150.0, 200.0, 250.0,
];
/// Widths whose full evolution (t up to 2) is kept.
pub const LIMIT_PANEL_WIDTHS: [f64; 3] = [0.25, 0.1, 0.05];
pub const LIMIT_COMPARISON_TIME: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Traffic,
    Tv,
    Limit,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Traffic => "traffic",
            ExperimentKind::Tv => "tv",
            ExperimentKind::Limit => "limit",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traffic" => Ok(ExperimentKind::Traffic),
            "tv" => Ok(ExperimentKind::Tv),
            "limit" => Ok(ExperimentKind::Limit),
            other => Err(Error::Config(format!("unknown experiment '{other}' (traffic, tv, limit)"))),
        }
    }
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// A single run of a recipe: a label (also its output sub-directory) and its document.
#[derive(Clone, Debug)]
pub struct RecipeRun {
    pub label: String,
    pub doc: ConfigDoc,
}

pub fn traffic_recipe() -> Vec<RecipeRun> {
    [("backward", "traffic_backward"), ("forward", "traffic_forward")]
        .into_iter()
        .map(|(label, name)| {
            let mut doc = ConfigDoc::default();
            doc.set("model", "name", name)
                .set("model", "v_max", "1")
                .set("grid", "x_min", "-16")
                .set("grid", "x_max", "16")
                .set("grid", "n_cells", "1600")
                .set("grid", "lambda", "auto")
                .set("datum", "pieces", "-2.8:-1.8:0.5, -1.2:-0.2:0.75, 0.6:1.0:0.75, 1.5:inf:1")
                .set("run", "t_final", "10")
                .set("run", "snapshot_times", list(&TRAFFIC_TIMES))
                .set("run", "mode", "nonlocal")
                .set("run", "diagnostics", "true");
            RecipeRun { label: label.to_string(), doc }
        })
        .collect()
}

pub fn tv_label(a: f64, b: f64) -> String {
    format!("a{a}_b{b}")
}

pub fn tv_recipe() -> Vec<RecipeRun> {
    TV_KERNELS
        .iter()
        .map(|&(a, b)| {
            let mut doc = ConfigDoc::default();
            doc.set("model", "name", "tv_example")
                .set("model", "kernel_a", a.to_string())
                .set("model", "kernel_b", b.to_string())
                .set("grid", "x_min", "-4")
                .set("grid", "x_max", "4")
                .set("grid", "n_cells", "1600")
                .set("grid", "lambda", "auto")
                .set("datum", "pieces", "-1.35:-0.95:0.25, -0.85:-0.25:1, -0.15:0.25:0.75")
                .set("run", "t_final", "1")
                .set("run", "snapshot_times", list(&TV_TIMES))
                .set("run", "mode", "nonlocal")
                .set("run", "diagnostics", "true");
            RecipeRun { label: tv_label(a, b), doc }
        })
        .collect()
}

pub fn limit_label(inv_width: f64) -> String {
    format!("inv_a{inv_width}")
}

fn limit_doc(width: f64, mode: &str, full: bool) -> ConfigDoc {
    let mut doc = ConfigDoc::default();
    let times: &[f64] = if full { &LIMIT_TIMES } else { &[LIMIT_COMPARISON_TIME] };
    doc.set("model", "name", "limit_family")
        .set("model", "width", width.to_string())
        .set("grid", "x_min", "-5.2")
        .set("grid", "x_max", "2.8")
        .set("grid", "n_cells", "3200")
        .set("grid", "lambda", "auto")
        .set("datum", "pieces", "-1.8:-1.3:0.75, -1.3:-0.8:1")
        .set("run", "t_final", if full { "2" } else { "0.5" })
        .set("run", "snapshot_times", list(times))
        .set("run", "mode", mode)
        .set("run", "diagnostics", "false");
    doc
}

/// The local run followed by one nonlocal run per width `1/inv_width`.
pub fn limit_recipe(inv_widths: &[f64]) -> Vec<RecipeRun> {
    let panel = |w: f64| LIMIT_PANEL_WIDTHS.iter().any(|p| (p - w).abs() < 1e-12);
    let mut runs = vec![RecipeRun {
        label: "local".into(),
        doc: limit_doc(LIMIT_PANEL_WIDTHS[0], "local", true),
    }];
    runs.extend(inv_widths.iter().map(|&inv| {
        let w = 1.0 / inv;
        RecipeRun {
            label: limit_label(inv),
            doc: limit_doc(w, "nonlocal", panel(w)),
        }
    }));
    runs
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub label: String,
    pub dir: PathBuf,
    pub config_text: String,
    pub trajectory: Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitRow {
    pub inv_width: f64,
    pub width: f64,
    pub l1_distance: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub runs: Vec<RunOutcome>,
    pub limit_table: Vec<LimitRow>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&RunOutcome> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// Global options shared by every run of a recipe.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOptions {
    /// `section.key=value` overrides applied to every document.
    pub overrides: Vec<String>,
    pub strict_invariants: bool,
    /// Replaces the default width sweep of the limit experiment.
    pub limit_inv_widths: Option<Vec<f64>>,
}

fn prepare(runs: Vec<RecipeRun>, out: &Path, options: &ExperimentOptions) -> Result<Vec<(String, PathBuf, String, RunConfig)>> {
    runs.into_iter()
        .map(|mut r| {
            let dir = out.join(&r.label);
            if options.strict_invariants {
                r.doc.set("run", "strict_invariants", "true");
            }
            r.doc.set("output", "dir", dir.display().to_string());
            for o in &options.overrides {
                r.doc.apply_override(o)?;
            }
            let text = r.doc.render();
            let config = crate::config::parse_config(&text)?;
            Ok((r.label, dir, text, config))
        })
        .collect()
}

/// Runs a recipe into `out`, one sub-directory per run. Runs execute
/// concurrently; each writes only its own directory.
pub fn run_experiment(kind: ExperimentKind, out: &Path, options: &ExperimentOptions) -> Result<ExperimentReport> {
    let recipe = match kind {
        ExperimentKind::Traffic => traffic_recipe(),
        ExperimentKind::Tv => tv_recipe(),
        ExperimentKind::Limit => limit_recipe(options.limit_inv_widths.as_deref().unwrap_or(&LIMIT_INV_WIDTHS)),
    };
    let prepared = prepare(recipe, out, options)?;
    let results: Vec<Result<(RunOutcome, Vec<PathBuf>)>> = prepared
        .into_par_iter()
        .map(|(label, dir, config_text, config)| {
            let trajectory = run(&config)?;
            let mut files = output::write_trajectory(&dir, &trajectory)?;
            let config_path = dir.join("config.txt");
            write_text(&config_path, &config_text)?;
            files.push(config_path);
            Ok((RunOutcome { label, dir, config_text, trajectory }, files))
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut files = Vec::new();
    for r in results {
        let (outcome, written) = r?;
        runs.push(outcome);
        files.extend(written);
    }

    let mut limit_table = Vec::new();
    match kind {
        ExperimentKind::Traffic => {
            let path = out.join("traffic.gp");
            write_text(&path, &traffic_plot(&runs))?;
            files.push(path);
        }
        ExperimentKind::Tv => {
            let path = out.join("tv.gp");
            write_text(&path, &tv_plot(&runs))?;
            files.push(path);
        }
        ExperimentKind::Limit => {
            limit_table = limit_distances(&runs)?;
            let table_path = out.join("table.csv");
            write_text(&table_path, &limit_table_csv(&limit_table))?;
            files.push(table_path);
            let path = out.join("limit.gp");
            write_text(&path, &limit_plot(&runs))?;
            files.push(path);
        }
    }
    Ok(ExperimentReport { kind, runs, limit_table, files })
}

fn snapshot_at(outcome: &RunOutcome, t: f64) -> Result<&crate::scheme::Snapshot> {
    outcome
        .trajectory
        .snapshots
        .iter()
        .find(|s| (s.requested_t - t).abs() < 1e-12)
        .ok_or_else(|| Error::Misuse(format!("run '{}' has no snapshot at t = {t}", outcome.label)))
}

/// `‖ρ_a - ρ‖_{L1}` at the comparison time for every nonlocal run.
pub fn limit_distances(runs: &[RunOutcome]) -> Result<Vec<LimitRow>> {
    let local = runs
        .iter()
        .find(|r| r.label == "local")
        .ok_or_else(|| Error::Misuse("limit experiment without local run".into()))?;
    let reference = snapshot_at(local, LIMIT_COMPARISON_TIME)?;
    let h = local.trajectory.grid.h;
    runs.iter()
        .filter(|r| r.label != "local")
        .map(|r| {
            let s = snapshot_at(r, LIMIT_COMPARISON_TIME)?;
            if s.n != reference.n || r.trajectory.grid.n_cells != local.trajectory.grid.n_cells {
                return Err(Error::Misuse(format!("run '{}' is not on the reference grid", r.label)));
            }
            let inv_width: f64 = r
                .label
                .strip_prefix("inv_a")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Misuse(format!("unexpected label '{}'", r.label)))?;
            Ok(LimitRow {
                inv_width,
                width: 1.0 / inv_width,
                l1_distance: l1_distance_interior(&s.rho, &reference.rho, h)?,
            })
        })
        .collect()
}

pub fn limit_table_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from("inv_a,a,l1_distance\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", format_value(r.inv_width), format_value(r.width), format_value(r.l1_distance));
    }
    out
}

fn snapshot_files(outcome: &RunOutcome) -> Vec<(f64, String)> {
    outcome
        .trajectory
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| (s.requested_t, format!("{}/{}", outcome.label, snapshot_file_name(i, s))))
        .collect()
}

fn traffic_plot(runs: &[RunOutcome]) -> String {
    let mut gp = String::from("# gnuplot script: density snapshots, backward horizon above, forward below\n");
    gp.push_str("set datafile separator ','\nset terminal pngcairo size 1500,500\nset output 'traffic.png'\n");
    let columns = runs.first().map(|r| r.trajectory.snapshots.len()).unwrap_or(0).max(1);
    let _ = writeln!(gp, "set multiplot layout {},{}", runs.len(), columns);
    gp.push_str("set yrange [-0.05:1.05]\nunset key\n");
    for r in runs {
        for (t, file) in snapshot_files(r) {
            let _ = writeln!(gp, "set title '{} t={t:.2}'\nplot '{file}' using 1:2 with lines", r.label);
        }
    }
    gp.push_str("unset multiplot\n");
    gp
}

fn tv_plot(runs: &[RunOutcome]) -> String {
    let mut gp = String::from("# gnuplot script: total variation versus time\n");
    gp.push_str("set datafile separator ','\nset terminal pngcairo size 1500,450\nset output 'tv.png'\n");
    let _ = writeln!(gp, "set multiplot layout 1,{}", runs.len());
    gp.push_str("set xlabel 't'\nset ylabel 'TV'\nunset key\n");
    for r in runs {
        let _ = writeln!(gp, "set title '{}'\nplot '{}/diagnostics.csv' every ::1 using 1:4 with lines", r.label, r.label);
    }
    gp.push_str("unset multiplot\n\n# snapshots of each case\n");
    for r in runs {
        let _ = writeln!(gp, "set output 'tv_{}.png'\nset multiplot layout 1,{}", r.label, r.trajectory.snapshots.len());
        for (t, file) in snapshot_files(r) {
            let _ = writeln!(gp, "set title 't={t:.2}'\nplot '{file}' using 1:2 with lines");
        }
        gp.push_str("unset multiplot\n");
    }
    gp
}

fn limit_plot(runs: &[RunOutcome]) -> String {
    let mut gp = String::from("# gnuplot script: L1 distance to the local solution at t=0.5, and panels\n");
    gp.push_str("set datafile separator ','\nset terminal pngcairo size 700,500\nset output 'limit_distance.png'\n");
    gp.push_str("set logscale xy\nset xlabel '1/a'\nset ylabel 'L1 distance'\nunset key\n");
    gp.push_str("plot 'table.csv' every ::1 using 1:3 with linespoints\n");
    gp.push_str("unset logscale\nset terminal pngcairo size 1400,1200\nset output 'limit_panels.png'\n");
    let panel: Vec<&RunOutcome> = runs.iter().filter(|r| r.trajectory.snapshots.len() > 1).collect();
    let _ = writeln!(gp, "set multiplot layout {},{}", panel.len(), LIMIT_TIMES.len());
    gp.push_str("set yrange [-0.05:1.1]\nunset xlabel\nunset ylabel\n");
    // nonlocal rows first, local last
    for r in panel.iter().filter(|r| r.label != "local").chain(panel.iter().filter(|r| r.label == "local")) {
        for (t, file) in snapshot_files(r) {
            let _ = writeln!(gp, "set title '{} t={t:.1}'\nplot '{file}' using 1:2 with lines", r.label);
        }
    }
    gp.push_str("unset multiplot\n");
    gp
}

//! Line-oriented run configuration.
//!
//! ```text
//! [model]
//! name = traffic_forward
//! v_max = 1.0
//!
//! [grid]
//! x_min = -16
//! x_max = 16
//! n_cells = 1600
//! lambda = auto
//!
//! [datum]
//! pieces = -2.8:-1.8:0.5, -1.2:-0.2:0.75, 0.6:1.0:0.75, 1.5:inf:1
//!
//! [run]
//! t_final = 10
//! snapshot_times = 0.05, 2.5, 5.01, 7.5, 10
//! ```
//!
//! Datum pieces are `lo:hi:value`; `-inf`/`inf` endpoints set the far field
//! and the datum is zero elsewhere. Unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::diagnostics::DEFAULT_K_POINTS;
use crate::error::{Error, Result};
use crate::grid::{max_stable_lambda, Grid};
use crate::models::{builtin_model, ModelName, ModelParams, ModelSpec};
use crate::scheme::{Datum, Mode, Piece};

/// Fraction of `λ*` used when `lambda = auto`.
pub const AUTO_LAMBDA_FRACTION: f64 = 0.9;
pub const DEFAULT_N_CELLS: usize = 1600;

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["name", "v_max", "kernel_a", "kernel_b", "width"]),
    ("grid", &["x_min", "x_max", "n_cells", "lambda"]),
    ("datum", &["pieces"]),
    ("run", &["t_final", "snapshot_times", "mode", "diagnostics", "strict_invariants", "entropy_k_points"]),
    ("output", &["dir"]),
];

const REQUIRED: &[(&str, &str)] = &[("model", "name"), ("grid", "x_min"), ("grid", "x_max"), ("run", "t_final")];

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// Ordered `[section]` / `key = value` document, before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDoc {
    sections: Vec<(String, Vec<Entry>)>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDoc::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line, msg: format!("malformed section header '{content}'") })?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Parse { line, msg: format!("unknown section [{name}]") });
                }
                if doc.sections.iter().any(|(s, _)| s == name) {
                    return Err(Error::Parse { line, msg: format!("duplicate section [{name}]") });
                }
                doc.sections.push((name.to_string(), Vec::new()));
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected 'key = value', got '{content}'") })?;
            let (key, value) = (key.trim(), value.trim());
            let Some((section, entries)) = doc.sections.last_mut() else {
                return Err(Error::Parse { line, msg: format!("key '{key}' outside any [section]") });
            };
            let known = SCHEMA.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(Error::Parse { line, msg: format!("unknown key '{section}.{key}'") });
            }
            if entries.iter().any(|e| e.key == key) {
                return Err(Error::Parse { line, msg: format!("duplicate key '{section}.{key}'") });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, entries)| entries.iter().find(|e| e.key == key))
    }

    /// Sets `section.key`, replacing an existing value or appending.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) -> &mut Self {
        let value = value.into();
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].1;
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
        self
    }

    /// Applies a `section.key=value` override, checking the key against the schema.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key '{path}' is not section.key")))?;
        let known = SCHEMA
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::Config(format!("unknown section '{section}' in override")))?;
        if !known.contains(&key) {
            return Err(Error::Config(format!("unknown key '{section}.{key}' in override")));
        }
        self.set(section, key, value.trim());
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (section, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for e in entries {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelName,
    pub params: ModelParams,
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    /// Resolved time/space step ratio.
    pub lambda: f64,
    pub lambda_auto: bool,
    pub datum: Datum,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    pub mode: Mode,
    pub diagnostics_on: bool,
    pub strict_invariants: bool,
    pub entropy_k_points: usize,
}

fn parse_value<T: std::str::FromStr>(doc: &ConfigDoc, section: &str, key: &str) -> Result<Option<T>> {
    let Some(entry) = doc.entry(section, key) else {
        return Ok(None);
    };
    entry.value.parse::<T>().map(Some).map_err(|_| Error::Parse {
        line: entry.line,
        msg: format!("cannot parse {section}.{key} = '{}'", entry.value),
    })
}

fn parse_list(doc: &ConfigDoc, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
    let Some(entry) = doc.entry(section, key) else {
        return Ok(None);
    };
    entry
        .value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: entry.line,
                msg: format!("cannot parse '{s}' in {section}.{key}"),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_pieces(doc: &ConfigDoc) -> Result<Datum> {
    let Some(entry) = doc.entry("datum", "pieces") else {
        return Datum::new(Vec::new());
    };
    let bad = |s: &str| Error::Parse {
        line: entry.line,
        msg: format!("datum piece '{s}' is not lo:hi:value"),
    };
    let pieces = entry
        .value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad(s));
            }
            let num = |p: &str| p.parse::<f64>().map_err(|_| bad(s));
            Ok(Piece {
                lo: num(parts[0])?,
                hi: num(parts[1])?,
                value: num(parts[2])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Datum::new(pieces)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::from_doc(&ConfigDoc::parse(text)?)
}

impl RunConfig {
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        let missing: Vec<String> = REQUIRED
            .iter()
            .filter(|(s, k)| doc.get(s, k).is_none())
            .map(|(s, k)| format!("{s}.{k}"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
        }

        let model: ModelName = doc.get("model", "name").unwrap_or_default().parse()?;
        let kernel = match (parse_value::<f64>(doc, "model", "kernel_a")?, parse_value::<f64>(doc, "model", "kernel_b")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Config("kernel_a and kernel_b must be given together".into())),
        };
        let params = ModelParams {
            v_max: parse_value(doc, "model", "v_max")?.unwrap_or(1.0),
            kernel,
            width: parse_value(doc, "model", "width")?,
        };

        let lambda_text = doc.get("grid", "lambda").unwrap_or("auto");
        let (lambda, lambda_auto) = if lambda_text == "auto" {
            (f64::NAN, true)
        } else {
            (parse_value::<f64>(doc, "grid", "lambda")?.unwrap_or(f64::NAN), false)
        };

        let t_final: f64 = parse_value(doc, "run", "t_final")?.unwrap_or_default();
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!("t_final = {t_final} must be nonnegative")));
        }
        let mut snapshot_times = parse_list(doc, "run", "snapshot_times")?.unwrap_or_else(|| vec![t_final]);
        if snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("snapshot times must be nonnegative".into()));
        }
        let before = snapshot_times.len();
        snapshot_times.retain(|&t| t <= t_final * (1.0 + 1e-12));
        if snapshot_times.len() < before {
            log::warn!("dropped {} snapshot times beyond t_final = {t_final}", before - snapshot_times.len());
        }
        if snapshot_times.is_empty() {
            snapshot_times.push(t_final);
        }
        if snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("snapshot times must be strictly increasing".into()));
        }

        let mode = match doc.get("run", "mode").unwrap_or("nonlocal") {
            "nonlocal" => Mode::Nonlocal,
            "local" => Mode::Local,
            other => return Err(Error::Config(format!("mode '{other}' is not nonlocal or local"))),
        };
        let entropy_k_points: usize = parse_value(doc, "run", "entropy_k_points")?.unwrap_or(DEFAULT_K_POINTS);
        if entropy_k_points == 0 {
            return Err(Error::Config("entropy_k_points must be positive".into()));
        }

        let mut config = RunConfig {
            model,
            params,
            x_min: parse_value(doc, "grid", "x_min")?.unwrap_or_default(),
            x_max: parse_value(doc, "grid", "x_max")?.unwrap_or_default(),
            n_cells: parse_value(doc, "grid", "n_cells")?.unwrap_or(DEFAULT_N_CELLS),
            lambda,
            lambda_auto,
            datum: parse_pieces(doc)?,
            t_final,
            snapshot_times,
            output_dir: doc.get("output", "dir").map(PathBuf::from),
            mode,
            diagnostics_on: parse_value(doc, "run", "diagnostics")?.unwrap_or(true),
            strict_invariants: parse_value(doc, "run", "strict_invariants")?.unwrap_or(false),
            entropy_k_points,
        };
        let model = config.build_model()?;
        if config.lambda_auto {
            config.lambda = AUTO_LAMBDA_FRACTION * max_stable_lambda(&model).value;
        }
        let grid = config.build_grid(&model)?;
        config.check_stability(&grid, &model)?;
        Ok(config)
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        builtin_model(self.model, &self.params)
    }

    pub fn build_grid(&self, model: &ModelSpec) -> Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.n_cells, self.lambda, model.kernel.radius())
    }

    /// Rejects meshes violating the CFL bound or `h < 1/C`.
    pub fn check_stability(&self, grid: &Grid, model: &ModelSpec) -> Result<()> {
        let lambda_star = max_stable_lambda(model).value;
        if grid.lambda > lambda_star * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                lambda: grid.lambda,
                lambda_star,
            });
        }
        if !grid.check_mesh_condition(model) {
            return Err(Error::MeshCondition { h: grid.h, c: model.c_x });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRAFFIC: &str = "\
# traffic with forward horizon
[model]
name = traffic_forward
v_max = 1

[grid]
x_min = -16
x_max = 16
n_cells = 1600
lambda = auto

[datum]
pieces = -2.8:-1.8:0.5, -1.2:-0.2:0.75, 0.6:1.0:0.75, 1.5:inf:1

[run]
t_final = 10
snapshot_times = 0.05, 2.5, 5.01, 7.5, 10
";

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config("").unwrap_err().to_string();
        for key in ["model.name", "grid.x_min", "grid.x_max", "run.t_final"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn auto_lambda_for_traffic() {
        let c = parse_config(TRAFFIC).unwrap();
        assert!((c.lambda - 0.05).abs() < 1e-15);
        assert!(c.lambda_auto);
        assert_eq!(c.model, ModelName::TrafficForward);
        assert_eq!(c.n_cells, 1600);
        assert_eq!(c.snapshot_times, vec![0.05, 2.5, 5.01, 7.5, 10.0]);
        assert_eq!(c.datum.far_right(), 1.0);
        assert_eq!(c.datum.far_left(), 0.0);
        assert_eq!(c.mode, Mode::Nonlocal);
        assert!(c.diagnostics_on);
    }

    #[test]
    fn duplicate_and_unknown_keys() {
        let dup = "[model]\nname = tv_example\nname = tv_example\n";
        match parse_config(dup) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let typo = "[grid]\nxmin = 0\n";
        assert!(matches!(parse_config(typo), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("[bogus]\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("name = x\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn cfl_violation_rejected_with_message() {
        let text = TRAFFIC.replace("lambda = auto", "lambda = 0.06");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
        assert_eq!(err.to_string(), "CFL: lambda 0.06 > lambda* 0.0556");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn overrides_and_render_roundtrip() {
        let mut doc = ConfigDoc::parse(TRAFFIC).unwrap();
        doc.apply_override("grid.n_cells=800").unwrap();
        doc.apply_override("run.mode = local").unwrap();
        assert!(doc.apply_override("grid.cells=800").is_err());
        assert!(doc.apply_override("nonsense").is_err());
        let text = doc.render();
        let again = ConfigDoc::parse(&text).unwrap();
        assert_eq!(again.render(), text);
        let c = RunConfig::from_doc(&again).unwrap();
        assert_eq!(c.n_cells, 800);
        assert_eq!(c.mode, Mode::Local);
    }

    #[test]
    fn snapshot_times_beyond_t_final_dropped() {
        let text = TRAFFIC.replace("t_final = 10", "t_final = 0");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.snapshot_times, vec![0.0]);
    }

    #[test]
    fn bad_datum_reported() {
        let text = TRAFFIC.replace("0.6:1.0:0.75", "0.6:1.0");
        assert!(matches!(parse_config(&text), Err(Error::Parse { .. })));
        let text = TRAFFIC.replace("0.6:1.0:0.75", "-1.0:1.0:0.75");
        assert!(matches!(parse_config(&text), Err(Error::InvalidDatum(_))));
    }

    #[test]
    fn model_parameters_checked() {
        let text = "[model]\nname = tv_example\n[grid]\nx_min = -1\nx_max = 1\n[run]\nt_final = 1\n";
        assert!(matches!(parse_config(text), Err(Error::Config(_))));
        let text = "[model]\nname = tv_example\nkernel_a = 0\nkernel_b = 0.2\n[grid]\nx_min = -1\nx_max = 1\n[run]\nt_final = 1\n";
        assert!(parse_config(text).is_ok());
        let text = "[model]\nname = lwr\n[grid]\nx_min = -1\nx_max = 1\n[run]\nt_final = 1\n";
        assert!(matches!(parse_config(text), Err(Error::UnknownModel(_))));
    }
}

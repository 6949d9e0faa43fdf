//! Norms, total variation, the discrete Kružkov entropy residual and the
//! a priori bound constants of the scheme.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::convolution::convolve_into;
use crate::error::{Error, Result};
use crate::grid::{max_stable_lambda, Grid};
use crate::models::{KernelTable, ModelSpec};
use crate::scheme::{interface_arguments, numerical_flux, Mode, Snapshot, State};

/// Absolute tolerance on the entropy residual.
pub const ENTROPY_TOL: f64 = 1e-12;
/// Default number of points of the k-lattice.
pub const DEFAULT_K_POINTS: usize = 41;

const LEVEL_TOL: f64 = 1e-12;
const CONSERVATION_RTOL: f64 = 1e-12;
const BOUND_RTOL: f64 = 1e-12;
const MAX_RECORDED_VIOLATIONS: usize = 100;

pub fn l1_norm(state: &State, grid: &Grid) -> f64 {
    state.interior(grid).iter().map(|r| grid.h * r.abs()).sum()
}

pub fn linf_norm(state: &State, grid: &Grid) -> f64 {
    state.interior(grid).iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// `Σ |ρ_{j+1} - ρ_j|` over the interior plus the jumps to the first ghost
/// cell on each side.
pub fn total_variation(state: &State, grid: &Grid) -> f64 {
    let g = grid.ghost_width;
    state.rho[g - 1..g + grid.n_cells + 1]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum()
}

pub fn l1_distance(s1: &State, s2: &State, grid: &Grid) -> Result<f64> {
    if s1.rho.len() != s2.rho.len() || s1.rho.len() != grid.storage_len() {
        return Err(Error::Misuse(format!(
            "state lengths {} and {} do not match the grid ({})",
            s1.rho.len(),
            s2.rho.len(),
            grid.storage_len()
        )));
    }
    l1_distance_interior(s1.interior(grid), s2.interior(grid), grid.h)
}

/// `Σ h |a_j - b_j|` for two interior vectors on the same mesh.
pub fn l1_distance_interior(a: &[f64], b: &[f64], h: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Misuse(format!("lengths {} and {} differ", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| h * (x - y).abs()).sum())
}

/// Uniform lattice of `points` values spanning `[min ρ - 0.1, max ρ + 0.1]`
/// over the interiors of both states.
pub fn k_lattice(prev: &State, next: &State, grid: &Grid, points: usize) -> Vec<f64> {
    let (lo, hi) = prev
        .interior(grid)
        .iter()
        .chain(next.interior(grid))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let (lo, hi) = (lo - 0.1, hi + 0.1);
    if points <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Largest left-hand side of the cell entropy inequality over interior cells
/// and the given `k` values, for a nonlocal step `prev → next`.
///
/// The inequality checked is
///
/// ```text
/// |ρ^{n+1}_j - k| - |ρ^n_j - k| + λ (F^k_{j+1/2} - F^k_{j-1/2})
///     + λ sgn(ρ^{n+1}_j - k) (F_{j+1/2}(k, k) - F_{j-1/2}(k, k)) ≤ 0
/// ```
///
/// with `F^k(ρ1, ρ2) = F(ρ1 ∨ k, ρ2 ∨ k) - F(ρ1 ∧ k, ρ2 ∧ k)` and the numerical
/// flux `F` evaluated with the convolution of `prev`. The constant-state term
/// `F(k, k) = f(t, x, k) v(c)` carries the speed law, so that `k` constant is a
/// fixed point of the frozen-velocity update.
pub fn entropy_residual(
    prev: &State,
    next: &State,
    model: &ModelSpec,
    table: &KernelTable,
    grid: &Grid,
    k_values: &[f64],
) -> Result<f64> {
    check_consecutive(prev, next, grid)?;
    let mut c = vec![0.0; grid.n_cells + 1];
    convolve_into(&prev.rho, table, grid, &mut c)?;
    Ok(residual_with_arguments(prev, next, &c, model, grid, k_values))
}

/// Entropy residual of a step taken in `mode`, on the default k-lattice.
pub fn step_entropy_residual(
    prev: &State,
    next: &State,
    model: &ModelSpec,
    table: &KernelTable,
    grid: &Grid,
    mode: Mode,
    k_points: usize,
) -> Result<f64> {
    check_consecutive(prev, next, grid)?;
    let mut c = vec![0.0; grid.n_cells + 1];
    interface_arguments(&prev.rho, table, grid, mode, &mut c)?;
    let ks = k_lattice(prev, next, grid, k_points);
    Ok(residual_with_arguments(prev, next, &c, model, grid, &ks))
}

fn check_consecutive(prev: &State, next: &State, grid: &Grid) -> Result<()> {
    if next.n != prev.n + 1 {
        return Err(Error::Misuse(format!(
            "entropy residual needs consecutive states, got steps {} and {}",
            prev.n, next.n
        )));
    }
    if prev.rho.len() != grid.storage_len() || next.rho.len() != grid.storage_len() {
        return Err(Error::Misuse("state length does not match the grid".into()));
    }
    Ok(())
}

fn residual_with_arguments(prev: &State, next: &State, c: &[f64], model: &ModelSpec, grid: &Grid, k_values: &[f64]) -> f64 {
    let g = grid.ghost_width;
    let n = grid.n_cells;
    let lambda = grid.lambda;
    let t = prev.t;
    let per_k = |&k: &f64| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        let mut left: Option<(f64, f64)> = None;
        for i in 0..=n {
            let x = grid.interface(i);
            let (l, r) = (prev.rho[g + i - 1], prev.rho[g + i]);
            let kruzkov = numerical_flux(t, x, l.max(k), r.max(k), c[i], model, lambda)
                - numerical_flux(t, x, l.min(k), r.min(k), c[i], model, lambda);
            let constant = model.f(t, x, k) * model.v(c[i]);
            if let Some((kruzkov_left, constant_left)) = left {
                let j = g + i - 1;
                let residual = (next.rho[j] - k).abs() - (prev.rho[j] - k).abs()
                    + lambda * (kruzkov - kruzkov_left)
                    + lambda * sgn(next.rho[j] - k) * (constant - constant_left);
                worst = worst.max(residual);
            }
            left = Some((kruzkov, constant));
        }
        worst
    };
    k_values
        .par_iter()
        .map(per_k)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Closed-form constants of the `L∞`, total variation and time-Lipschitz bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoreticalConstants {
    /// Growth rate of `‖ρ^n‖∞ ≤ ‖ρ^0‖∞ e^{L t}`.
    pub l: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda_star: f64,
    pub lambda: f64,
    pub datum_tv: f64,
    // time-independent part of C(t) and the factor in front of the TV bound
    c_base: f64,
    c_slope: f64,
}

impl TheoreticalConstants {
    /// `(K2 t + TV(ρ^0)) e^{K1 t}`
    pub fn bound_tv(&self, t: f64) -> f64 {
        let prefactor = self.k2 * t + self.datum_tv;
        if prefactor == 0.0 {
            return 0.0;
        }
        prefactor * (self.k1 * t).exp()
    }

    /// `‖ρ^0‖∞ e^{L t}`
    pub fn bound_linf(&self, datum_linf: f64, t: f64) -> f64 {
        if datum_linf == 0.0 {
            return 0.0;
        }
        datum_linf * (self.l * t).exp()
    }

    /// Lipschitz constant `C(T)` of `t ↦ ρ(t)` in `L1`.
    pub fn c_of_t(&self, t: f64) -> f64 {
        let tv = self.bound_tv(t);
        self.c_base + if tv == 0.0 { 0.0 } else { self.c_slope * tv }
    }
}

pub fn theoretical_constants(model: &ModelSpec, datum_l1: f64, datum_tv: f64, lambda: f64) -> TheoreticalConstants {
    let c = model.c_x;
    let df = model.norm_dr_f;
    let d2f = model.norm_d2rx_f;
    let v = model.norm_v;
    let dv = model.norm_dv;
    let deta = model.kernel.norm_deta;
    let deta_w1 = model.norm_deta_w1();
    let v_w2 = model.norm_v_w2();
    let l1 = datum_l1;

    let l = c * v + df * dv * l1 * deta;
    let k1 = 0.5 * df * dv * l1 * deta + d2f * v;
    let k2 = (1.5 * c + (df + c) * deta_w1 * l1 + 0.5 * (c + df * (2.0 + l1 * deta)) * deta_w1) * v_w2 * l1;
    let c_base = c * v * l1 + 2.0 * df * l1 * l1 * deta * dv;
    let c_slope = df * v + lambda / 3.0;
    TheoreticalConstants {
        l,
        k1,
        k2,
        lambda_star: max_stable_lambda(model).value,
        lambda,
        datum_tv,
        c_base,
        c_slope,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub l1: f64,
    pub linf: f64,
    pub tv: f64,
    pub entropy_residual: f64,
    pub bound_linf: f64,
    pub bound_tv: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn max_linf(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.linf))
    }

    pub fn max_tv(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.tv))
    }

    pub fn max_entropy_residual(&self) -> f64 {
        self.rows.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.entropy_residual))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Side {
    Below,
    Above,
}

/// Runtime checks of the a priori estimates along a run.
///
/// Violations abort the run in strict mode and are logged otherwise.
#[derive(Debug)]
pub struct InvariantMonitor {
    grid: Grid,
    strict: bool,
    nonnegative: bool,
    levels: Vec<(f64, Side)>,
    conserved_l1: Option<f64>,
    datum_linf: f64,
    constants: TheoreticalConstants,
    violations: Vec<String>,
}

impl InvariantMonitor {
    pub fn new(datum: &State, model: &ModelSpec, grid: &Grid, config: &RunConfig) -> Result<Self> {
        let (lo, hi) = datum
            .rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        let mut levels = Vec::new();
        let mut flat = model.flat_levels.clone();
        if !flat.contains(&0.0) {
            flat.push(0.0);
        }
        for &level in &flat {
            if hi <= level {
                levels.push((level, Side::Below));
            }
            if lo >= level {
                levels.push((level, Side::Above));
            }
        }
        let interior = datum.interior(grid);
        let is_flat = |r: f64| flat.contains(&r);
        let conserved_l1 = (is_flat(interior[0]) && is_flat(interior[interior.len() - 1])).then(|| l1_norm(datum, grid));
        let constants = theoretical_constants(model, l1_norm(datum, grid), total_variation(datum, grid), grid.lambda);
        Ok(InvariantMonitor {
            grid: grid.clone(),
            strict: config.strict_invariants,
            nonnegative: lo >= 0.0,
            levels,
            conserved_l1,
            datum_linf: linf_norm(datum, grid),
            constants,
            violations: Vec::new(),
        })
    }

    pub fn constants(&self) -> &TheoreticalConstants {
        &self.constants
    }

    pub fn row(&self, state: &State, entropy_residual: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            t: state.t,
            l1: l1_norm(state, &self.grid),
            linf: linf_norm(state, &self.grid),
            tv: total_variation(state, &self.grid),
            entropy_residual,
            bound_linf: self.constants.bound_linf(self.datum_linf, state.t),
            bound_tv: self.constants.bound_tv(state.t),
        }
    }

    fn violation(&mut self, msg: String) -> Result<()> {
        if self.strict {
            return Err(Error::InvariantViolation(msg));
        }
        if self.violations.len() < MAX_RECORDED_VIOLATIONS {
            log::warn!("{msg}");
            self.violations.push(msg);
        }
        Ok(())
    }

    /// Checks one recorded step; `state` must be the state `row` was built from.
    pub fn check(&mut self, state: &State, row: &DiagnosticsRow) -> Result<()> {
        let interior = state.interior(&self.grid);
        let (lo, hi) = interior
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        for (level, side) in self.levels.clone() {
            match side {
                Side::Below if hi > level + LEVEL_TOL => {
                    self.violation(format!("t={}: max {hi} exceeds flat level {level}", row.t))?
                }
                Side::Above if lo < level - LEVEL_TOL => {
                    self.violation(format!("t={}: min {lo} below flat level {level}", row.t))?
                }
                _ => {}
            }
        }
        if let Some(l1_0) = self.conserved_l1 {
            if (row.l1 - l1_0).abs() > CONSERVATION_RTOL * l1_0.max(f64::MIN_POSITIVE) {
                self.violation(format!("t={}: L1 norm {} drifted from {l1_0}", row.t, row.l1))?;
            }
        }
        if self.nonnegative {
            if row.linf > row.bound_linf * (1.0 + BOUND_RTOL) {
                self.violation(format!("t={}: L∞ {} above bound {}", row.t, row.linf, row.bound_linf))?;
            }
            if row.tv > row.bound_tv * (1.0 + BOUND_RTOL) + LEVEL_TOL {
                self.violation(format!("t={}: TV {} above bound {}", row.t, row.tv, row.bound_tv))?;
            }
        }
        if row.entropy_residual > ENTROPY_TOL {
            self.violation(format!("t={}: entropy residual {}", row.t, row.entropy_residual))?;
        }
        Ok(())
    }

    /// `‖ρ^n - ρ^m‖_{L1} ≤ C(T) |n - m| τ` on every pair of snapshots.
    pub fn check_time_lipschitz(&mut self, snapshots: &[Snapshot], t_final: f64) -> Result<()> {
        if !self.nonnegative {
            return Ok(());
        }
        let c = self.constants.c_of_t(t_final);
        for (i, a) in snapshots.iter().enumerate() {
            for b in &snapshots[i + 1..] {
                let d = l1_distance_interior(&a.rho, &b.rho, self.grid.h)?;
                let bound = c * (b.n - a.n) as f64 * self.grid.tau;
                if d > bound * (1.0 + BOUND_RTOL) {
                    self.violation(format!("time-Lipschitz: |ρ({}) - ρ({})| = {d} > {bound}", a.t, b.t))?;
                }
            }
        }
        Ok(())
    }

    pub fn into_violations(self) -> Vec<String> {
        self.violations
    }
}

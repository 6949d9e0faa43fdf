//! The Lax–Friedrichs type scheme
//!
//! ```text
//! ρ^{n+1}_j = ρ^n_j - λ ( F_{j+1/2}(ρ^n_j, ρ^n_{j+1}) - F_{j-1/2}(ρ^n_{j-1}, ρ^n_j) )
//! F_{j+1/2}(ρ1, ρ2) = (f(t, x, ρ1) + f(t, x, ρ2))/2 · v(c_{j+1/2}) - (ρ2 - ρ1)/(6λ)
//! ```
//!
//! together with the projection of piecewise constant data and the run driver.

use crate::config::RunConfig;
use crate::convolution::{check_window, convolve_into};
use crate::diagnostics::{self, DiagnosticsSeries, InvariantMonitor};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{kernel_cell_averages, KernelTable, ModelSpec};

/// One time level of cell averages, ghost cells included.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub rho: Vec<f64>,
    pub t: f64,
    pub n: usize,
}

impl State {
    pub fn interior<'a>(&'a self, grid: &Grid) -> &'a [f64] {
        &self.rho[grid.interior()]
    }
}

/// Whether the speed law sees the convolution or the local interface state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Nonlocal,
    Local,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nonlocal => "nonlocal",
            Mode::Local => "local",
        }
    }
}

/// A constant value on `[lo, hi]`; `lo = -∞` or `hi = +∞` give the far field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Piecewise constant initial datum, zero outside its pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct Datum {
    pieces: Vec<Piece>,
}

impl Datum {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if p.lo.is_nan() || p.hi.is_nan() || !(p.lo < p.hi) {
                return Err(Error::InvalidDatum(format!("empty interval [{}, {}]", p.lo, p.hi)));
            }
            if !p.value.is_finite() {
                return Err(Error::InvalidDatum(format!("non-finite value {}", p.value)));
            }
            if p.lo == f64::INFINITY || p.hi == f64::NEG_INFINITY {
                return Err(Error::InvalidDatum(format!("interval [{}, {}]", p.lo, p.hi)));
            }
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in pieces.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidDatum(format!(
                    "pieces [{}, {}] and [{}, {}] overlap",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        Ok(Datum { pieces })
    }

    pub fn constant(value: f64) -> Self {
        Datum {
            pieces: vec![Piece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                value,
            }],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn far_left(&self) -> f64 {
        match self.pieces.first() {
            Some(p) if p.lo == f64::NEG_INFINITY => p.value,
            _ => 0.0,
        }
    }

    pub fn far_right(&self) -> f64 {
        match self.pieces.last() {
            Some(p) if p.hi == f64::INFINITY => p.value,
            _ => 0.0,
        }
    }

    fn covers_line(&self) -> bool {
        let (Some(first), Some(last)) = (self.pieces.first(), self.pieces.last()) else {
            return false;
        };
        first.lo == f64::NEG_INFINITY
            && last.hi == f64::INFINITY
            && self.pieces.windows(2).all(|w| w[0].hi == w[1].lo)
    }

    /// Range of values attained, including the zero background when visible.
    pub fn value_range(&self) -> (f64, f64) {
        let init = if self.covers_line() {
            (f64::INFINITY, f64::NEG_INFINITY)
        } else {
            (0.0, 0.0)
        };
        self.pieces
            .iter()
            .fold(init, |(lo, hi), p| (lo.min(p.value), hi.max(p.value)))
    }

    /// Bounded support of the non-far-field pieces, if any.
    pub fn finite_extent(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            for x in [p.lo, p.hi] {
                if x.is_finite() {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

// Piece endpoints within this many cell widths of a mesh line are treated as
// lying on it, so that aligned data project without rounding residue.
const SNAP: f64 = 1e-9;

fn mesh_coordinate(x: f64, grid: &Grid) -> f64 {
    if x.is_infinite() {
        return x;
    }
    let u = (x - grid.x_min) / grid.h;
    let r = u.round();
    if (u - r).abs() < SNAP {
        r
    } else {
        u
    }
}

/// Exact cell averages of a piecewise constant datum. Ghost cells take the
/// far-field values.
pub fn project_initial_datum(datum: &Datum, grid: &Grid) -> State {
    let g = grid.ghost_width;
    let bounds: Vec<(f64, f64, f64)> = datum
        .pieces
        .iter()
        .map(|p| (mesh_coordinate(p.lo, grid), mesh_coordinate(p.hi, grid), p.value))
        .collect();
    let mut rho = vec![0.0; grid.storage_len()];
    for (j, cell) in rho[grid.interior()].iter_mut().enumerate() {
        let (left, right) = (j as f64, j as f64 + 1.0);
        for &(lo, hi, value) in &bounds {
            let overlap = right.min(hi) - left.max(lo);
            if overlap >= 1.0 {
                *cell += value;
            } else if overlap > 0.0 {
                *cell += value * overlap;
            }
        }
    }
    rho[..g].fill(datum.far_left());
    rho[g + grid.n_cells..].fill(datum.far_right());
    State { rho, t: 0.0, n: 0 }
}

/// Lax–Friedrichs numerical flux at an interface with convolution value `c`.
#[inline]
pub fn numerical_flux(t: f64, x: f64, rho_left: f64, rho_right: f64, c: f64, model: &ModelSpec, lambda: f64) -> f64 {
    0.5 * (model.f(t, x, rho_left) + model.f(t, x, rho_right)) * model.v(c) - (rho_right - rho_left) / (6.0 * lambda)
}

/// Flux for the local equation `∂t ρ + ∂x(f(t,x,ρ) v(ρ)) = 0`: the speed law is
/// evaluated at the interface average.
#[inline]
pub fn local_flux(t: f64, x: f64, rho_left: f64, rho_right: f64, model: &ModelSpec, lambda: f64) -> f64 {
    numerical_flux(t, x, rho_left, rho_right, 0.5 * (rho_left + rho_right), model, lambda)
}

fn refresh_ghosts(rho: &mut [f64], grid: &Grid) {
    let g = grid.ghost_width;
    let n = grid.n_cells;
    let (first, last) = (rho[g], rho[g + n - 1]);
    rho[..g].fill(first);
    rho[g + n..].fill(last);
}

/// Speed-law arguments at every interface for the given mode.
pub(crate) fn interface_arguments(rho: &[f64], table: &KernelTable, grid: &Grid, mode: Mode, out: &mut [f64]) -> Result<()> {
    match mode {
        Mode::Nonlocal => convolve_into(rho, table, grid, out),
        Mode::Local => {
            let g = grid.ghost_width;
            for (i, c) in out.iter_mut().enumerate() {
                *c = 0.5 * (rho[g + i - 1] + rho[g + i]);
            }
            Ok(())
        }
    }
}

/// Explicit time stepper holding its work buffers.
#[derive(Clone, Debug)]
pub struct Simulation {
    grid: Grid,
    model: ModelSpec,
    table: KernelTable,
    mode: Mode,
    state: State,
    conv: Vec<f64>,
    flux: Vec<f64>,
    next: Vec<f64>,
}

impl Simulation {
    pub fn new(grid: Grid, model: ModelSpec, mode: Mode, initial: State) -> Result<Self> {
        if initial.rho.len() != grid.storage_len() {
            return Err(Error::Misuse(format!(
                "state has {} cells, grid expects {}",
                initial.rho.len(),
                grid.storage_len()
            )));
        }
        let table = kernel_cell_averages(&model.kernel, &grid);
        if mode == Mode::Nonlocal {
            check_window(&table, &grid)?;
        }
        let n = grid.n_cells;
        let len = grid.storage_len();
        Ok(Simulation {
            grid,
            model,
            table,
            mode,
            state: initial,
            conv: vec![0.0; n + 1],
            flux: vec![0.0; n + 1],
            next: vec![0.0; len],
        })
    }

    /// Builds the grid, model and projected datum of a validated config.
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let model = config.build_model()?;
        let grid = config.build_grid(&model)?;
        config.check_stability(&grid, &model)?;
        let initial = project_initial_datum(&config.datum, &grid);
        Simulation::new(grid, model, config.mode, initial)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Advances one time step.
    pub fn advance(&mut self) -> Result<()> {
        let grid = &self.grid;
        let (g, n, lambda) = (grid.ghost_width, grid.n_cells, grid.lambda);
        let rho = &self.state.rho;
        let t = self.state.t;
        interface_arguments(rho, &self.table, grid, self.mode, &mut self.conv)?;
        for (i, flux) in self.flux.iter_mut().enumerate() {
            *flux = numerical_flux(t, grid.interface(i), rho[g + i - 1], rho[g + i], self.conv[i], &self.model, lambda);
        }
        let step = self.state.n + 1;
        for j in 0..n {
            let value = rho[g + j] - lambda * (self.flux[j + 1] - self.flux[j]);
            if !value.is_finite() {
                return Err(Error::NumericalBlowup { step, cell: j, value });
            }
            self.next[g + j] = value;
        }
        refresh_ghosts(&mut self.next, grid);
        std::mem::swap(&mut self.state.rho, &mut self.next);
        self.state.n = step;
        self.state.t = step as f64 * grid.tau;
        Ok(())
    }
}

/// One nonlocal step of `state`, returning the new time level.
pub fn step(state: &State, model: &ModelSpec, grid: &Grid) -> Result<State> {
    let mut sim = Simulation::new(grid.clone(), model.clone(), Mode::Nonlocal, state.clone())?;
    sim.advance()?;
    Ok(sim.state)
}

/// Snapshot of the interior cells at a recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub requested_t: f64,
    pub t: f64,
    pub n: usize,
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: DiagnosticsSeries,
    pub violations: Vec<String>,
}

/// Step indices of the requested snapshot times, rounded to the nearest step.
pub fn snapshot_steps(times: &[f64], tau: f64, n_final: usize) -> Result<Vec<(f64, usize)>> {
    let mut out: Vec<(f64, usize)> = Vec::with_capacity(times.len());
    for &t in times {
        let n = ((t / tau).round() as usize).min(n_final);
        if let Some(&(prev_t, prev_n)) = out.last() {
            if n <= prev_n {
                return Err(Error::Config(format!(
                    "snapshot times {prev_t} and {t} fall on the same or decreasing steps"
                )));
            }
        }
        out.push((t, n));
    }
    Ok(out)
}

/// Drives the scheme to `t_final`, recording snapshots and diagnostics.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let mut sim = Simulation::from_config(config)?;
    let grid = sim.grid().clone();
    let n_final = (config.t_final / grid.tau).round() as usize;
    let wanted = snapshot_steps(&config.snapshot_times, grid.tau, n_final)?;

    let datum_state = sim.state().clone();
    let mut monitor = InvariantMonitor::new(&datum_state, sim.model(), &grid, config)?;
    let mut series = DiagnosticsSeries::default();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut wanted_iter = wanted.iter().peekable();

    let mut record = |sim: &Simulation, prev: Option<&State>, snapshots: &mut Vec<Snapshot>, series: &mut DiagnosticsSeries| -> Result<()> {
        let state = sim.state();
        if config.diagnostics_on {
            let entropy = match prev {
                Some(prev) => diagnostics::step_entropy_residual(prev, state, sim.model(), sim.table(), &grid, sim.mode(), config.entropy_k_points)?,
                None => 0.0,
            };
            let row = monitor.row(state, entropy);
            monitor.check(state, &row)?;
            series.rows.push(row);
        }
        while let Some(&&(requested_t, n)) = wanted_iter.peek() {
            if n != state.n {
                break;
            }
            snapshots.push(Snapshot {
                requested_t,
                t: state.t,
                n,
                rho: state.interior(&grid).to_vec(),
            });
            wanted_iter.next();
        }
        Ok(())
    };

    record(&sim, None, &mut snapshots, &mut series)?;
    let mut prev = if config.diagnostics_on { Some(sim.state().clone()) } else { None };
    for _ in 0..n_final {
        sim.advance()?;
        record(&sim, prev.as_ref(), &mut snapshots, &mut series)?;
        if let Some(p) = prev.as_mut() {
            p.clone_from(sim.state());
        }
    }
    if config.diagnostics_on {
        monitor.check_time_lipschitz(&snapshots, config.t_final)?;
    }
    Ok(Trajectory {
        grid,
        snapshots,
        diagnostics: series,
        violations: monitor.into_violations(),
    })
}

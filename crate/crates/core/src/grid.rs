//! Uniform space-time mesh and its stability conditions.

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Value returned by [`max_stable_lambda`] when the velocity vanishes identically.
pub const LAMBDA_CAP: f64 = 1.0e3;

/// Uniform mesh on `[x_min, x_max]` with `ghost_width` constant-extension
/// cells on each side.
///
/// Interior cell `j` covers `[x_min + j h, x_min + (j+1) h]`. Interface `i`
/// (for `i = 0..=n_cells`) sits at `x_min + i h`, between cells `i-1` and `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub tau: f64,
    pub lambda: f64,
    pub n_cells: usize,
    pub ghost_width: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, lambda: f64, kernel_radius: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGeometry(format!(
                "domain [{x_min}, {x_max}] must have x_max > x_min"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGeometry(format!("n_cells = {n_cells}, need at least 2")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidGeometry(format!("lambda = {lambda} must be positive")));
        }
        if !(kernel_radius >= 0.0 && kernel_radius.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "kernel radius {kernel_radius} must be nonnegative"
            )));
        }
        let h = (x_max - x_min) / n_cells as f64;
        let ghost_width = (kernel_radius / h).ceil() as usize + 1;
        Ok(Grid {
            x_min,
            x_max,
            h,
            tau: lambda * h,
            lambda,
            n_cells,
            ghost_width,
        })
    }

    /// Length of a state vector including ghost cells.
    pub fn storage_len(&self) -> usize {
        self.n_cells + 2 * self.ghost_width
    }

    /// Storage range of the interior cells.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.ghost_width..self.ghost_width + self.n_cells
    }

    /// Center of interior cell `j`; negative or `>= n_cells` indices address ghosts.
    pub fn cell_center(&self, j: isize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.h
    }

    /// Position of interface `i`, the left edge of interior cell `i`.
    pub fn interface(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    /// `h < 1/C`; a flux without explicit x-dependence (`C = 0`) always passes.
    pub fn check_mesh_condition(&self, model: &ModelSpec) -> bool {
        model.c_x == 0.0 || self.h * model.c_x < 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableLambda {
    pub value: f64,
    /// Set when `‖v‖∞ = 0` and `value` is [`LAMBDA_CAP`].
    pub capped: bool,
}

/// Largest λ allowed by `λ (1 + 2‖∂ρf‖∞) ‖v‖∞ ≤ 1/6`.
pub fn max_stable_lambda(model: &ModelSpec) -> StableLambda {
    stable_lambda_from_norms(model.norm_dr_f, model.norm_v)
}

pub fn stable_lambda_from_norms(norm_dr_f: f64, norm_v: f64) -> StableLambda {
    let denom = 6.0 * (1.0 + 2.0 * norm_dr_f) * norm_v;
    if denom <= 0.0 {
        log::warn!("velocity norm vanishes, lambda* unbounded; capping at {LAMBDA_CAP}");
        return StableLambda {
            value: LAMBDA_CAP,
            capped: true,
        };
    }
    StableLambda {
        value: 1.0 / denom,
        capped: false,
    }
}

//! Interface convolution `c_{j+1/2} ≈ (ρ ∗ η)(x_{j+1/2})`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::KernelTable;
use crate::scheme::State;

/// Convolution values at the `n_cells + 1` interfaces of the interior grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionField {
    pub values: Vec<f64>,
    pub time_index: usize,
}

/// `c_i = Σ_m h η_m ρ̄_{i-m}`, where `ρ̄_i = (ρ_{i-1} + ρ_i)/2` is the average at
/// interface `i`. This is the midpoint rule for `∫ ρ(ξ) η(x_i - ξ) dξ`: a
/// kernel supported on `[a, b]` reads densities on `[x - b, x - a]`.
pub fn interface_convolution(state: &State, table: &KernelTable, grid: &Grid) -> Result<ConvolutionField> {
    if state.rho.len() != grid.storage_len() {
        return Err(Error::Misuse(format!(
            "state has {} cells, grid expects {}",
            state.rho.len(),
            grid.storage_len()
        )));
    }
    let mut values = vec![0.0; grid.n_cells + 1];
    convolve_into(&state.rho, table, grid, &mut values)?;
    Ok(ConvolutionField {
        values,
        time_index: state.n,
    })
}

/// Checks that every window read by [`convolve_into`] lies inside the storage.
pub(crate) fn check_window(table: &KernelTable, grid: &Grid) -> Result<()> {
    let g = grid.ghost_width as isize;
    // leftmost cell read: interface -m_hi needs cell -m_hi - 1
    if -table.m_hi() - 1 + g < 0 {
        return Err(Error::WindowUnderflow {
            interface: 0,
            ghost_width: grid.ghost_width,
        });
    }
    // rightmost cell read: interface n - m_lo needs cell n - m_lo
    if grid.n_cells as isize - table.m_lo + g >= grid.storage_len() as isize {
        return Err(Error::WindowUnderflow {
            interface: grid.n_cells,
            ghost_width: grid.ghost_width,
        });
    }
    Ok(())
}

/// Writes the interface convolution of `rho` (ghost cells included) into `out`.
pub(crate) fn convolve_into(rho: &[f64], table: &KernelTable, grid: &Grid, out: &mut [f64]) -> Result<()> {
    check_window(table, grid)?;
    debug_assert_eq!(out.len(), grid.n_cells + 1);
    let g = grid.ghost_width as isize;
    let hw: Vec<f64> = table.weights.iter().map(|w| table.h * w).collect();
    let m_hi = table.m_hi();
    for (i, c) in out.iter_mut().enumerate() {
        let i = i as isize;
        let mut acc = 0.0;
        for (offset, w) in hw.iter().enumerate() {
            let m = m_hi - offset as isize;
            // storage index of the right cell of interface i - m
            let right = (i - m + g) as usize;
            acc += w * 0.5 * (rho[right - 1] + rho[right]);
        }
        *c = acc;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{kernel_cell_averages, KernelSpec};

    fn setup(a: f64, b: f64, n: usize) -> (Grid, KernelTable) {
        let k = KernelSpec::normalized(a, b).unwrap();
        let grid = Grid::new(-2.0, 2.0, n, 0.05, k.radius()).unwrap();
        let table = kernel_cell_averages(&k, &grid);
        (grid, table)
    }

    fn state_from(grid: &Grid, f: impl Fn(f64) -> f64) -> State {
        let g = grid.ghost_width as isize;
        let rho = (0..grid.storage_len())
            .map(|s| f(grid.cell_center(s as isize - g)))
            .collect();
        State { rho, t: 0.0, n: 0 }
    }

    #[test]
    fn constant_density_is_reproduced() {
        let (grid, table) = setup(-0.1, 0.13, 400);
        let c = interface_convolution(&state_from(&grid, |_| 1.0), &table, &grid).unwrap();
        assert_eq!(c.values.len(), 401);
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let z = interface_convolution(&state_from(&grid, |_| 0.0), &table, &grid).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn window_underflow_detected() {
        let (mut grid, table) = setup(0.0, 0.25, 400);
        grid.ghost_width = 2;
        let state = state_from(&grid, |_| 1.0);
        assert!(matches!(
            interface_convolution(&state, &table, &grid),
            Err(Error::WindowUnderflow { .. })
        ));
    }

    #[test]
    fn forward_kernel_reads_downstream() {
        // a forward-looking kernel on (-1/4, 0) at x sees ρ on [x, x + 1/4]
        let (grid, table) = setup(-0.25, 0.0, 800);
        let bump = state_from(&grid, |x| if (0.5..0.75).contains(&x) { 1.0 } else { 0.0 });
        let c = interface_convolution(&bump, &table, &grid).unwrap();
        let at = |x: f64| c.values[((x - grid.x_min) / grid.h).round() as usize];
        assert!(at(0.45) > 0.1);
        assert!(at(0.3) > 0.0);
        assert!(at(0.8) < 1e-12);
        assert!(at(0.2) < 1e-12);
    }

    #[test]
    fn indicator_matches_fine_quadrature() {
        // ρ = 1_[0,1], kernel on (0, 0.25); oracle: midpoint integration of
        // ∫ ρ(ξ) η(x - ξ) dξ on a grid ten times finer
        let k = KernelSpec::normalized(0.0, 0.25).unwrap();
        let rho = |x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 };
        let oracle = |x: f64| {
            let n = 20_000;
            let h = 0.25 / n as f64;
            (0..n)
                .map(|i| {
                    let xi = x - 0.25 + (i as f64 + 0.5) * h;
                    rho(xi) * k.eval(x - xi) * h
                })
                .sum::<f64>()
        };
        let mut errs = vec![];
        for &n in &[200usize, 400, 800] {
            let grid = Grid::new(-2.0, 2.0, n, 0.05, k.radius()).unwrap();
            let table = kernel_cell_averages(&k, &grid);
            let c = interface_convolution(&state_from(&grid, rho), &table, &grid).unwrap();
            let i_half = ((0.5 - grid.x_min) / grid.h).round() as usize;
            let i_edge = ((0.1 - grid.x_min) / grid.h).round() as usize;
            assert!((c.values[i_half] - oracle(0.5)).abs() < 1e-10);
            errs.push((c.values[i_edge] - oracle(0.1)).abs());
        }
        // edge effects shrink with h
        assert!(errs[2] < errs[0]);
        assert!(errs[2] < 0.01);
    }

    #[test]
    fn young_and_smoothing_bounds() {
        let (grid, table) = setup(-0.07, 0.2, 500);
        let kernel = KernelSpec::normalized(-0.07, 0.2).unwrap();
        let state = state_from(&grid, |x| (3.0 * x).sin().abs() * if x.abs() < 1.2 { 1.0 } else { 0.0 });
        let c = interface_convolution(&state, &table, &grid).unwrap();
        let interior = &state.rho[grid.interior()];
        let l1: f64 = interior.iter().map(|r| grid.h * r.abs()).sum();
        let linf = interior.iter().fold(0f64, |m, r| m.max(r.abs()));
        let eta_max = table.weights.iter().fold(0f64, |m, &w| m.max(w));
        for v in &c.values {
            assert!(*v >= 0.0);
            assert!(*v <= linf + 1e-12);
            assert!(*v <= l1 * eta_max * (1.0 + 1e-12) + 1e-12);
        }
        for w in c.values.windows(2) {
            assert!((w[1] - w[0]).abs() <= grid.h * l1 * kernel.norm_deta * (1.0 + 1e-9));
        }
        for w in c.values.windows(3) {
            let d2 = (w[2] - 2.0 * w[1] + w[0]).abs();
            assert!(d2 <= 2.0 * grid.h * grid.h * l1 * kernel.norm_d2eta * (1.0 + 1e-9));
        }
    }
}

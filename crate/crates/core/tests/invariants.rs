//! Property tests for the structural invariants of the scheme on random data.

use nonlocal_core::convolution::interface_convolution;
use nonlocal_core::diagnostics::l1_norm;
use nonlocal_core::grid::Grid;
use nonlocal_core::models::kernel_cell_averages;
use nonlocal_core::scheme::numerical_flux;
use nonlocal_core::{builtin_model, max_stable_lambda, Mode, ModelName, ModelParams, ModelSpec, Simulation, State};
use proptest::prelude::*;

const N: usize = 200;
const STEPS: usize = 30;

fn traffic(name: ModelName) -> ModelSpec {
    builtin_model(name, &ModelParams::default()).unwrap()
}

fn grid_for(model: &ModelSpec) -> Grid {
    let lambda = 0.9 * max_stable_lambda(model).value;
    Grid::new(-2.0, 2.0, N, lambda, model.kernel.radius()).unwrap()
}

/// A state that is zero near the boundary and takes `values` in the middle
/// cells, so that nothing reaches the edges within `STEPS` steps.
fn compact_state(grid: &Grid, values: &[f64]) -> State {
    let mut rho = vec![0.0; grid.storage_len()];
    let start = grid.ghost_width + (N - values.len()) / 2;
    rho[start..start + values.len()].copy_from_slice(values);
    State { rho, t: 0.0, n: 0 }
}

fn densities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0], 20..=100)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traffic_stays_in_unit_interval_and_conserves_mass(values in densities(), forward in any::<bool>()) {
        let model = traffic(if forward { ModelName::TrafficForward } else { ModelName::TrafficBackward });
        let grid = grid_for(&model);
        let initial = compact_state(&grid, &values);
        let mass = l1_norm(&initial, &grid);
        let mut sim = Simulation::new(grid.clone(), model, Mode::Nonlocal, initial).unwrap();
        for _ in 0..STEPS {
            sim.advance().unwrap();
            for &r in sim.state().interior(&grid) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r), "cell value {r}");
            }
        }
        let drift = (l1_norm(sim.state(), &grid) - mass).abs();
        prop_assert!(drift <= 1e-12 * mass.max(1.0), "mass drift {drift}");
    }

    #[test]
    fn local_mode_is_positive_and_bounded(values in densities()) {
        let model = traffic(ModelName::TrafficForward);
        let grid = grid_for(&model);
        let mut sim = Simulation::new(grid.clone(), model, Mode::Local, compact_state(&grid, &values)).unwrap();
        for _ in 0..STEPS {
            sim.advance().unwrap();
        }
        for &r in sim.state().interior(&grid) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn convolution_stays_within_data_range(values in densities(), a in -0.3..0.0f64, width in 0.05..0.3f64) {
        let model = builtin_model(ModelName::TvExample, &ModelParams { kernel: Some((a, a + width)), ..Default::default() }).unwrap();
        let grid = grid_for(&model);
        let table = kernel_cell_averages(&model.kernel, &grid);
        let state = compact_state(&grid, &values);
        let (lo, hi) = values.iter().fold((0.0_f64, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let field = interface_convolution(&state, &table, &grid).unwrap();
        let slack = 1e-9 * (1.0 + hi);
        for &c in &field.values {
            prop_assert!(c >= lo - slack && c <= hi * table.mass() + slack, "c = {c} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn flux_is_consistent_and_monotone(l in 0.0..=1.0f64, r in 0.0..=1.0f64, c in 0.0..=1.0f64, d in 0.0..0.1f64) {
        let model = traffic(ModelName::TrafficForward);
        let lambda = 0.9 * max_stable_lambda(&model).value;
        let flux = |l, r| numerical_flux(0.0, 0.0, l, r, c, &model, lambda);
        prop_assert!((flux(l, l) - model.f(0.0, 0.0, l) * model.v(c)).abs() < 1e-15);
        prop_assert!(flux((l + d).min(1.0), r) >= flux(l, r) - 1e-15);
        prop_assert!(flux(l, (r + d).min(1.0)) <= flux(l, r) + 1e-15);
    }
}

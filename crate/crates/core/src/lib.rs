//! Finite volume solver for one-dimensional scalar conservation laws with a
//! nonlocal flux
//!
//! ```text
//! ∂t ρ + ∂x( f(t, x, ρ) · v(ρ ∗ η) ) = 0
//! ```
//!
//! The crate provides the Lax–Friedrichs type scheme with an explicit
//! interface convolution, the built-in traffic / total variation / local
//! limit models, runtime diagnostics (norms, total variation, discrete
//! Kružkov entropy residual and the a priori bound constants) and the
//! experiment recipes driven by the `nonlocal` command line tool.

pub mod config;
pub mod convolution;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod models;
pub mod output;
pub mod quadrature;
pub mod scheme;

pub use config::{parse_config, ConfigDoc, RunConfig};
pub use convolution::{interface_convolution, ConvolutionField};
pub use diagnostics::{DiagnosticsSeries, TheoreticalConstants};
pub use error::{Error, Result};
pub use grid::{max_stable_lambda, Grid, StableLambda};
pub use models::{builtin_model, KernelSpec, KernelTable, ModelName, ModelParams, ModelSpec};
pub use scheme::{Datum, Mode, Simulation, State, Trajectory};

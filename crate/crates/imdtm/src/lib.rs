//! Evolution of 1+1-dimensional periodic PDE initial-value problems on
//! towers of stored Taylor coefficients.
//!
//! Instead of keeping only function values on the grid, every point stores a
//! small table of scaled derivative coefficients `F(k, h)` (temporal order
//! `k`, spatial order `h`). One time step reconstructs the missing
//! higher-order spatial coefficients from neighboring towers with cached
//! derivative-aware stencil weights, fills higher temporal layers through
//! the PDE's coefficient recurrence, and shifts the expansion forward in
//! time — which allows time steps on the order of the grid spacing while an
//! internal neighbor self-consistency check measures solution quality.
//!
//! Module map:
//!
//! * [`series`] — truncated bivariate coefficient tables and their algebra
//!   (sums, Cauchy products, quotients, composed elementary functions).
//! * [`stencil`] — generalized finite-difference weights that consume whole
//!   coefficient bands per neighbor, plus an independent dense-solve oracle.
//! * [`equations`] — the wave and modified-KdV systems: recurrences,
//!   analytic solutions, initial towers.
//! * [`evolver`] — the tower stepper, pairwise-order stacking, and the
//!   analytic-error / self-consistency diagnostics.
//! * [`baseline`] — an RK4 method-of-lines reference with central
//!   differences of order 2 or 8.
//! * [`cli`] — flat-file run configuration and CSV diagnostics output.
//!
//! ```
//! use imdtm::equations::System;
//! use imdtm::evolver::{analytic_error, EvolverConfig, Grid, Scheme, Stacking, Stepper};
//!
//! let system = System::wave(18.0);
//! let cfg = EvolverConfig {
//!     dt: 1.0,
//!     steps: 10,
//!     radius: 3,
//!     h_stored: 2,
//!     stacking: Stacking::None,
//!     max_order: 9,
//!     scheme: Scheme::Imdtm,
//! };
//! let stepper = Stepper::new(system.clone(), 16, 18.0, &cfg).unwrap();
//! let mut grid = Grid::from_initial(&system, 16, 18.0, 2);
//! for _ in 0..cfg.steps {
//!     grid = stepper.step(&grid).unwrap();
//! }
//! assert!(analytic_error(&grid, &system, 10.0) < -9.0);
//! ```

pub mod baseline;
pub mod cli;
pub mod equations;
pub mod evolver;
pub mod series;
pub mod stencil;

pub use equations::System;
pub use evolver::{EvolverConfig, Grid, Scheme, Stacking, Stepper, Tower};
pub use series::Series2;
pub use stencil::{build_weights, birkhoff_weights_oracle, NeighborhoodGeometry, StencilWeightSet};

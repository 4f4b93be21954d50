//! Footloose Entrepreneur model on a continuous ring ("racetrack economy").
//!
//! The crate discretizes the ring into `N` equispaced nodes, solves the
//! instantaneous equilibrium (income, price index, nominal and real wage) by
//! fixed-point iteration, integrates the replicator migration dynamics with
//! explicit Euler to a stationary pattern, and evaluates the Fourier linear
//! stability of the homogeneous state in closed form.
//!
//! ```
//! use racetrack_fe::{stability, ModelParams};
//!
//! let p = ModelParams { tau: 1.6, ..Default::default() };
//! assert!(stability::eigenvalue(6, &p) > 0.0);
//! assert!(stability::eigenvalue(1, &p) < 0.0);
//! ```

pub mod analysis;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod params;
pub mod stability;
pub mod theory;

pub use error::{Error, Result};
pub use grid::{make_grid, perturbed_uniform, uniform_field, Field, Grid};
pub use kernel::KernelMatrix;
pub use params::{ModelParams, NumericsConfig};

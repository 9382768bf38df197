//! Numerical laboratory for the fractional diffusion limit of the linear
//! Boltzmann equation with a heavy-tailed equilibrium, drift, and a degenerate
//! space-dependent collision frequency.
pub mod auxiliary;
pub mod config;
pub mod density;
pub mod error;
pub mod harness;
pub mod io;
pub mod kinetic_fv;
pub mod kinetic_mc;
pub mod model;
pub mod nonlocal;
pub mod quadrature;

pub use density::{DensityField, Grid1d, InitialProfile, Provenance};
pub use error::{Error, Result};
pub use model::{gamma_exponent, Model, ModelParams};

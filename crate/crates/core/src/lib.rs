//! Poisson-energy floorplanning.
//!
//! Rectangular modules are placed inside a fixed rectangular outline. Their
//! mollified densities drive a Neumann Poisson problem whose energy acts as a
//! smooth overlap penalty next to a smoothed wirelength. The crate provides:
//!
//! - [`geometry`]: exact rectangle overlap and erosion areas,
//! - [`field`]: grids, mollified densities, residuals and variance,
//! - [`spectral`]: the cosine-basis Neumann Poisson solver and H⁻¹ norms,
//! - [`energy`]: Poisson energy, module energies, spectral reports and overlap certificates,
//! - [`wirelength`]: HPWL and the LSE / WA smooth surrogates,
//! - [`optimize`]: the composite objective, analytic forces and projected gradient descent,
//! - [`flow`]: a finite-volume Wasserstein-2 gradient flow of the Poisson energy.
//!
//! With the default `parallel` feature the grid and per-module loops run on
//! rayon; without it every loop runs sequentially. Reductions use a fixed
//! order in both cases, so results are bit-identical either way.

pub mod energy;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod optimize;
pub mod par;
pub mod sample;
pub mod spectral;
pub mod wirelength;

pub use error::{PefError, Result};
pub use field::{Grid, ScalarField};
pub use geometry::{AxisRect, Design, ModuleShape, Placement, Point};
pub use spectral::PoissonSolver;
pub use wirelength::{Net, Netlist, Pin, SmoothingConfig, WirelengthModel};

//! Spectral solvers for the linear dispersive equation
//!
//! ```text
//! ∂_z μ = i ε^α D_κ μ + R(x/ε) μ,    D_κ = −P(−i∂_x),
//! ```
//!
//! on a periodic truncation of the line, together with the tooling used to
//! measure how the error of each time integrator scales in the step size `τ`
//! and in the concentration scale `ε`.
//!
//! - [`model`]: dispersion polynomial, oscillatory phase, rate laws, and the
//!   moment-equation reduction.
//! - [`spectral`]: grid, transforms, Fourier multipliers, `φ1`, X-norm.
//! - [`integrators`]: exponential integrator, Lie–Trotter, Strang, and the
//!   low-regularity integrator.
//! - [`harness`]: reference solutions, `(τ, ε)` sweeps, rate fits.
//! - [`presets`]: the Schrödinger and KdV configurations.

pub mod error;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod presets;
pub mod spectral;

pub use num_complex::Complex64;
pub use error::{Error, Result};
pub use integrators::{solve, SolveConfig, SolveOutput, StepperKind};
pub use model::DispersiveModel;
pub use spectral::{Grid, InitialDataSpec, PotentialSpec, SpectralField};

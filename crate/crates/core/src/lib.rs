//! Numerical laboratory for spatial SIS epidemic models on a 1-D habitat.
//!
//! Four reaction-diffusion models are covered, distinguished by incidence
//! (mass action `βSI` or standard `βSI/(S+I)`) and by whether the
//! susceptible population has linear recruitment `Λ - S`:
//! MO, MW, SO and SW (see [`ModelKind`]).
//!
//! * [`grid`]: mesh, quadrature, Neumann Laplacian
//! * [`coeffs`]: coefficient presets and risk classification
//! * [`kinetics`]: reaction terms and their Jacobians
//! * [`spectral`]: disease-free state, principal eigenvalues, `R0`
//! * [`dynamics`]: IMEX time stepping, Lyapunov functionals, diagnostics
//! * [`steady`]: Newton solves, continuation sweeps, limiting profiles

pub mod coeffs;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kinetics;
pub mod linalg;
pub mod spectral;
pub mod steady;

pub use coeffs::{CoefficientSet, NodeCoeffs, RiskClassification};
pub use error::{Error, Result};
pub use grid::{Field, Grid, NeumannLaplacian};
pub use kinetics::ModelKind;

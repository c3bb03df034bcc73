//! Normalized ground states of the biharmonic Schrödinger equation with
//! combined subcritical and Sobolev-critical power nonlinearities, for
//! radial profiles in ℝ^N, N ≥ 5.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod error;
pub mod fiber;
pub mod functionals;
pub mod grid;
mod interp;
pub mod landscape;
pub mod minimizer;
pub mod scalar;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use fiber::{analyze_fiber, psi, psi_prime, xi, xi_turning_point, FiberAnalysis, ZeroKind};
pub use functionals::{
    energy, l2_gradient, lagrange_multiplier, norm_bundle, pohozaev, projected_gradient, NormBundle,
};
pub use grid::{
    build_grid, integrate, laplacian, laplacian_order, mass_dilate, scale_field, RadialField,
    RadialGrid,
};
pub use landscape::{
    derive_exponents, f_landscape, landscape_constant, mass_threshold, rho_star, ExponentSet,
    LandscapeParams, MassThreshold,
};
pub use minimizer::{minimize, minimize_from, seed, GroundState, SolverConfig};

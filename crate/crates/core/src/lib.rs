//! Numerics for the cubic derivative nonlinear Schrödinger equation
//! `i∂ₜu + ½∂ₓ²u = N(u, ∂ₓu)` with small data `u(0) = εφ`.
//!
//! - [`nonlinearity`]: cubic polynomial algebra, structural checks and the symbol `ν(ξ)`.
//! - [`spectral`]: periodic grid, transforms and the operators `U, G, M, D, J, Z, H, S_Φ`.
//! - [`profile_ode`]: the reduced ODE `i∂ₜβ = (κ/t)|β|²β + ρ`.
//! - [`solver`]: integrating-factor RK4 for the full equation.
//! - [`analysis`]: lifespan predictor, regimes, asymptotic profile and diagnostics.
//! - [`verify`]: the self-check suite used by the command-line tool.

pub mod analysis;
pub mod defaults;
pub mod error;
pub mod extended;
pub mod maximize;
pub mod nonlinearity;
pub mod profile_ode;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use nonlinearity::{CubicNonlinearity, FgDecomposition, MonomialIndex};
pub use spectral::{FieldState, Grid, SpectralProfile};

pub use num_complex::Complex64;

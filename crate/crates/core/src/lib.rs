//! Lorentzian functional-renormalization-group flows of a scalar effective
//! potential in the local potential approximation, with a local (mass-like)
//! regulator q_k = k².
//!
//! The flow source is the Hadamard-renormalized Wick square of the
//! fluctuation field, available for the Minkowski vacuum, thermal states and
//! the de Sitter Bunch–Davies state ([`kernels`]). On top of that sit the
//! coupling beta systems ([`beta`]), an adaptive Dormand–Prince integrator
//! ([`ode`]), fixed-point and critical-exponent analysis ([`fixed_points`]),
//! the full grid flow of U(ρ) ([`potential`]) and the `lfrg` command line
//! front end ([`cli`]).

pub mod beta;
pub mod cli;
pub mod error;
pub mod fixed_points;
pub mod kernels;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};

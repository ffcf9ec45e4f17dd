//! Equilibria and linear stability of hierarchical size-structured
//! population models
//!
//! ```text
//! u_t + (gamma(s, Q) u)_s + mu(s, Q) u = 0,      0 <= s <= m
//! u(0, t) = int_0^m beta(s, Q) u ds
//! Q(s, t) = alpha int_0^s w u + int_s^m w u
//! ```
//!
//! The crate computes stationary solutions and judges their linear stability
//! along independent routes: the explicit characteristic function available
//! when the nonlocal coupling coefficient vanishes ([`spectral::special`]), the
//! characteristic determinant of the transformed second-order eigenproblem
//! ([`spectral::general`]), pointwise positivity and dissipativity criteria
//! ([`conditions`]), and direct simulation of the nonlinear equation
//! ([`simulator`]).

pub mod conditions;
pub mod equilibrium;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linearization;
pub mod model;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, Quadrature};
pub use model::ModelSpec;

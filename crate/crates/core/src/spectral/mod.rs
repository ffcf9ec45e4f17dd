//! Eigenvalues of the linearized problem.
//!
//! [`special`] treats `sigma* = 0`, where the characteristic equation is the
//! explicit scalar `K(lambda) = 1`. [`general`] integrates the second-order
//! eigenproblem for arbitrary coefficients and counts and locates zeros of the
//! resulting determinant in rectangles of the complex plane.

use std::collections::BTreeMap;

use serde::Serialize;

pub mod general;
pub mod special;

pub use general::{
    char_determinant, char_determinant_alpha1, count_roots, find_roots, fundamental_solutions,
    Determinant, FundamentalSolutions, Rect, Root, SpectrumReport,
};
pub use special::{capital_pi, classify_special, dominant_root, k_prime, k_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Outcome of a stability criterion together with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub criterion: String,
    pub evidence: BTreeMap<String, f64>,
}

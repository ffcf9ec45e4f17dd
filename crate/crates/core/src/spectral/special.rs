//! The explicit characteristic function for `sigma* = 0`.
//!
//! With `Pi(lambda, s) = pi(s, Q*) e*(s) exp(-lambda Gamma(s))`, which reduces
//! to `gamma*(0)/gamma*(s) exp(-int_0^s (lambda + mu*)/gamma*)` when
//! `gamma_Q = 0`, eigenvalues are the roots of `K(lambda) = Lambda(Pi) = 1`.
//! On the real line `K` is strictly decreasing when the positivity kernel is
//! non-negative, so the dominant eigenvalue is its largest real root.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{StabilityVerdict, Verdict};
use crate::error::{Error, Result};
use crate::linearization::LinearizedCoefficients;

/// `sigma*` counts as identically zero below this.
pub const SIGMA_ZERO_TOL: f64 = 1e-12;

fn ensure_special(c: &LinearizedCoefficients) -> Result<()> {
    let max = c.sigma_star_max();
    if max > SIGMA_ZERO_TOL {
        return Err(Error::WrongRegime(format!(
            "explicit characteristic function needs sigma* = 0, got max |sigma*| = {max:e}"
        )));
    }
    Ok(())
}

/// `Pi(lambda, s_i)` at every node.
pub(crate) fn pi_nodes(c: &LinearizedCoefficients, lambda: f64) -> Vec<f64> {
    c.log_pi0
        .iter()
        .zip(c.capital_gamma.values())
        .map(|(l, g)| (l - lambda * g).exp())
        .collect()
}

/// `Pi(lambda, s)`; between nodes the exponent is interpolated by the cubic
/// through the four nearest nodes.
pub fn capital_pi(c: &LinearizedCoefficients, lambda: f64, s: f64) -> Result<f64> {
    ensure_special(c)?;
    let m = c.grid.m();
    if !(0.0..=m).contains(&s) {
        return Err(Error::domain(format!("s = {s} outside [0, {m}]")));
    }
    let n = c.grid.n();
    let h = c.h();
    let k = ((s / h).floor() as usize).min(n - 1);
    let first = k.saturating_sub(1).min(n - 3);
    let x = (s - c.grid.node(first)) / h;
    let g = c.capital_gamma.values();
    let exponent = |i: usize| c.log_pi0[i] - lambda * g[i];
    let mut value = 0.0;
    for j in 0..4 {
        let mut weight = 1.0;
        for l in 0..4 {
            if l != j {
                weight *= (x - l as f64) / (j as f64 - l as f64);
            }
        }
        value += weight * exponent(first + j);
    }
    Ok(value.exp())
}

fn k_unchecked(c: &LinearizedCoefficients, lambda: f64) -> f64 {
    c.lambda_slice(&pi_nodes(c, lambda))
}

/// `K(lambda) = int beta* Pi + int beta_Q u* (alpha int_0^s w Pi + int_s^m w Pi)`.
pub fn k_value(c: &LinearizedCoefficients, lambda: f64) -> Result<f64> {
    ensure_special(c)?;
    Ok(k_unchecked(c, lambda))
}

/// `K'(lambda) = -int Pi Gamma B` with `B` the positivity kernel.
pub fn k_prime(c: &LinearizedCoefficients, lambda: f64) -> Result<f64> {
    ensure_special(c)?;
    let pi = pi_nodes(c, lambda);
    let kernel = c.positivity_kernel();
    let f: Vec<f64> = pi
        .iter()
        .zip(c.capital_gamma.values())
        .zip(&kernel)
        .map(|((p, g), b)| p * g * b)
        .collect();
    Ok(-c.quadrature.integrate_slice(&f, c.h()))
}

/// `[-3 max(mu*/gamma*) - 10, 10]`.
pub fn default_search_window(c: &LinearizedCoefficients) -> [f64; 2] {
    let decay = c
        .mu_star
        .values()
        .iter()
        .zip(c.gamma_star.values())
        .fold(0.0f64, |acc, (m, g)| acc.max((m / g).abs()));
    [-3.0 * decay - 10.0, 10.0]
}

/// Largest `lambda` in `search` with `K(lambda) = 1`, located by a 256-step
/// sign-change scan and bisection to `1e-10`.
pub fn dominant_root(c: &LinearizedCoefficients, search: [f64; 2]) -> Result<Option<f64>> {
    ensure_special(c)?;
    let [lo, hi] = search;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!("invalid search window [{lo}, {hi}]")));
    }
    const STEPS: usize = 256;
    let xs: Vec<f64> = (0..=STEPS)
        .map(|i| if i == STEPS { hi } else { lo + (hi - lo) * i as f64 / STEPS as f64 })
        .collect();
    let fs: Vec<f64> = xs.par_iter().map(|&x| k_unchecked(c, x) - 1.0).collect();
    for i in (0..STEPS).rev() {
        let (fa, fb) = (fs[i], fs[i + 1]);
        if !(fa.is_finite() && fb.is_finite()) {
            continue;
        }
        if fb == 0.0 {
            return Ok(Some(xs[i + 1]));
        }
        if (fa < 0.0) != (fb < 0.0) {
            let (mut a, mut b, mut f_a) = (xs[i], xs[i + 1], fa);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                let fm = k_unchecked(c, mid) - 1.0;
                if fm == 0.0 {
                    return Ok(Some(mid));
                }
                if (fm < 0.0) == (f_a < 0.0) {
                    a = mid;
                    f_a = fm;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
    }
    Ok(None)
}

/// Stability from the sign of `beta_Q` along the equilibrium: stable when
/// `beta_Q <= 0`, not identically zero, and the positivity kernel is
/// non-negative; unstable when `beta_Q >= 0`, not identically zero. The
/// dominant root is attached as evidence and never decides the verdict.
pub fn classify_special(c: &LinearizedCoefficients) -> Result<StabilityVerdict> {
    ensure_special(c)?;
    let bq = c.beta_q_star.values();
    let bq_min = bq.iter().cloned().fold(f64::INFINITY, f64::min);
    let bq_max = bq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let identically_zero = bq_min == 0.0 && bq_max == 0.0;
    let kernel_min = c.positivity_kernel().into_iter().fold(f64::INFINITY, f64::min);

    let mut evidence = BTreeMap::new();
    evidence.insert("beta_q_min".to_string(), bq_min);
    evidence.insert("beta_q_max".to_string(), bq_max);
    evidence.insert("positivity_margin".to_string(), kernel_min);
    evidence.insert("k_at_zero".to_string(), k_unchecked(c, 0.0));
    if let Some(root) = dominant_root(c, default_search_window(c))? {
        evidence.insert("dominant_root".to_string(), root);
    }

    let (verdict, criterion) = if identically_zero {
        (Verdict::Inconclusive, "beta_q_identically_zero")
    } else if bq_max <= 0.0 && kernel_min >= 0.0 {
        (Verdict::Stable, "beta_q_nonpositive_with_positivity")
    } else if bq_min >= 0.0 {
        (Verdict::Unstable, "beta_q_nonnegative")
    } else {
        (Verdict::Inconclusive, "beta_q_sign_hypotheses_fail")
    };
    Ok(StabilityVerdict {
        verdict,
        criterion: criterion.to_string(),
        evidence,
    })
}

//! Frozen coefficients of the problem linearized about an equilibrium.
//!
//! With `Q*` the equilibrium environment and all partials taken at
//! `(s, Q*(s))`:
//!
//! ```text
//! rho*   = mu + gamma_s + 2 (alpha - 1) w gamma_Q u*
//! sigma* = mu_Q u* + gamma_sQ u* + gamma_Q u*' + (alpha - 1) w gamma_QQ u*^2
//! e*(s)  = exp((1 - alpha) int_0^s w gamma_Q u* / gamma*)
//! Gamma(s) = int_0^s 1 / gamma*
//! Lambda(v) = int beta* v + int beta_Q u* (alpha int_0^s w v + int_s^m w v)
//! ```

use crate::equilibrium::{Equilibrium, Sampler};
use crate::error::{Error, Result};
use crate::expr::{Expr, GridExpr};
use crate::grid::{environment_slice, integrate, Grid, GridFunction, Quadrature};
use crate::model::ModelSpec;

/// Coefficient data of the linearization. Immutable once built.
#[derive(Debug, Clone)]
pub struct LinearizedCoefficients {
    pub grid: Grid,
    pub alpha: f64,
    /// Birth level `u*(0)` of the equilibrium.
    pub b: f64,
    pub quadrature: Quadrature,
    pub gamma_star: GridFunction,
    pub rho_star: GridFunction,
    pub sigma_star: GridFunction,
    pub e_star: GridFunction,
    pub capital_gamma: GridFunction,
    pub beta_star: GridFunction,
    /// `beta_Q(s, Q*(s))` alone.
    pub beta_q_star: GridFunction,
    /// `beta_Q(s, Q*(s)) u*(s)`.
    pub beta_q_u_star: GridFunction,
    pub w: GridFunction,
    pub w_prime: GridFunction,
    pub u_star: GridFunction,
    pub u_star_prime: GridFunction,
    pub q_star: GridFunction,
    pub mu_star: GridFunction,
    pub gamma_q_star: GridFunction,
    /// `pi(s, Q*)`.
    pub survival: GridFunction,
    /// `L^1` norm of `sigma*`.
    pub sigma_star_l1: f64,
    /// `log(pi e*)`, the `lambda`-free part of `log Pi`.
    pub(crate) log_pi0: Vec<f64>,
}

fn sample(expr: &Expr, nodes: &[f64], q: &[f64], name: &str) -> Result<Vec<f64>> {
    GridExpr::new(expr, nodes)
        .eval(q)
        .map_err(|e| Error::model(format!("{name} at the equilibrium: {e}")))
}

/// Samples every rate and partial at the equilibrium and assembles the
/// coefficients.
pub fn linearize(model: &ModelSpec, eq: &Equilibrium) -> Result<LinearizedCoefficients> {
    let grid = model.grid();
    if *eq.q_star.grid() != grid || *eq.u_star.grid() != grid {
        return Err(Error::domain("equilibrium is not sampled on the model grid"));
    }
    let rule = model.quadrature;
    let alpha = model.alpha();
    let h = grid.h();
    let nodes = grid.nodes();
    let q = eq.q_star.values();
    let u = eq.u_star.values();
    let r = model.rates();

    let sampler = Sampler::new(model)?;
    let gamma = sampler.gamma_positive(q)?;
    let w = sampler.w.clone();
    let w_prime = sample(&r.w_s, &nodes, q, "w_s")?;
    let mu = sample(&r.mu, &nodes, q, "mu")?;
    let mu_q = sample(&r.mu_q, &nodes, q, "mu_Q")?;
    let gamma_s = sample(&r.gamma_s, &nodes, q, "gamma_s")?;
    let gamma_q = sample(&r.gamma_q, &nodes, q, "gamma_Q")?;
    let gamma_sq = sample(&r.gamma_sq, &nodes, q, "gamma_sQ")?;
    let gamma_qq = sample(&r.gamma_qq, &nodes, q, "gamma_QQ")?;
    let beta = sample(&r.beta, &nodes, q, "beta")?;
    let beta_q = sample(&r.beta_q, &nodes, q, "beta_Q")?;

    let n = nodes.len();
    let a1 = alpha - 1.0;
    let mut rho = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    let mut u_prime = vec![0.0; n];
    for i in 0..n {
        let coupling = a1 * w[i] * gamma_q[i] * u[i];
        // derivative of the stationary profile through Q*' = (alpha - 1) w u*
        u_prime[i] = -u[i] * (mu[i] + gamma_s[i] + coupling) / gamma[i];
        rho[i] = mu[i] + gamma_s[i] + 2.0 * coupling;
        sigma[i] = mu_q[i] * u[i]
            + gamma_sq[i] * u[i]
            + gamma_q[i] * u_prime[i]
            + a1 * w[i] * gamma_qq[i] * u[i] * u[i];
    }

    let inv_gamma: Vec<f64> = gamma.iter().map(|g| 1.0 / g).collect();
    let capital_gamma = rule.cumulative_slice(&inv_gamma, h, true);

    let log_e: Vec<f64> = if alpha == 1.0 {
        vec![0.0; n]
    } else if model.estar_w_of_s {
        let f: Vec<f64> = (0..n).map(|i| gamma_q[i] * u[i] / gamma[i]).collect();
        let c = rule.cumulative_slice(&f, h, true);
        (0..n).map(|i| (1.0 - alpha) * w[i] * c[i]).collect()
    } else {
        let f: Vec<f64> = (0..n).map(|i| w[i] * gamma_q[i] * u[i] / gamma[i]).collect();
        let c = rule.cumulative_slice(&f, h, true);
        c.iter().map(|ci| (1.0 - alpha) * ci).collect()
    };

    let ratio: Vec<f64> = mu.iter().zip(&inv_gamma).map(|(m, ig)| m * ig).collect();
    let cum = rule.cumulative_slice(&ratio, h, true);
    let log_pi: Vec<f64> = (0..n).map(|i| (gamma[0] / gamma[i]).ln() - cum[i]).collect();
    let log_pi0: Vec<f64> = log_pi.iter().zip(&log_e).map(|(a, b)| a + b).collect();

    let beta_q_u: Vec<f64> = beta_q.iter().zip(u).map(|(bq, ui)| bq * ui).collect();
    let gf = |v: Vec<f64>| GridFunction::new(grid, v);
    let sigma_star = gf(sigma)?;
    let sigma_star_l1 = integrate(&sigma_star.map(f64::abs)?, 0.0, grid.m())?;
    Ok(LinearizedCoefficients {
        grid,
        alpha,
        b: eq.b,
        quadrature: rule,
        gamma_star: gf(gamma)?,
        rho_star: gf(rho)?,
        sigma_star,
        e_star: gf(log_e.iter().map(|v| v.exp()).collect())?,
        capital_gamma: gf(capital_gamma)?,
        beta_star: gf(beta)?,
        beta_q_star: gf(beta_q)?,
        beta_q_u_star: gf(beta_q_u)?,
        w: gf(w)?,
        w_prime: gf(w_prime)?,
        u_star: eq.u_star.clone(),
        u_star_prime: gf(u_prime)?,
        q_star: eq.q_star.clone(),
        mu_star: gf(mu)?,
        gamma_q_star: gf(gamma_q)?,
        survival: gf(log_pi.iter().map(|v| v.exp()).collect())?,
        sigma_star_l1,
        log_pi0,
    })
}

impl LinearizedCoefficients {
    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// `Lambda` on raw samples; no grid check.
    pub(crate) fn lambda_slice(&self, v: &[f64]) -> f64 {
        let h = self.h();
        let rule = self.quadrature;
        let direct: Vec<f64> = self.beta_star.values().iter().zip(v).map(|(b, x)| b * x).collect();
        let wv: Vec<f64> = self.w.values().iter().zip(v).map(|(w, x)| w * x).collect();
        let env = environment_slice(rule, &wv, h, self.alpha);
        let coupled: Vec<f64> = self
            .beta_q_u_star
            .values()
            .iter()
            .zip(&env)
            .map(|(a, e)| a * e)
            .collect();
        rule.integrate_slice(&direct, h) + rule.integrate_slice(&coupled, h)
    }

    /// `B(s) = beta* + w (int_0^s beta_Q u* + alpha int_s^m beta_Q u*)`,
    /// the kernel of the positivity condition and of `K'`.
    pub fn positivity_kernel(&self) -> Vec<f64> {
        let h = self.h();
        let c = self.quadrature.cumulative_slice(self.beta_q_u_star.values(), h, true);
        let total = *c.last().unwrap_or(&0.0);
        self.beta_star
            .values()
            .iter()
            .zip(self.w.values())
            .zip(&c)
            .map(|((b, w), ci)| b + w * (ci + self.alpha * (total - ci)))
            .collect()
    }

    /// Largest `|sigma*|` over the nodes.
    pub fn sigma_star_max(&self) -> f64 {
        self.sigma_star.max_abs()
    }
}

/// The boundary functional `Lambda(v)`.
pub fn apply_lambda(c: &LinearizedCoefficients, v: &GridFunction) -> Result<f64> {
    if *v.grid() != c.grid {
        return Err(Error::domain("argument of Lambda is not on the coefficient grid"));
    }
    Ok(c.lambda_slice(v.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{equilibrium_at, solve_equilibrium};
    use crate::expr::parse;

    const DECLINING_BETA: &str = "(480/997)*(1+s)*(3-2*Q)";

    fn declining(alpha: f64, n: usize) -> ModelSpec {
        ModelSpec::from_sources(1.0, alpha, n, "1", DECLINING_BETA, "1 - s/2", "1").unwrap()
    }

    fn positive(model: &ModelSpec) -> Equilibrium {
        solve_equilibrium(model, [0.5, 2.0]).unwrap().pop().unwrap()
    }

    #[test]
    fn declining_coefficients() {
        let model = declining(0.5, 512);
        let eq = positive(&model);
        let c = linearize(&model, &eq).unwrap();
        assert!(c.sigma_star.values().iter().all(|&v| v == 0.0));
        assert!(c.e_star.values().iter().all(|&v| v == 1.0));
        assert!(c.rho_star.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert_eq!(c.sigma_star_l1, 0.0);
        assert_eq!(c.capital_gamma.values()[0], 0.0);
        assert!(c.capital_gamma.values().windows(2).all(|p| p[1] > p[0]));
        for (s, g) in c.grid.nodes().iter().zip(c.capital_gamma.values()) {
            assert!((g + 2.0 * (1.0 - s / 2.0).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn e_star_is_one_when_alpha_is_one() {
        let model = ModelSpec::from_sources(1.0, 1.0, 64, "1", "2*exp(-Q)", "1/(1+Q)", "1").unwrap();
        let eq = equilibrium_at(&model, 0.7).unwrap();
        let c = linearize(&model, &eq).unwrap();
        assert!(c.e_star.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn e_star_readings_differ_only_with_varying_weight() {
        let mut model =
            ModelSpec::from_sources(1.0, 0.3, 128, "1 + s", "2*exp(-Q)", "1/(1+Q)", "1").unwrap();
        let eq = equilibrium_at(&model, 0.7).unwrap();
        let a = linearize(&model, &eq).unwrap();
        model.estar_w_of_s = true;
        let b = linearize(&model, &eq).unwrap();
        assert_eq!(a.e_star.values()[0], 1.0);
        assert_eq!(b.e_star.values()[0], 1.0);
        assert!(a.e_star.max_diff(&b.e_star).unwrap() > 1e-4);
    }

    #[test]
    fn lambda_swapped_order_oracle() {
        let model = declining(0.5, 2048);
        let eq = positive(&model);
        let c = linearize(&model, &eq).unwrap();
        let direct = apply_lambda(&c, &eq.u_star).unwrap();
        // int w(eta) v(eta) [int_0^eta bq u* + alpha int_eta^m bq u*] d eta
        let h = c.h();
        let rule = Quadrature::EndCorrected;
        let cum = rule.cumulative_slice(c.beta_q_u_star.values(), h, true);
        let total = *cum.last().unwrap();
        let v = eq.u_star.values();
        let inner: Vec<f64> = (0..v.len())
            .map(|i| c.w.values()[i] * v[i] * (cum[i] + 0.5 * (total - cum[i])))
            .collect();
        let first: Vec<f64> = (0..v.len()).map(|i| c.beta_star.values()[i] * v[i]).collect();
        let swapped = rule.integrate_slice(&first, h) + rule.integrate_slice(&inner, h);
        assert!((direct - swapped).abs() < 1e-9, "{direct} vs {swapped}");
    }

    #[test]
    fn lambda_trivial_cases_and_linearity() {
        let model = declining(0.5, 256);
        let eq = positive(&model);
        let c = linearize(&model, &eq).unwrap();
        let zero = GridFunction::zeros(c.grid);
        assert_eq!(apply_lambda(&c, &zero).unwrap(), 0.0);
        let v1 = GridFunction::from_fn(c.grid, |s| (3.0 * s).sin()).unwrap();
        let v2 = GridFunction::from_fn(c.grid, |s| 1.0 + s * s).unwrap();
        let combo = v1.zip_with(&v2, |a, b| 2.0 * a - 0.5 * b).unwrap();
        let lhs = apply_lambda(&c, &combo).unwrap();
        let rhs = 2.0 * apply_lambda(&c, &v1).unwrap() - 0.5 * apply_lambda(&c, &v2).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
        let other = GridFunction::zeros(Grid::new(1.0, 64).unwrap());
        assert!(apply_lambda(&c, &other).is_err());

        let barren = ModelSpec::from_sources(1.0, 0.5, 64, "1", "0", "1", "1").unwrap();
        let eq = equilibrium_at(&barren, 0.4).unwrap();
        let c = linearize(&barren, &eq).unwrap();
        let v = GridFunction::from_fn(c.grid, |s| 1.0 + s).unwrap();
        assert_eq!(apply_lambda(&c, &v).unwrap(), 0.0);
    }

    #[test]
    fn stationarity_consistency() {
        let model = declining(0.5, 2048);
        let eq = positive(&model);
        let c = linearize(&model, &eq).unwrap();
        let birth: Vec<f64> =
            (0..c.grid.len()).map(|i| c.beta_star.values()[i] * c.u_star.values()[i]).collect();
        let inflow = Quadrature::EndCorrected.integrate_slice(&birth, c.h());
        assert!((inflow - eq.b).abs() < 1e-8);
    }

    #[test]
    fn partials_match_finite_differences() {
        let model = ModelSpec::from_sources(
            2.0,
            0.4,
            512,
            "1 + s/4",
            "(1+s)*exp(-Q)",
            "(1 - s/4)/(1 + Q/2)",
            "0.5 + Q*Q/4 + s/10",
        )
        .unwrap();
        let eq = equilibrium_at(&model, 0.9).unwrap();
        let c = linearize(&model, &eq).unwrap();
        let (g, mu) = (parse("(1 - s/4)/(1 + Q/2)").unwrap(), parse("0.5 + Q*Q/4 + s/10").unwrap());
        let w = |s: f64| 1.0 + s / 4.0;
        let d = 1e-4;
        let fd_s = |e: &Expr, s: f64, q: f64| (e.eval(s + d, q).unwrap() - e.eval(s - d, q).unwrap()) / (2.0 * d);
        let fd_q = |e: &Expr, s: f64, q: f64| (e.eval(s, q + d).unwrap() - e.eval(s, q - d).unwrap()) / (2.0 * d);
        let a1 = 0.4 - 1.0;
        for i in (1..c.grid.len() - 1).step_by(37) {
            let s = c.grid.node(i);
            let q = c.q_star.values()[i];
            let u = c.u_star.values()[i];
            let gq = fd_q(&g, s, q);
            let gs = fd_s(&g, s, q);
            let gqq = (g.eval(s, q + d).unwrap() - 2.0 * g.eval(s, q).unwrap() + g.eval(s, q - d).unwrap()) / (d * d);
            let gsq = (fd_s(&g, s, q + d) - fd_s(&g, s, q - d)) / (2.0 * d);
            let m = mu.eval(s, q).unwrap();
            let up = -u * (m + gs + a1 * w(s) * gq * u) / g.eval(s, q).unwrap();
            let rho = m + gs + 2.0 * a1 * w(s) * gq * u;
            let sigma = fd_q(&mu, s, q) * u + gsq * u + gq * up + a1 * w(s) * gqq * u * u;
            let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
            assert!(rel(c.rho_star.values()[i], rho) < 1e-6);
            assert!(rel(c.sigma_star.values()[i], sigma) < 1e-6);
            // analytic u*' against differencing the samples
            let h = c.h();
            let num = (c.u_star.values()[i + 1] - c.u_star.values()[i - 1]) / (2.0 * h);
            assert!(rel(c.u_star_prime.values()[i], num) < 1e-4);
        }
        assert!(c.sigma_star_l1 > 0.0);
    }

    #[test]
    fn survival_matches_equilibrium_shape() {
        let model = declining(0.5, 512);
        let eq = positive(&model);
        let c = linearize(&model, &eq).unwrap();
        for (p, u) in c.survival.values().iter().zip(eq.u_star.values()) {
            assert!((p * eq.b - u).abs() < 1e-12);
        }
    }
}

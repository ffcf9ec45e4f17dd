//! Pointwise sufficient conditions for stability, checked node by node.
//!
//! * positivity: `sigma* <= 0` and `B(s) >= 0`, where
//!   `B = beta* + w (int_0^s beta_Q u* + alpha int_s^m beta_Q u*)`;
//! * dissipativity:
//!   `mu* > w ((1 - alpha) gamma_Q u* + |sigma*|_1) + gamma*(0) |B|`,
//!   whose minimum slack is a decay rate for the linearized semigroup;
//! * its reductions to the trivial equilibrium and to `alpha = 1`.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::equilibrium::net_reproduction;
use crate::error::{Error, Result};
use crate::expr::GridExpr;
use crate::grid::GridFunction;
use crate::linearization::LinearizedCoefficients;
use crate::model::ModelSpec;

fn values<S: Serializer>(f: &GridFunction, ser: S) -> std::result::Result<S::Ok, S::Error> {
    f.values().serialize(ser)
}

/// Slack of one condition at every node.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub holds: bool,
    /// Smallest slack; negative when violated.
    pub margin: f64,
    /// Node where the smallest slack occurs.
    pub worst_node: f64,
    /// `holds` needs `margin > 0` when strict, `margin >= 0` otherwise.
    pub strict: bool,
    #[serde(serialize_with = "values")]
    pub per_node_slack: GridFunction,
    /// Condition-specific numbers, e.g. `kappa_max` or `net_reproduction_at_zero`.
    pub details: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn from_slack(name: &str, slack: GridFunction, strict: bool) -> Self {
        let (worst, margin) = slack
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(wi, wm), (i, &v)| if v < wm { (i, v) } else { (wi, wm) });
        let holds = if strict { margin > 0.0 } else { margin >= 0.0 };
        ConditionReport {
            name: name.to_string(),
            holds,
            margin,
            worst_node: slack.grid().node(worst),
            strict,
            per_node_slack: slack,
            details: BTreeMap::new(),
        }
    }
}

/// `(sigma* <= 0, B >= 0)`. Both are non-strict.
pub fn check_positivity(c: &LinearizedCoefficients) -> Result<(ConditionReport, ConditionReport)> {
    let sigma = c.sigma_star.map(|v| -v)?;
    let kernel = GridFunction::new(c.grid, c.positivity_kernel())?;
    Ok((
        ConditionReport::from_slack("positivity_sigma", sigma, false),
        ConditionReport::from_slack("positivity_kernel", kernel, false),
    ))
}

/// Strict dissipativity; `details["kappa_max"]` is the minimum slack.
pub fn check_dissipativity(c: &LinearizedCoefficients) -> Result<ConditionReport> {
    let kernel = c.positivity_kernel();
    let g0 = c.gamma_star.values()[0];
    let slack: Vec<f64> = (0..c.grid.len())
        .map(|i| {
            let w = c.w.values()[i];
            let local = (1.0 - c.alpha) * c.gamma_q_star.values()[i] * c.u_star.values()[i];
            c.mu_star.values()[i] - w * (local + c.sigma_star_l1) - g0 * kernel[i].abs()
        })
        .collect();
    let mut report =
        ConditionReport::from_slack("dissipativity", GridFunction::new(c.grid, slack)?, true);
    report.details.insert("kappa_max".into(), report.margin);
    report.details.insert("sigma_star_l1".into(), c.sigma_star_l1);
    Ok(report)
}

/// `mu(s, 0) > gamma(0, 0) beta(s, 0)`, with `R(0)` in the details.
pub fn check_trivial(model: &ModelSpec) -> Result<ConditionReport> {
    let grid = model.grid();
    let nodes = grid.nodes();
    let zeros = vec![0.0; nodes.len()];
    let r = model.rates();
    let at_zero = |e| GridExpr::new(e, &nodes).eval(&zeros).map_err(Error::from);
    let mu = at_zero(&r.mu)?;
    let beta = at_zero(&r.beta)?;
    let g00 = r.gamma.eval(0.0, 0.0)?;
    let slack: Vec<f64> = mu.iter().zip(&beta).map(|(m, b)| m - g00 * b).collect();
    let mut report = ConditionReport::from_slack("trivial", GridFunction::new(grid, slack)?, true);
    report.details.insert("kappa_max".into(), report.margin);
    let r0 = net_reproduction(model, &GridFunction::zeros(grid))?;
    report.details.insert("net_reproduction_at_zero".into(), r0);
    Ok(report)
}

/// The `alpha = 1` form with `beta~(s, P) = gamma(0, P) beta(s, P)`:
/// `mu > w |sigma*|_1 + |beta~ + w int beta~_P u*|`.
pub fn check_scramble(c: &LinearizedCoefficients) -> Result<ConditionReport> {
    if c.alpha != 1.0 {
        return Err(Error::WrongRegime(format!(
            "scramble form needs alpha = 1, got {}",
            c.alpha
        )));
    }
    // with alpha = 1 the environment is the constant P* and gamma(0, P*) = gamma*(0)
    let g0 = c.gamma_star.values()[0];
    let g0_q = c.gamma_q_star.values()[0];
    let n = c.grid.len();
    let beta = c.beta_star.values();
    let tilde: Vec<f64> = beta.iter().map(|b| g0 * b).collect();
    let tilde_p_u: Vec<f64> = (0..n)
        .map(|i| (g0_q * beta[i] + g0 * c.beta_q_star.values()[i]) * c.u_star.values()[i])
        .collect();
    let coupling = c.quadrature.integrate_slice(&tilde_p_u, c.h());
    let slack: Vec<f64> = (0..n)
        .map(|i| {
            let w = c.w.values()[i];
            c.mu_star.values()[i] - w * c.sigma_star_l1 - (tilde[i] + w * coupling).abs()
        })
        .collect();
    let mut report = ConditionReport::from_slack("scramble", GridFunction::new(c.grid, slack)?, true);
    report.details.insert("kappa_max".into(), report.margin);
    report.details.insert("total_population".into(), c.q_star.values()[0]);
    Ok(report)
}

/// A positive equilibrium that passes dissipativity while `beta_Q >= 0`
/// everywhere would have `R(Q*) < 1`; seeing one means something upstream
/// is inconsistent.
pub fn consistency_alarm(c: &LinearizedCoefficients, dissipativity: &ConditionReport) -> bool {
    c.b > 0.0 && dissipativity.holds && c.beta_q_star.values().iter().all(|&v| v >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{equilibrium_at, solve_equilibrium};
    use crate::grid::Quadrature;
    use crate::linearization::linearize;

    fn coefficients(model: &ModelSpec) -> LinearizedCoefficients {
        let eq = solve_equilibrium(model, [0.5, 2.0]).unwrap().pop().unwrap();
        assert!(!eq.is_trivial());
        linearize(model, &eq).unwrap()
    }

    fn declining() -> ModelSpec {
        ModelSpec::from_sources(1.0, 0.5, 1024, "1", "(480/997)*(1+s)*(3-2*Q)", "1 - s/2", "1").unwrap()
    }

    fn dissipative() -> ModelSpec {
        ModelSpec::from_sources(1.0, 0.5, 1024, "1", "(160/159)*(1+s)*(2-2*Q)", "1 - s/2", "1").unwrap()
    }

    #[test]
    fn positivity_examples() {
        let c = coefficients(&declining());
        let (p1, p2) = check_positivity(&c).unwrap();
        assert!(p1.holds && p2.holds);
        assert_eq!(p1.margin, 0.0);
        for (s, v) in c.grid.nodes().iter().zip(p2.per_node_slack.values()) {
            let poly = -s * s * s / 24.0 + s * s / 4.0 + 0.75 * s + 5.0 / 24.0;
            assert!((v - 960.0 / 997.0 * poly).abs() < 1e-9);
        }
        let (_, p2) = check_positivity(&coefficients(&dissipative())).unwrap();
        assert!(!p2.holds);
        assert!(p2.margin < 0.0);

        let model = ModelSpec::from_sources(1.0, 0.5, 128, "1", "1", "1", "1 - Q/4").unwrap();
        let c = linearize(&model, &equilibrium_at(&model, 0.5).unwrap()).unwrap();
        let (p1, p2) = check_positivity(&c).unwrap();
        assert!(p1.holds && p2.holds && p1.margin > 0.0);
    }

    #[test]
    fn dissipativity_examples() {
        let d6 = check_dissipativity(&coefficients(&dissipative())).unwrap();
        assert!(d6.holds);
        let kappa = 1.0 - 160.0 / 159.0 * 7.0 / 12.0;
        assert!((d6.details["kappa_max"] - kappa).abs() < 1e-9);
        assert_eq!(d6.worst_node, 0.0);

        let d5 = check_dissipativity(&coefficients(&declining())).unwrap();
        assert!(!d5.holds);
        assert_eq!(d5.worst_node, 1.0);
        let bracket = 480.0 / 997.0 * (5.0 / 12.0 + 1.5 + 0.5 - 1.0 / 12.0);
        assert!((d5.margin - (1.0 - bracket)).abs() < 1e-9);

        let model = ModelSpec::from_sources(1.0, 0.5, 64, "1", "0", "1 - s/2", "1").unwrap();
        let c = linearize(&model, &equilibrium_at(&model, 0.3).unwrap()).unwrap();
        let d = check_dissipativity(&c).unwrap();
        assert!(d.holds);
        assert_eq!(d.details["kappa_max"], 1.0);
    }

    #[test]
    fn bracket_forms_agree() {
        let c = coefficients(&dissipative());
        let h = c.h();
        let cum = Quadrature::EndCorrected.cumulative_slice(c.beta_q_u_star.values(), h, true);
        let total = *cum.last().unwrap();
        let kernel = c.positivity_kernel();
        for i in 0..c.grid.len() {
            let proof_form = c.beta_star.values()[i] + c.w.values()[i] * (0.5 * total + 0.5 * cum[i]);
            assert!((kernel[i] - proof_form).abs() < 1e-14);
        }
    }

    #[test]
    fn trivial_examples() {
        let model = ModelSpec::from_sources(1.0, 0.5, 2048, "1", "1/2", "1", "1").unwrap();
        let t = check_trivial(&model).unwrap();
        assert!(t.holds);
        assert_eq!(t.details["kappa_max"], 0.5);
        let r0 = 0.5 * (1.0 - (-1.0f64).exp());
        assert!((t.details["net_reproduction_at_zero"] - r0).abs() < 1e-12);

        let t5 = check_trivial(&declining()).unwrap();
        assert!(!t5.holds);
        assert!((t5.margin - (1.0 - 2880.0 / 997.0)).abs() < 1e-12);

        let barren = ModelSpec::from_sources(1.0, 0.5, 64, "1", "0", "1", "0.2 + s").unwrap();
        assert!(check_trivial(&barren).unwrap().holds);
    }

    #[test]
    fn scramble_matches_dissipativity_when_growth_ignores_environment() {
        let model = ModelSpec::from_sources(1.0, 1.0, 256, "1", "2*exp(-Q)", "1 - s/2", "1 + s/4").unwrap();
        let c = linearize(&model, &equilibrium_at(&model, 0.6).unwrap()).unwrap();
        let a = check_scramble(&c).unwrap();
        let b = check_dissipativity(&c).unwrap();
        for (x, y) in a.per_node_slack.values().iter().zip(b.per_node_slack.values()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(a.holds, b.holds);

        let q_free = ModelSpec::from_sources(1.0, 1.0, 64, "1", "0.3", "1", "1").unwrap();
        let c = linearize(&q_free, &equilibrium_at(&q_free, 0.6).unwrap()).unwrap();
        let r = check_scramble(&c).unwrap();
        assert!(r.per_node_slack.values().iter().all(|v| (v - 0.7).abs() < 1e-14));

        let c = coefficients(&declining());
        assert!(matches!(check_scramble(&c), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn scramble_declining_rates() {
        let model = declining().with_grid_n(512).unwrap();
        let model = ModelSpec::new(1.0, 1.0, 512, model.rates().clone()).unwrap();
        let eqs = solve_equilibrium(&model, [0.1, 5.0]).unwrap();
        let c = linearize(&model, eqs.last().unwrap()).unwrap();
        let r = check_scramble(&c).unwrap();
        // |beta~ + int beta~_P u*| at s = 1 exceeds mu = 1
        assert!(!r.holds);
        assert_eq!(r.worst_node, 1.0);
    }

    #[test]
    fn alarm() {
        let model = ModelSpec::from_sources(1.0, 0.5, 64, "1", "0.2*(1+Q)", "1", "1").unwrap();
        let c = linearize(&model, &equilibrium_at(&model, 0.5).unwrap()).unwrap();
        let d = check_dissipativity(&c).unwrap();
        assert!(d.holds);
        assert!(consistency_alarm(&c, &d));
        let c6 = coefficients(&dissipative());
        assert!(!consistency_alarm(&c6, &check_dissipativity(&c6).unwrap()));
    }
}

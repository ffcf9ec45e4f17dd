//! The six commands.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use hierstab_core::conditions::{
    check_dissipativity, check_positivity, check_scramble, check_trivial, consistency_alarm, ConditionReport,
};
use hierstab_core::equilibrium::{equilibrium_at, solve_equilibrium, Equilibrium};
use hierstab_core::linearization::{linearize, LinearizedCoefficients};
use hierstab_core::simulator::{measure_rate_with, rate_before_blow_up, RateMeasurement, RateOptions};
use hierstab_core::spectral::special::{default_search_window, SIGMA_ZERO_TOL};
use hierstab_core::spectral::{
    classify_special, dominant_root, find_roots, k_prime, k_value, Rect, SpectrumReport, StabilityVerdict, Verdict,
};
use hierstab_core::{Error, GridFunction, ModelSpec, Quadrature};

use crate::output::{write_csv, write_json, Report};
use crate::{Args, EXIT_ALARM, EXIT_FAILURE, EXIT_MODEL, EXIT_NONCONVERGENCE};

/// Simulated rates smaller than this in magnitude carry no sign.
pub const RATE_SIGN_TOL: f64 = 0.01;
/// Eigenvalue real parts smaller than this in magnitude carry no sign.
pub const EIGEN_SIGN_TOL: f64 = 1e-6;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Io(e) => f.write_str(e),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Model(_) | Error::Parse(_) | Error::Eval(_)) => EXIT_MODEL,
            CliError::Core(Error::NonConvergence { .. }) => EXIT_NONCONVERGENCE,
            CliError::Core(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load(args: &Args) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| {
        CliError::Core(Error::model(format!("cannot read {}: {e}", args.model.display())))
    })?;
    let mut model = ModelSpec::from_toml(&text)?;
    if let Some(n) = args.grid_n {
        model = model.with_grid_n(n)?;
    }
    if let Some(s) = args.search {
        model.spectral.search = Some(s);
    }
    if let Some(r) = args.rect {
        model.spectral.rect = r;
    }
    if let Some(t) = args.t_end {
        model.simulation.t_end = t;
    }
    if let Some(e) = args.eps {
        model.simulation.eps = e;
    }
    Ok(model)
}

/// Equilibria of the model and the one the analysis commands study.
struct Equilibria {
    all: Vec<Equilibrium>,
    chosen: usize,
    selection: &'static str,
}

impl Equilibria {
    fn chosen(&self) -> &Equilibrium {
        &self.all[self.chosen]
    }
}

/// A forced birth level wins; otherwise the positive equilibrium with the
/// smallest birth level, falling back to the trivial one. Afterwards the
/// rates are re-validated up to `q_validation_max`, or twice the largest
/// environment value seen.
fn equilibria(model: &ModelSpec) -> Result<Equilibria> {
    let (all, chosen, selection) = match model.solver.forced_b {
        Some(b) => (vec![equilibrium_at(model, b)?], 0, "forced_birth_level"),
        None => {
            let all = solve_equilibrium(model, model.solver.b_range)?;
            match all.iter().position(|e| !e.is_trivial()) {
                Some(i) => (all, i, "smallest_positive"),
                None => (all, 0, "trivial"),
            }
        }
    };
    let q_max = model.q_validation_max.unwrap_or_else(|| {
        2.0 * all.iter().map(|e| e.summary().max_q_star).fold(0.0, f64::max)
    });
    model.validate(q_max)?;
    Ok(Equilibria {
        all,
        chosen,
        selection,
    })
}

fn sigma_is_zero(c: &LinearizedCoefficients) -> bool {
    c.sigma_star_max() <= SIGMA_ZERO_TOL
}

pub fn run(name: &'static str, args: &Args, out: &mut dyn Write) -> Result<u8> {
    let started = Instant::now();
    let model = load(args)?;
    let mut report = Report::new(name, &model);
    let code = match name {
        "equilibrium" => equilibrium_cmd(&model, args, &mut report)?,
        "classify" => classify_cmd(&model, &mut report)?,
        "spectrum" => spectrum_cmd(&model, args, &mut report)?,
        "conditions" => conditions_cmd(&model, args, &mut report)?,
        "simulate" => simulate_cmd(&model, args, &mut report)?,
        "validate" => validate_cmd(&model, &mut report)?,
        other => unreachable!("unknown command {other}"),
    };
    let mut value = report.finish(&args.model, started.elapsed());
    if let Some(dir) = &args.out {
        let path = write_json(dir, &value)?;
        if let Some(list) = value["metadata"]["artifacts"].as_array_mut() {
            list.push(json!(path.display().to_string()));
        }
    }
    let text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(code)
}

fn equilibrium_cmd(model: &ModelSpec, args: &Args, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let nodes = model.grid().nodes();
    let list: Vec<Value> = eqs
        .all
        .iter()
        .map(|e| {
            json!({
                "summary": e.summary(),
                "s": nodes,
                "u_star": e.u_star.values(),
                "q_star": e.q_star.values(),
            })
        })
        .collect();
    report.set("selection", eqs.selection);
    report.set("equilibria", list);
    if let Some(dir) = &args.out {
        for (k, e) in eqs.all.iter().enumerate() {
            let rows = (0..nodes.len()).map(|i| vec![nodes[i], e.u_star.values()[i], e.q_star.values()[i]]);
            let path = write_csv(dir, &format!("equilibrium_{k}.csv"), &["s", "u_star", "q_star"], rows)?;
            report.artifacts.push(path);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct Classification {
    regime: &'static str,
    sigma_star_max: f64,
    verdict: StabilityVerdict,
    k_at_zero: Option<f64>,
    k_prime_at_zero: Option<f64>,
    dominant_root: Option<f64>,
    search_window: [f64; 2],
}

fn classify(model: &ModelSpec, c: &LinearizedCoefficients) -> Result<Classification> {
    let window = model.spectral.search.unwrap_or_else(|| default_search_window(c));
    if !sigma_is_zero(c) {
        return Ok(Classification {
            regime: "sigma_star_nonzero",
            sigma_star_max: c.sigma_star_max(),
            verdict: StabilityVerdict {
                verdict: Verdict::Inconclusive,
                criterion: "sigma_star_nonzero".into(),
                evidence: Default::default(),
            },
            k_at_zero: None,
            k_prime_at_zero: None,
            dominant_root: None,
            search_window: window,
        });
    }
    Ok(Classification {
        regime: "sigma_star_zero",
        sigma_star_max: c.sigma_star_max(),
        verdict: classify_special(c)?,
        k_at_zero: Some(k_value(c, 0.0)?),
        k_prime_at_zero: Some(k_prime(c, 0.0)?),
        dominant_root: dominant_root(c, window)?,
        search_window: window,
    })
}

fn classify_cmd(model: &ModelSpec, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let c = linearize(model, eqs.chosen())?;
    report.set("selection", eqs.selection);
    report.set("equilibrium", eqs.chosen().summary());
    report.set("classification", classify(model, &c)?);
    Ok(0)
}

fn rect_of(model: &ModelSpec) -> Result<Rect> {
    Ok(Rect::from_array(model.spectral.rect)?)
}

fn spectrum_cmd(model: &ModelSpec, args: &Args, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let c = linearize(model, eqs.chosen())?;
    let spectrum = find_roots(&c, &rect_of(model)?, model.spectral.max_roots)?;
    report.set("selection", eqs.selection);
    report.set("equilibrium", eqs.chosen().summary());
    report.set("alpha_one_extension", c.alpha == 1.0);
    report.set("predicted_growth_rate", spectrum.spectral_bound_estimate);
    if let Some(dir) = &args.out {
        let rows = spectrum.roots.iter().map(|r| vec![r.re, r.im, r.residual, r.multiplicity as f64]);
        report.artifacts.push(write_csv(dir, "roots.csv", &["re", "im", "residual", "multiplicity"], rows)?);
    }
    report.set("spectrum", spectrum);
    Ok(0)
}

#[derive(Serialize)]
struct Conditions {
    positivity_sigma: ConditionReport,
    positivity_kernel: ConditionReport,
    dissipativity: ConditionReport,
    trivial: ConditionReport,
    scramble: Option<ConditionReport>,
    consistency_alarm: bool,
}

fn conditions(model: &ModelSpec, c: &LinearizedCoefficients) -> Result<Conditions> {
    let (positivity_sigma, positivity_kernel) = check_positivity(c)?;
    let dissipativity = check_dissipativity(c)?;
    let alarm = consistency_alarm(c, &dissipativity);
    Ok(Conditions {
        positivity_sigma,
        positivity_kernel,
        trivial: check_trivial(model)?,
        scramble: if c.alpha == 1.0 { Some(check_scramble(c)?) } else { None },
        consistency_alarm: alarm,
        dissipativity,
    })
}

fn conditions_cmd(model: &ModelSpec, args: &Args, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let c = linearize(model, eqs.chosen())?;
    let cond = conditions(model, &c)?;
    if let Some(dir) = &args.out {
        let mut cols: Vec<&ConditionReport> =
            vec![&cond.positivity_sigma, &cond.positivity_kernel, &cond.dissipativity, &cond.trivial];
        cols.extend(cond.scramble.as_ref());
        let mut header = vec!["s"];
        header.extend(cols.iter().map(|r| r.name.as_str()));
        let nodes = model.grid().nodes();
        let rows = (0..nodes.len()).map(|i| {
            let mut row = vec![nodes[i]];
            row.extend(cols.iter().map(|r| r.per_node_slack.values()[i]));
            row
        });
        report.artifacts.push(write_csv(dir, "slack.csv", &header, rows)?);
    }
    let alarm = cond.consistency_alarm;
    report.set("selection", eqs.selection);
    report.set("equilibrium", eqs.chosen().summary());
    report.set("conditions", cond);
    Ok(if alarm { EXIT_ALARM } else { 0 })
}

fn perturbation(model: &ModelSpec) -> Result<GridFunction> {
    let m = model.m();
    Ok(GridFunction::from_fn(model.grid(), |s| (std::f64::consts::PI * s / m).sin())?)
}

/// Absolute perturbation size: the relative setting times `|u*|_1`, or the
/// setting itself at the trivial equilibrium.
fn absolute_eps(model: &ModelSpec, eq: &Equilibrium) -> f64 {
    let norm = Quadrature::Trapezoid.integral(&eq.u_star.map(f64::abs).unwrap_or_else(|_| eq.u_star.clone()));
    if norm > 0.0 {
        model.simulation.eps * norm
    } else {
        model.simulation.eps
    }
}

fn simulate(model: &ModelSpec, eq: &Equilibrium, snapshots: usize) -> Result<(RateMeasurement, f64)> {
    let eps = absolute_eps(model, eq);
    let opts = RateOptions {
        snapshots,
        ..RateOptions::default()
    };
    let r = measure_rate_with(model, eq, &perturbation(model)?, eps, model.simulation.t_end, opts)?;
    Ok((r, eps))
}

fn rate_json(r: &RateMeasurement, eps: f64, t_end: f64) -> Value {
    json!({
        "rate": r.rate,
        "fit_window": r.fit_window,
        "points_used": r.points_used,
        "steps": r.steps,
        "dt_max": r.dt_max,
        "eps_absolute": eps,
        "t_end": t_end,
        "perturbation": "sin(pi s / m)",
    })
}

/// Partial samples more than this many times the initial perturbation are
/// no longer treated as linear.
const LINEAR_REGIME_GROWTH: f64 = 100.0;

fn early_rate(model: &ModelSpec, eq: &Equilibrium, samples: &[(f64, f64)]) -> Option<(f64, [f64; 2], usize)> {
    let start = samples.first().map_or(absolute_eps(model, eq), |s| s.1);
    rate_before_blow_up(samples, LINEAR_REGIME_GROWTH * start)
}

fn blow_up_json(model: &ModelSpec, eq: &Equilibrium, t: f64, samples: &[(f64, f64)]) -> Value {
    let early = early_rate(model, eq, samples);
    json!({
        "blow_up_time": t,
        "partial_samples": samples.len(),
        "early_rate": early.map(|e| e.0),
        "early_fit_window": early.map(|e| e.1),
        "t_end": model.simulation.t_end,
    })
}

fn simulate_cmd(model: &ModelSpec, args: &Args, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let snapshots = if args.out.is_some() { 20 } else { 0 };
    report.set("selection", eqs.selection);
    report.set("equilibrium", eqs.chosen().summary());
    let (r, eps) = match simulate(model, eqs.chosen(), snapshots) {
        Err(CliError::Core(Error::BlowUp { t, samples })) => {
            if let Some(dir) = &args.out {
                let rows = samples.iter().map(|(t, v)| vec![*t, *v]);
                report.artifacts.push(write_csv(dir, "rate.csv", &["t", "norm_L1_diff"], rows)?);
            }
            report.set("simulation", blow_up_json(model, eqs.chosen(), t, &samples));
            eprintln!("hierstab simulate: simulation blew up at t = {t}");
            return Ok(EXIT_FAILURE);
        }
        other => other?,
    };
    if let Some(dir) = &args.out {
        let nodes = model.grid().nodes();
        let rows = r
            .snapshots
            .iter()
            .flat_map(|(t, u)| nodes.iter().zip(u).map(move |(s, v)| vec![*t, *s, *v]));
        report.artifacts.push(write_csv(dir, "trajectory.csv", &["t", "s", "u"], rows)?);
        let rows = r.samples.iter().map(|(t, v)| vec![*t, *v]);
        report.artifacts.push(write_csv(dir, "rate.csv", &["t", "norm_L1_diff"], rows)?);
    }
    report.set("simulation", rate_json(&r, eps, model.simulation.t_end));
    Ok(0)
}

#[derive(Serialize)]
struct Route {
    route: &'static str,
    /// Growth-rate estimate or bound, when the route produces one.
    growth_rate: Option<f64>,
    /// `-1` stable, `+1` unstable, absent when the route makes no claim.
    sign: Option<i8>,
    note: String,
}

fn sign_of(x: f64, tol: f64) -> Option<i8> {
    if x > tol {
        Some(1)
    } else if x < -tol {
        Some(-1)
    } else {
        None
    }
}

fn route_error(route: &'static str, e: CliError) -> Route {
    Route {
        route,
        growth_rate: None,
        sign: None,
        note: format!("failed: {e}"),
    }
}

fn validate_cmd(model: &ModelSpec, report: &mut Report) -> Result<u8> {
    let eqs = equilibria(model)?;
    let eq = eqs.chosen();
    let c = linearize(model, eq)?;
    let mut routes = Vec::new();

    routes.push(match classify(model, &c) {
        Ok(cl) if cl.regime == "sigma_star_zero" => {
            let sign = match cl.verdict.verdict {
                Verdict::Stable => Some(-1),
                Verdict::Unstable => Some(1),
                Verdict::Inconclusive => None,
            };
            Route {
                route: "sign_of_beta_q",
                growth_rate: None,
                sign,
                note: cl.verdict.criterion.clone(),
            }
        }
        Ok(_) => Route {
            route: "sign_of_beta_q",
            growth_rate: None,
            sign: None,
            note: "not applicable: sigma* is not zero".into(),
        },
        Err(e) => route_error("sign_of_beta_q", e),
    });

    if sigma_is_zero(&c) {
        let window = model.spectral.search.unwrap_or_else(|| default_search_window(&c));
        routes.push(match dominant_root(&c, window) {
            Ok(Some(root)) => Route {
                route: "characteristic_function",
                growth_rate: Some(root),
                sign: sign_of(root, EIGEN_SIGN_TOL),
                note: "largest real root of K(lambda) = 1".into(),
            },
            Ok(None) => Route {
                route: "characteristic_function",
                growth_rate: None,
                sign: None,
                note: format!("no real root in [{}, {}]", window[0], window[1]),
            },
            Err(e) => route_error("characteristic_function", e.into()),
        });
    }

    let spectrum: std::result::Result<SpectrumReport, CliError> =
        rect_of(model).and_then(|rect| Ok(find_roots(&c, &rect, model.spectral.max_roots)?));
    routes.push(match spectrum {
        Ok(s) => Route {
            route: "determinant",
            growth_rate: s.spectral_bound_estimate,
            sign: s.spectral_bound_estimate.and_then(|b| sign_of(b, EIGEN_SIGN_TOL)),
            note: format!(
                "{} roots in the rectangle{}",
                s.roots.len(),
                if s.incomplete { ", search incomplete" } else { "" }
            ),
        },
        Err(e) => route_error("determinant", e),
    });

    let cond = conditions(model, &c)?;
    let d = &cond.dissipativity;
    routes.push(Route {
        route: "dissipativity",
        growth_rate: d.holds.then(|| -d.margin),
        sign: d.holds.then_some(-1),
        note: if d.holds {
            "holds; growth rate at most -kappa_max".into()
        } else {
            "does not hold; no claim".into()
        },
    });

    routes.push(match simulate(model, eq, 0) {
        Ok((r, _)) => Route {
            route: "simulation",
            growth_rate: Some(r.rate),
            sign: sign_of(r.rate, RATE_SIGN_TOL),
            note: format!("fit over [{:.3}, {:.3}]", r.fit_window[0], r.fit_window[1]),
        },
        Err(CliError::Core(Error::BlowUp { t, samples })) => {
            let early = early_rate(model, eq, &samples);
            Route {
                route: "simulation",
                growth_rate: early.map(|e| e.0),
                sign: Some(1),
                note: format!("blew up at t = {t:.3}; rate fitted before the blow-up"),
            }
        }
        Err(e) => route_error("simulation", e),
    });

    let signs: Vec<i8> = routes.iter().filter_map(|r| r.sign).collect();
    let agree = signs.windows(2).all(|p| p[0] == p[1]);
    let alarm = cond.consistency_alarm;
    report.set("selection", eqs.selection);
    report.set("equilibrium", eq.summary());
    report.set("routes", &routes);
    report.set("routes_agree", agree);
    report.set("consistency_alarm", alarm);
    report.set(
        "tolerances",
        json!({ "rate_sign": RATE_SIGN_TOL, "eigenvalue_sign": EIGEN_SIGN_TOL }),
    );
    Ok(if agree && !alarm { 0 } else { EXIT_ALARM })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(Error::model("x")).exit_code(), EXIT_MODEL);
        assert_eq!(CliError::Core(Error::NonConvergence { b: 1.0, iterations: 3 }).exit_code(), EXIT_NONCONVERGENCE);
        assert_eq!(CliError::Core(Error::WrongRegime("x".into())).exit_code(), EXIT_FAILURE);
        assert_eq!(CliError::Io("disk".into()).exit_code(), EXIT_FAILURE);
    }

    #[test]
    fn signs_respect_tolerance() {
        assert_eq!(sign_of(0.5, 0.01), Some(1));
        assert_eq!(sign_of(-0.5, 0.01), Some(-1));
        assert_eq!(sign_of(0.005, 0.01), None);
    }

    #[test]
    fn early_rate_uses_linear_part() {
        let model = ModelSpec::from_sources(1.0, 0.5, 64, "1", "1/2", "1", "1").unwrap();
        let eq = hierstab_core::equilibrium::trivial(&model).unwrap();
        let samples: Vec<(f64, f64)> = (0..200).map(|k| {
            let t = 0.05 * k as f64;
            (t, 1e-6 * (0.8 * t).exp())
        }).collect();
        let (rate, window, _) = early_rate(&model, &eq, &samples).unwrap();
        assert!((rate - 0.8).abs() < 1e-9);
        // 100x growth happens at ln(100)/0.8
        assert!((window[1] - (100f64.ln() / 0.8)).abs() < 0.1);
    }
}

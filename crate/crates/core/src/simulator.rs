//! Explicit upwind simulation of the nonlinear equation.
//!
//! Node values are advanced by
//!
//! ```text
//! u_k <- u_k - dt/h (gamma_k u_k - gamma_{k-1} u_{k-1}) - dt mu_k u_k,   k >= 1
//! u_0 <- int beta(s, Q) u ds
//! ```
//!
//! with rates frozen at the beginning of the step and
//! `dt = cfl / (max gamma / h + max mu)`, which keeps every coefficient of the
//! update non-negative. Integrals use the trapezoid rule.

use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::expr::GridExpr;
use crate::grid::{environment_slice, GridFunction, Quadrature};
use crate::model::ModelSpec;

const RULE: Quadrature = Quadrature::Trapezoid;

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: GridFunction,
    /// Environment of `u`, kept current after every step.
    pub q: GridFunction,
    pub dt_last: f64,
}

/// Rates of a model compiled for repeated stepping.
#[derive(Debug, Clone)]
pub struct Simulator {
    alpha: f64,
    h: f64,
    cfl: f64,
    grid: crate::grid::Grid,
    w: Vec<f64>,
    gamma: GridExpr,
    mu: GridExpr,
    beta: GridExpr,
}

struct Frozen {
    gamma: Vec<f64>,
    mu: Vec<f64>,
    beta: Vec<f64>,
}

impl Simulator {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let grid = model.grid();
        let nodes = grid.nodes();
        let r = model.rates();
        let w = GridExpr::new(&r.w, &nodes).eval(&vec![0.0; nodes.len()])?;
        let cfl = model.simulation.cfl;
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::model(format!("cfl = {cfl} must lie in (0, 1]")));
        }
        Ok(Simulator {
            alpha: model.alpha(),
            h: grid.h(),
            cfl,
            grid,
            w,
            gamma: GridExpr::new(&r.gamma, &nodes),
            mu: GridExpr::new(&r.mu, &nodes),
            beta: GridExpr::new(&r.beta, &nodes),
        })
    }

    fn environment(&self, u: &[f64]) -> Vec<f64> {
        let wu: Vec<f64> = u.iter().zip(&self.w).map(|(a, b)| a * b).collect();
        environment_slice(RULE, &wu, self.h, self.alpha)
    }

    pub fn state(&self, u: GridFunction) -> Result<SimState> {
        if *u.grid() != self.grid {
            return Err(Error::domain("initial density is not on the model grid"));
        }
        let q = GridFunction::new(self.grid, self.environment(u.values()))?;
        Ok(SimState {
            t: 0.0,
            u,
            q,
            dt_last: 0.0,
        })
    }

    fn freeze(&self, q: &[f64]) -> Result<Frozen> {
        let gamma = self.gamma.eval(q)?;
        if let Some(i) = gamma.iter().position(|&g| g <= 0.0) {
            return Err(Error::model(format!(
                "growth rate {} at s = {} is not positive",
                gamma[i],
                self.grid.node(i)
            )));
        }
        Ok(Frozen {
            gamma,
            mu: self.mu.eval(q)?,
            beta: self.beta.eval(q)?,
        })
    }

    fn dt_of(&self, f: &Frozen) -> f64 {
        let gmax = f.gamma.iter().cloned().fold(0.0, f64::max);
        let mmax = f.mu.iter().cloned().fold(0.0, f64::max);
        self.cfl / (gmax / self.h + mmax)
    }

    fn inflow(&self, f: &Frozen, u: &[f64]) -> f64 {
        let bu: Vec<f64> = f.beta.iter().zip(u).map(|(b, x)| b * x).collect();
        RULE.integrate_slice(&bu, self.h)
    }

    /// `int beta(s, Q) u ds` for the current state.
    pub fn boundary_inflow(&self, state: &SimState) -> Result<f64> {
        let f = self.freeze(state.q.values())?;
        Ok(self.inflow(&f, state.u.values()))
    }

    /// Largest stable step for the current state.
    pub fn stable_dt(&self, state: &SimState) -> Result<f64> {
        Ok(self.dt_of(&self.freeze(state.q.values())?))
    }

    fn advance(&self, state: &mut SimState, f: &Frozen, dt: f64) -> Result<()> {
        let u = state.u.values();
        let n = u.len();
        let r = dt / self.h;
        let mut next = vec![0.0; n];
        next[0] = self.inflow(f, u);
        for k in 1..n {
            next[k] = u[k] - r * (f.gamma[k] * u[k] - f.gamma[k - 1] * u[k - 1]) - dt * f.mu[k] * u[k];
        }
        let t = state.t + dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                t,
                samples: Vec::new(),
            });
        }
        let q = self.environment(&next);
        state.u = GridFunction::new(self.grid, next)?;
        state.q = GridFunction::new(self.grid, q)?;
        state.t = t;
        state.dt_last = dt;
        Ok(())
    }

    /// One step of at most `dt_max`.
    pub fn step(&self, state: &mut SimState, dt_max: f64) -> Result<()> {
        let f = self.freeze(state.q.values())?;
        let dt = self.dt_of(&f).min(dt_max);
        self.advance(state, &f, dt)
    }

    /// Steps until `t_end`, the last step shortened to land on it exactly.
    pub fn run_until(&self, state: &mut SimState, t_end: f64) -> Result<()> {
        while state.t < t_end {
            let remaining = t_end - state.t;
            self.step(state, remaining)?;
            if t_end - state.t <= 1e-12 * t_end.max(1.0) {
                state.t = t_end;
            }
        }
        Ok(())
    }
}

/// One stable step of the scheme.
pub fn step(model: &ModelSpec, state: &SimState) -> Result<SimState> {
    let sim = Simulator::new(model)?;
    let mut next = state.clone();
    sim.step(&mut next, f64::INFINITY)?;
    Ok(next)
}

/// `int_0^m beta(s, Q(s, t)) u(s, t) ds`.
pub fn boundary_inflow(model: &ModelSpec, state: &SimState) -> Result<f64> {
    Simulator::new(model)?.boundary_inflow(state)
}

/// Snapshots and sampling of a rate measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    /// Roughly this many samples of the difference norm are kept.
    pub norm_samples: usize,
    /// Number of density snapshots of the perturbed run, evenly spaced in time.
    pub snapshots: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            norm_samples: 2000,
            snapshots: 0,
        }
    }
}

/// Fitted exponential rate of a perturbation together with its data.
#[derive(Debug, Clone, Serialize)]
pub struct RateMeasurement {
    pub rate: f64,
    /// Time window of the least-squares fit.
    pub fit_window: [f64; 2],
    pub points_used: usize,
    /// `(t, |u - u_ref|_1)` samples.
    pub samples: Vec<(f64, f64)>,
    #[serde(skip)]
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub steps: usize,
    pub dt_max: f64,
}

/// Norms below this are rounding noise and never enter the fit.
pub const NORM_FLOOR: f64 = 1e-12;
const MIN_FIT_POINTS: usize = 8;

fn fit(samples: &[(f64, f64)], lo: f64, hi: f64) -> Option<(f64, usize)> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, v)| *t >= lo && *t <= hi && *v >= NORM_FLOOR)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    (sxx > 0.0).then(|| (sxy / sxx, pts.len()))
}

/// Growth rate of `|u - u_ref|_1` where `u` starts at `u* + eps v0` and
/// `u_ref` at `u*`; both runs share every time step, so the scheme's own
/// stationary error cancels. The slope of `log |u - u_ref|_1` is fitted on
/// `[T/2, T]`; if the norm has already sunk below [`NORM_FLOOR`] there, the
/// window `[t_c/2, t_c]` before the crossing time `t_c` is used instead.
pub fn measure_rate(
    model: &ModelSpec,
    eq: &Equilibrium,
    v0: &GridFunction,
    eps: f64,
    t_end: f64,
) -> Result<RateMeasurement> {
    measure_rate_with(model, eq, v0, eps, t_end, RateOptions::default())
}

pub fn measure_rate_with(
    model: &ModelSpec,
    eq: &Equilibrium,
    v0: &GridFunction,
    eps: f64,
    t_end: f64,
    opts: RateOptions,
) -> Result<RateMeasurement> {
    if !(eps.is_finite() && eps > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::domain(format!("need eps > 0 and T > 0, got {eps} and {t_end}")));
    }
    if v0.max_abs() == 0.0 {
        return Err(Error::domain("perturbation profile is identically zero"));
    }
    let sim = Simulator::new(model)?;
    let perturbed = eq.u_star.zip_with(v0, |u, v| u + eps * v)?;
    let mut a = sim.state(perturbed)?;
    let mut b = sim.state(eq.u_star.clone())?;
    let h = sim.h;
    let diff_norm = |a: &SimState, b: &SimState| {
        let d: Vec<f64> = a.u.values().iter().zip(b.u.values()).map(|(x, y)| (x - y).abs()).collect();
        RULE.integrate_slice(&d, h)
    };

    let sample_every = t_end / opts.norm_samples.max(1) as f64;
    let snap_every = if opts.snapshots > 0 { t_end / opts.snapshots as f64 } else { f64::INFINITY };
    let mut samples = vec![(0.0, diff_norm(&a, &b))];
    let mut snapshots = Vec::new();
    if opts.snapshots > 0 {
        snapshots.push((0.0, a.u.values().to_vec()));
    }
    let mut next_sample = sample_every;
    let mut next_snap = snap_every;
    let mut steps = 0;
    let mut dt_max: f64 = 0.0;
    while a.t < t_end {
        let fa = sim.freeze(a.q.values());
        let fb = sim.freeze(b.q.values());
        let (fa, fb) = match (fa, fb) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let mut dt = sim.dt_of(&fa).min(sim.dt_of(&fb)).min(t_end - a.t);
        if t_end - a.t - dt <= 1e-12 * t_end {
            dt = t_end - a.t;
        }
        let stepped = sim.advance(&mut a, &fa, dt).and_then(|_| sim.advance(&mut b, &fb, dt));
        if let Err(Error::BlowUp { t, .. }) = stepped {
            return Err(Error::BlowUp { t, samples });
        }
        stepped?;
        steps += 1;
        dt_max = dt_max.max(dt);
        let done = a.t >= t_end;
        if a.t >= next_sample || done {
            samples.push((a.t, diff_norm(&a, &b)));
            while next_sample <= a.t {
                next_sample += sample_every;
            }
        }
        if a.t >= next_snap || (done && opts.snapshots > 0) {
            snapshots.push((a.t, a.u.values().to_vec()));
            while next_snap <= a.t {
                next_snap += snap_every;
            }
        }
    }

    let (window, fitted) = match fit(&samples, 0.5 * t_end, t_end) {
        Some(f) => ([0.5 * t_end, t_end], Some(f)),
        None => {
            let crossing = samples.iter().find(|(_, v)| *v < NORM_FLOOR).map(|(t, _)| *t);
            match crossing {
                Some(tc) => ([0.5 * tc, tc], fit(&samples, 0.5 * tc, tc)),
                None => ([0.5 * t_end, t_end], None),
            }
        }
    };
    let (rate, points_used) = fitted.ok_or_else(|| {
        Error::domain(format!(
            "too few samples above {NORM_FLOOR:e} to fit a rate; lengthen T or raise eps"
        ))
    })?;
    Ok(RateMeasurement {
        rate,
        fit_window: window,
        points_used,
        samples,
        snapshots,
        steps,
        dt_max,
    })
}

/// Early growth rate from the partial samples of a run that blew up: the
/// fit covers `[t_c/2, t_c]`, where `t_c` is the first time the difference
/// norm exceeds `cap` (the end of the linear regime), or the last sample.
/// Returns the rate, the window and the number of points used.
pub fn rate_before_blow_up(samples: &[(f64, f64)], cap: f64) -> Option<(f64, [f64; 2], usize)> {
    let last = samples.iter().rev().find(|(_, v)| v.is_finite())?.0;
    let tc = samples
        .iter()
        .find(|(_, v)| !(*v <= cap))
        .map_or(last, |(t, _)| *t);
    let (rate, n) = fit(samples, 0.5 * tc, tc)?;
    Some((rate, [0.5 * tc, tc], n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, trivial};
    use crate::grid::Grid;

    fn transport(mu: &str, n: usize) -> ModelSpec {
        ModelSpec::from_sources(2.0, 0.5, n, "1", "0", "1", mu).unwrap()
    }

    fn bump(s: f64) -> f64 {
        let x = (s - 0.5) / 0.25;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(3)
        } else {
            0.0
        }
    }

    fn l1_error(model: &ModelSpec, decay: bool) -> f64 {
        let sim = Simulator::new(model).unwrap();
        let mut st = sim.state(GridFunction::from_fn(model.grid(), bump).unwrap()).unwrap();
        sim.run_until(&mut st, 0.2).unwrap();
        let exact = GridFunction::from_fn(model.grid(), |s| {
            bump(s - 0.2) * if decay { (-0.2f64).exp() } else { 1.0 }
        })
        .unwrap();
        let d = st.u.zip_with(&exact, |a, b| (a - b).abs()).unwrap();
        Quadrature::Trapezoid.integral(&d)
    }

    #[test]
    fn pure_transport_converges() {
        let coarse = l1_error(&transport("0", 256), false);
        let fine = l1_error(&transport("0", 512), false);
        let order = (coarse / fine).log2();
        assert!(order >= 0.8, "order {order}");
        assert!(fine < 2e-2);
    }

    #[test]
    fn transport_with_decay() {
        let e = l1_error(&transport("1", 1024), true);
        assert!(e < 1e-2, "{e}");
        let model = transport("1", 256);
        let sim = Simulator::new(&model).unwrap();
        let mut st = sim.state(GridFunction::from_fn(model.grid(), bump).unwrap()).unwrap();
        let mut mass = Quadrature::Trapezoid.integral(&st.u);
        let m0 = mass;
        while st.t < 0.5 {
            sim.step(&mut st, f64::INFINITY).unwrap();
            let now = Quadrature::Trapezoid.integral(&st.u);
            assert!(now <= mass + 1e-15);
            assert!(st.u.values().iter().all(|&v| v >= 0.0));
            mass = now;
        }
        assert!((mass - m0 * (-st.t).exp()).abs() < 2e-3 * m0);
    }

    #[test]
    fn inflow_examples() {
        let model = ModelSpec::from_sources(1.0, 0.5, 64, "1", "1", "1", "1").unwrap();
        let sim = Simulator::new(&model).unwrap();
        let ones = sim.state(GridFunction::constant(model.grid(), 1.0).unwrap()).unwrap();
        assert!((sim.boundary_inflow(&ones).unwrap() - 1.0).abs() < 1e-15);
        let zero = sim.state(GridFunction::zeros(model.grid())).unwrap();
        assert_eq!(boundary_inflow(&model, &zero).unwrap(), 0.0);
        assert!(sim.state(GridFunction::zeros(Grid::new(1.0, 32).unwrap())).is_err());
    }

    fn declining(n: usize) -> (ModelSpec, Equilibrium) {
        let model = ModelSpec::from_sources(
            1.0, 0.5, n, "1",
            "piecewise(Q <= 0.75, (480/997)*(1+s)*(3-2*Q), (480/997)*(1+s)*1.5*exp(-(4/3)*(Q-0.75)))",
            "1 - s/2", "1",
        )
        .unwrap();
        let eq = solve_equilibrium(&model, [0.5, 2.0]).unwrap().pop().unwrap();
        (model, eq)
    }

    #[test]
    fn equilibrium_is_nearly_preserved() {
        let (model, eq) = declining(2048);
        let sim = Simulator::new(&model).unwrap();
        let mut st = sim.state(eq.u_star.clone()).unwrap();
        assert!((sim.boundary_inflow(&st).unwrap() - 1.0).abs() < 1e-6);
        sim.run_until(&mut st, 10.0).unwrap();
        let d = st.u.zip_with(&eq.u_star, |a, b| (a - b).abs()).unwrap();
        assert!(Quadrature::Trapezoid.integral(&d) <= 1e-3);
        assert_eq!(st.t, 10.0);
    }

    #[test]
    fn perturbation_decays_on_declining_model() {
        let (model, eq) = declining(1024);
        let v0 = GridFunction::from_fn(model.grid(), |s| (std::f64::consts::PI * s).sin()).unwrap();
        let r = measure_rate(&model, &eq, &v0, 1e-4, 20.0).unwrap();
        assert!((r.rate - (-1.0597)).abs() < 0.1, "{}", r.rate);
        assert!(r.points_used >= 8);
        let half = measure_rate(&model, &eq, &v0, 5e-5, 20.0).unwrap();
        assert!((half.rate - r.rate).abs() <= 0.02);
    }

    #[test]
    fn trivial_equilibrium_perturbation() {
        let model = ModelSpec::from_sources(1.0, 0.5, 512, "1", "1/2", "1", "1").unwrap();
        let eq = trivial(&model).unwrap();
        let v0 = GridFunction::from_fn(model.grid(), |s| 1.0 + s).unwrap();
        let r = measure_rate_with(&model, &eq, &v0, 1e-4, 20.0, RateOptions { norm_samples: 500, snapshots: 4 })
            .unwrap();
        assert!(r.rate <= -0.45);
        assert!(r.fit_window[1] < 20.0);
        assert_eq!(r.snapshots.len(), 5);
    }

    #[test]
    fn blow_up_is_reported() {
        let model = ModelSpec::from_sources(1.0, 0.5, 32, "1", "1e200", "1", "0").unwrap();
        let eq = trivial(&model).unwrap();
        let v0 = GridFunction::constant(model.grid(), 1.0).unwrap();
        match measure_rate(&model, &eq, &v0, 1.0, 50.0) {
            Err(Error::BlowUp { t, samples }) => {
                assert!(t > 0.0);
                assert!(!samples.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn early_rate_from_partial_samples() {
        let samples: Vec<(f64, f64)> = (0..100).map(|k| (0.1 * k as f64, 1e-6 * (0.7 * 0.1 * k as f64).exp())).collect();
        let (rate, window, n) = rate_before_blow_up(&samples, 1e-3).unwrap();
        assert!((rate - 0.7).abs() < 1e-9);
        assert!(window[1] < 10.0 && n >= 8);
        assert!(rate_before_blow_up(&samples[..3], 1e-3).is_none());
    }
}

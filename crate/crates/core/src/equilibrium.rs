//! Survival, net reproduction and stationary solutions.
//!
//! A stationary density has the shape `u*(s) = b pi(s, Q*)` with `b = u*(0)`,
//! and the boundary condition turns into `R(Q*) = 1`. For fixed `b` the
//! environment solves the fixed-point problem
//! `Q = environment(b pi(., Q))`, which is iterated with damping; the scalar
//! `F(b) = R(Q(b)) - 1` is then scanned for sign changes and bisected.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::GridExpr;
use crate::grid::{environment_slice, GridFunction};
use crate::model::ModelSpec;

/// The rates of a model compiled against its grid.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    pub nodes: Vec<f64>,
    pub h: f64,
    pub w: Vec<f64>,
    pub gamma: GridExpr,
    pub mu: GridExpr,
    pub beta: GridExpr,
}

impl Sampler {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let grid = model.grid();
        let nodes = grid.nodes();
        let rates = model.rates();
        let w = GridExpr::new(&rates.w, &nodes).eval(&vec![0.0; nodes.len()])?;
        Ok(Sampler {
            h: grid.h(),
            w,
            gamma: GridExpr::new(&rates.gamma, &nodes),
            mu: GridExpr::new(&rates.mu, &nodes),
            beta: GridExpr::new(&rates.beta, &nodes),
            nodes,
        })
    }

    pub fn gamma_positive(&self, q: &[f64]) -> Result<Vec<f64>> {
        let g = self.gamma.eval(q)?;
        if let Some(i) = g.iter().position(|&v| v <= 0.0) {
            return Err(Error::model(format!(
                "growth rate gamma({}, {}) = {} is not positive",
                self.nodes[i], q[i], g[i]
            )));
        }
        Ok(g)
    }

    pub fn survival(&self, model: &ModelSpec, q: &[f64]) -> Result<Vec<f64>> {
        let g = self.gamma_positive(q)?;
        let mu = self.mu.eval(q)?;
        let ratio: Vec<f64> = mu.iter().zip(&g).map(|(m, g)| m / g).collect();
        let c = model.quadrature.cumulative_slice(&ratio, self.h, true);
        let g0 = g[0];
        Ok(g.iter().zip(&c).map(|(gs, ci)| g0 / gs * (-ci).exp()).collect())
    }

    pub fn net_reproduction(&self, model: &ModelSpec, q: &[f64], pi: &[f64]) -> Result<f64> {
        let beta = self.beta.eval(q)?;
        let integrand: Vec<f64> = beta.iter().zip(pi).map(|(b, p)| b * p).collect();
        Ok(model.quadrature.integrate_slice(&integrand, self.h))
    }

    fn environment_of(&self, model: &ModelSpec, u: &[f64]) -> Vec<f64> {
        let wu: Vec<f64> = u.iter().zip(&self.w).map(|(a, b)| a * b).collect();
        environment_slice(model.quadrature, &wu, self.h, model.alpha())
    }
}

fn check_grid(model: &ModelSpec, q: &GridFunction) -> Result<()> {
    if *q.grid() != model.grid() {
        return Err(Error::domain("environment is not sampled on the model grid"));
    }
    Ok(())
}

/// `pi(s, Q) = gamma(0, Q(0)) / gamma(s, Q(s)) exp(-int_0^s mu/gamma)`.
pub fn survival(model: &ModelSpec, q: &GridFunction) -> Result<GridFunction> {
    check_grid(model, q)?;
    let sampler = Sampler::new(model)?;
    GridFunction::new(model.grid(), sampler.survival(model, q.values())?)
}

/// `R(Q) = int_0^m beta(s, Q(s)) pi(s, Q) ds`.
pub fn net_reproduction(model: &ModelSpec, q: &GridFunction) -> Result<f64> {
    check_grid(model, q)?;
    let sampler = Sampler::new(model)?;
    let pi = sampler.survival(model, q.values())?;
    sampler.net_reproduction(model, q.values(), &pi)
}

/// A stationary solution.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// Birth level `u*(0)`.
    pub b: f64,
    pub u_star: GridFunction,
    pub q_star: GridFunction,
    /// `R(Q*) - 1`.
    pub net_reproduction_residual: f64,
    pub fixed_point_iterations: usize,
}

impl Equilibrium {
    pub fn is_trivial(&self) -> bool {
        self.b == 0.0
    }

    pub fn summary(&self) -> EquilibriumSummary {
        EquilibriumSummary {
            b: self.b,
            net_reproduction_residual: self.net_reproduction_residual,
            fixed_point_iterations: self.fixed_point_iterations,
            max_q_star: self.q_star.values().iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub b: f64,
    pub net_reproduction_residual: f64,
    pub fixed_point_iterations: usize,
    pub max_q_star: f64,
}

struct Solver<'a> {
    model: &'a ModelSpec,
    sampler: Sampler,
    warm: Option<(f64, Vec<f64>)>,
}

struct Inner {
    q: Vec<f64>,
    pi: Vec<f64>,
    iterations: usize,
}

impl<'a> Solver<'a> {
    fn new(model: &'a ModelSpec) -> Result<Self> {
        Ok(Solver {
            model,
            sampler: Sampler::new(model)?,
            warm: None,
        })
    }

    fn inner(&mut self, b: f64) -> Result<Inner> {
        let settings = &self.model.solver;
        let n = self.sampler.nodes.len();
        if b == 0.0 {
            let q = vec![0.0; n];
            let pi = self.sampler.survival(self.model, &q)?;
            return Ok(Inner { q, pi, iterations: 0 });
        }
        let mut q = match &self.warm {
            Some((b_prev, q_prev)) if *b_prev > 0.0 => q_prev.iter().map(|v| v * b / b_prev).collect(),
            _ => {
                let pi0 = self.sampler.survival(self.model, &vec![0.0; n])?;
                let u: Vec<f64> = pi0.iter().map(|p| b * p).collect();
                self.sampler.environment_of(self.model, &u)
            }
        };
        let theta = settings.damping;
        for k in 1..=settings.max_iter {
            let pi = self.sampler.survival(self.model, &q)?;
            let u: Vec<f64> = pi.iter().map(|p| b * p).collect();
            let target = self.sampler.environment_of(self.model, &u);
            let mut change: f64 = 0.0;
            let mut size: f64 = 0.0;
            for (qi, ti) in q.iter_mut().zip(&target) {
                let next = (1.0 - theta) * *qi + theta * ti;
                change = change.max((next - *qi).abs());
                size = size.max(next.abs());
                *qi = next;
            }
            if !change.is_finite() {
                break;
            }
            if change <= settings.tol * (1.0 + size) {
                let pi = self.sampler.survival(self.model, &q)?;
                self.warm = Some((b, q.clone()));
                return Ok(Inner { q, pi, iterations: k });
            }
        }
        Err(Error::NonConvergence {
            b,
            iterations: settings.max_iter,
        })
    }

    fn residual(&mut self, b: f64) -> Result<(f64, Inner)> {
        let inner = self.inner(b)?;
        let r = self.sampler.net_reproduction(self.model, &inner.q, &inner.pi)?;
        Ok((r - 1.0, inner))
    }

    fn finish(&self, b: f64, inner: Inner, residual: f64) -> Result<Equilibrium> {
        let grid = self.model.grid();
        let u: Vec<f64> = inner.pi.iter().map(|p| b * p).collect();
        Ok(Equilibrium {
            b,
            u_star: GridFunction::new(grid, u)?,
            q_star: GridFunction::new(grid, inner.q)?,
            net_reproduction_residual: residual,
            fixed_point_iterations: inner.iterations,
        })
    }

    fn bisect(&mut self, mut lo: f64, mut f_lo: f64, mut hi: f64) -> Result<Option<Equilibrium>> {
        let tol = self.model.solver.residual_tol;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (f, inner) = self.residual(mid)?;
            if f.abs() <= tol {
                return self.finish(mid, inner, f).map(Some);
            }
            if (f < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                // bracket collapsed on a jump of F rather than a root
                return Ok(None);
            }
        }
        Ok(None)
    }
}

/// The stationary state obtained from the inner fixed point at a prescribed
/// birth level, without imposing `R(Q*) = 1`.
pub fn equilibrium_at(model: &ModelSpec, b: f64) -> Result<Equilibrium> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::domain(format!("birth level {b} must be non-negative")));
    }
    let mut solver = Solver::new(model)?;
    let (f, inner) = solver.residual(b)?;
    solver.finish(b, inner, f)
}

/// The trivial equilibrium `u* = 0`.
pub fn trivial(model: &ModelSpec) -> Result<Equilibrium> {
    equilibrium_at(model, 0.0)
}

/// Trivial equilibrium followed by every positive equilibrium whose birth
/// level is bracketed by a sign change of `R(Q(b)) - 1` on `b_range`.
/// Reports what converges; the list is not claimed to be complete.
pub fn solve_equilibrium(model: &ModelSpec, b_range: [f64; 2]) -> Result<Vec<Equilibrium>> {
    let [b_lo, b_hi] = b_range;
    if !(b_lo >= 0.0 && b_hi > b_lo && b_hi.is_finite()) {
        return Err(Error::domain(format!("invalid birth-level bracket [{b_lo}, {b_hi}]")));
    }
    let mut out = vec![trivial(model)?];
    let mut solver = Solver::new(model)?;
    let steps = model.solver.scan_intervals.max(1);
    let tol = model.solver.residual_tol;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let b = b_lo + (b_hi - b_lo) * i as f64 / steps as f64;
        let (f, inner) = solver.residual(b)?;
        if b > 0.0 && f.abs() <= tol {
            out.push(solver.finish(b, inner, f)?);
            prev = None;
            continue;
        }
        if let Some((b_prev, f_prev)) = prev {
            if (f < 0.0) != (f_prev < 0.0) {
                let found = solver.bisect(b_prev, f_prev, b)?;
                out.extend(found);
                // restore the warm start of the scan
                solver.residual(b)?;
            }
        }
        prev = Some((b, f));
    }
    Ok(out)
}

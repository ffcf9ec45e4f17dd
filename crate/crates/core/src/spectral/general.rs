//! The characteristic determinant for arbitrary coefficients.
//!
//! For `alpha < 1` the eigenproblem is rewritten in terms of the weighted
//! cumulative `V`, which solves
//!
//! ```text
//! V'' + V' ((rho* + lambda)/gamma* - w'/w) + V (alpha - 1) w sigma*/gamma* = 0
//! alpha V(0) = V(m)
//! V'(0) = int (w(0)/w) beta* V' + (alpha - 1) w(0) int beta_Q u* V
//! ```
//!
//! Two fundamental solutions with data `(1, 0)` and `(0, 1)` are integrated
//! with the classical fourth-order Runge-Kutta method, and `lambda` is an
//! eigenvalue iff `D = H1 J2 - H2 J1` vanishes.
//!
//! For `alpha = 1` the environment perturbation is the scalar
//! `V = int w v`; writing `v = v(0) a + V b` turns the problem into a
//! `2 x 2` system whose determinant is returned by
//! [`char_determinant_alpha1`].
//!
//! Zeros are counted by the winding number of `D` around a rectangle and
//! located by subdivision followed by Newton's method.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Quadrature;
use crate::linearization::LinearizedCoefficients;

/// Values of a sampled coefficient at the cell midpoints, by cubic
/// interpolation through the four nearest nodes.
fn midpoints(f: &[f64]) -> Vec<f64> {
    let n = f.len() - 1;
    (0..n)
        .map(|k| {
            if k == 0 {
                (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0
            } else if k == n - 1 {
                (f[n - 3] - 5.0 * f[n - 2] + 15.0 * f[n - 1] + 5.0 * f[n]) / 16.0
            } else {
                (-f[k - 1] + 9.0 * f[k] + 9.0 * f[k + 1] - f[k + 2]) / 16.0
            }
        })
        .collect()
}

fn integrate_complex(rule: Quadrature, v: &[Complex64], h: f64) -> Complex64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    Complex64::new(rule.integrate_slice(&re, h), rule.integrate_slice(&im, h))
}

/// An axis-parallel rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let ok = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite())
            && re_min < re_max
            && im_min < im_max;
        if !ok {
            return Err(Error::domain(format!(
                "invalid rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn from_array(r: [f64; 4]) -> Result<Self> {
        Self::new(r[0], r[1], r[2], r[3])
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }

    /// Counter-clockwise corners starting at the lower left.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Splits across the longer side at fraction `t`.
    fn split(&self, t: f64) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let x = self.re_min + t * self.width();
            (Rect { re_max: x, ..*self }, Rect { re_min: x, ..*self })
        } else {
            let y = self.im_min + t * self.height();
            (Rect { im_max: y, ..*self }, Rect { im_min: y, ..*self })
        }
    }
}

/// `V1`, `V2` and their derivatives at the nodes used by the integration.
#[derive(Debug, Clone)]
pub struct FundamentalSolutions {
    /// Node spacing of the samples below.
    pub h: f64,
    pub v1: Vec<Complex64>,
    pub dv1: Vec<Complex64>,
    pub v2: Vec<Complex64>,
    pub dv2: Vec<Complex64>,
}

/// Coefficient samples prepared for repeated evaluation of the determinant.
#[derive(Debug, Clone)]
pub struct Determinant {
    alpha: f64,
    h: f64,
    rule: Quadrature,
    /// `rho*/gamma* - w'/w`, at nodes and midpoints.
    drift: (Vec<f64>, Vec<f64>),
    /// `1/gamma*`.
    inv_gamma: (Vec<f64>, Vec<f64>),
    /// `(alpha - 1) w sigma*/gamma*`, or `-sigma*/gamma*` when `alpha = 1`.
    potential: (Vec<f64>, Vec<f64>),
    /// `(w(0)/w) beta*`.
    beta_weighted: Vec<f64>,
    beta: Vec<f64>,
    beta_q_u: Vec<f64>,
    beta_q_u_total: f64,
    w: Vec<f64>,
    w0: f64,
}

#[derive(Clone, Copy)]
enum Order {
    /// `V'' + p V' + q V = 0`.
    Second,
    /// `a' = -p a`, `b' = -p b + q`.
    First,
}

impl Determinant {
    pub fn new(c: &LinearizedCoefficients) -> Self {
        let g = c.gamma_star.values();
        let w = c.w.values();
        let wp = c.w_prime.values();
        let rho = c.rho_star.values();
        let sigma = c.sigma_star.values();
        let n = g.len();
        let alpha = c.alpha;
        let inv_gamma: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
        let (drift, potential): (Vec<f64>, Vec<f64>) = if alpha < 1.0 {
            (0..n)
                .map(|i| {
                    (
                        rho[i] * inv_gamma[i] - wp[i] / w[i],
                        (alpha - 1.0) * w[i] * sigma[i] * inv_gamma[i],
                    )
                })
                .unzip()
        } else {
            (0..n)
                .map(|i| (rho[i] * inv_gamma[i], -sigma[i] * inv_gamma[i]))
                .unzip()
        };
        let w0 = w[0];
        let beta_q_u = c.beta_q_u_star.values().to_vec();
        Determinant {
            alpha,
            h: c.h(),
            rule: c.quadrature,
            drift: (midpoints(&drift), drift),
            inv_gamma: (midpoints(&inv_gamma), inv_gamma),
            potential: (midpoints(&potential), potential),
            beta_weighted: (0..n).map(|i| w0 / w[i] * c.beta_star.values()[i]).collect(),
            beta: c.beta_star.values().to_vec(),
            beta_q_u_total: c.quadrature.integrate_slice(&beta_q_u, c.h()),
            beta_q_u,
            w: w.to_vec(),
            w0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn nodes(&self) -> usize {
        self.drift.1.len()
    }

    /// Coefficients `p`, `q` at `node`, or with `half` at the midpoint of the
    /// step of `stride` cells starting there.
    fn coeffs(&self, lambda: Complex64, node: usize, half: bool, stride: usize) -> (Complex64, f64) {
        let (d, g, q) = if !half {
            (self.drift.1[node], self.inv_gamma.1[node], self.potential.1[node])
        } else if stride == 1 {
            (self.drift.0[node], self.inv_gamma.0[node], self.potential.0[node])
        } else {
            let k = node + stride / 2;
            (self.drift.1[k], self.inv_gamma.1[k], self.potential.1[k])
        };
        (lambda * g + d, q)
    }

    /// Integrates two solutions from `[y0, y1]` initial states on nodes
    /// `0, stride, 2 stride, ...`.
    fn integrate(
        &self,
        lambda: Complex64,
        stride: usize,
        order: Order,
        init: [[Complex64; 2]; 2],
    ) -> Result<[Vec<[Complex64; 2]>; 2]> {
        let steps = (self.nodes() - 1) / stride;
        let hh = self.h * stride as f64;
        let f = |y: [Complex64; 2], p: Complex64, q: f64| -> [Complex64; 2] {
            match order {
                Order::Second => [y[1], -p * y[1] - y[0] * q],
                Order::First => [-p * y[0], -p * y[1] + q],
            }
        };
        let mut out: [Vec<[Complex64; 2]>; 2] = [Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1)];
        for (sol, y0) in out.iter_mut().zip(init) {
            let mut y = y0;
            sol.push(y);
            for k in 0..steps {
                let node = k * stride;
                let (p0, q0) = self.coeffs(lambda, node, false, stride);
                let (pm, qm) = self.coeffs(lambda, node, true, stride);
                let (p1, q1) = self.coeffs(lambda, node + stride, false, stride);
                let add = |a: [Complex64; 2], b: [Complex64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
                let k1 = f(y, p0, q0);
                let k2 = f(add(y, k1, 0.5 * hh), pm, qm);
                let k3 = f(add(y, k2, 0.5 * hh), pm, qm);
                let k4 = f(add(y, k3, hh), p1, q1);
                for c in 0..2 {
                    y[c] += (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * (hh / 6.0);
                }
                if !(y[0].is_finite() && y[1].is_finite()) {
                    return Err(Error::Overflow {
                        re: lambda.re,
                        im: lambda.im,
                    });
                }
                sol.push(y);
            }
        }
        Ok(out)
    }

    fn check_stride(&self, stride: usize) -> Result<()> {
        let cells = self.nodes() - 1;
        if stride == 0 || (stride > 1 && stride % 2 != 0) || cells % stride != 0 || cells / stride < 4 {
            return Err(Error::domain(format!(
                "stride {stride} incompatible with {cells} cells"
            )));
        }
        Ok(())
    }

    pub fn fundamental_solutions(&self, lambda: Complex64, stride: usize) -> Result<FundamentalSolutions> {
        if self.alpha >= 1.0 {
            return Err(Error::WrongRegime(
                "fundamental solutions of the second-order problem need alpha < 1".into(),
            ));
        }
        self.check_stride(stride)?;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let [s1, s2] = self.integrate(lambda, stride, Order::Second, [[one, zero], [zero, one]])?;
        Ok(FundamentalSolutions {
            h: self.h * stride as f64,
            v1: s1.iter().map(|y| y[0]).collect(),
            dv1: s1.iter().map(|y| y[1]).collect(),
            v2: s2.iter().map(|y| y[0]).collect(),
            dv2: s2.iter().map(|y| y[1]).collect(),
        })
    }

    /// `D(lambda)` with the shooting step `stride * h`; `stride` is 1 or even.
    pub fn eval_strided(&self, lambda: Complex64, stride: usize) -> Result<Complex64> {
        if self.alpha >= 1.0 {
            return self.eval_alpha1(lambda, stride);
        }
        let fs = self.fundamental_solutions(lambda, stride)?;
        let hh = fs.h;
        let sub = |v: &[f64]| -> Vec<f64> { v.iter().step_by(stride).cloned().collect() };
        let bw = sub(&self.beta_weighted);
        let bqu = sub(&self.beta_q_u);
        let boundary = |v: &[Complex64], dv: &[Complex64]| {
            let a: Vec<Complex64> = dv.iter().zip(&bw).map(|(d, b)| d * b).collect();
            let b: Vec<Complex64> = v.iter().zip(&bqu).map(|(x, b)| x * b).collect();
            let h_val = dv[0]
                - integrate_complex(self.rule, &a, hh)
                - integrate_complex(self.rule, &b, hh) * ((self.alpha - 1.0) * self.w0);
            let j_val = v[0] * self.alpha - v[v.len() - 1];
            (h_val, j_val)
        };
        let (h1, j1) = boundary(&fs.v1, &fs.dv1);
        let (h2, j2) = boundary(&fs.v2, &fs.dv2);
        let d = h1 * j2 - h2 * j1;
        if !d.is_finite() {
            return Err(Error::Overflow {
                re: lambda.re,
                im: lambda.im,
            });
        }
        Ok(d)
    }

    fn eval_alpha1(&self, lambda: Complex64, stride: usize) -> Result<Complex64> {
        self.check_stride(stride)?;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        // first solution carries `a` (homogeneous), second carries `b` (forced)
        let [sol, _] = self.integrate(lambda, stride, Order::First, [[one, zero], [one, zero]])?;
        let hh = self.h * stride as f64;
        let sub = |v: &[f64]| -> Vec<f64> { v.iter().step_by(stride).cloned().collect() };
        let (w, beta) = (sub(&self.w), sub(&self.beta));
        let weigh = |f: &[f64], c: usize| -> Complex64 {
            let v: Vec<Complex64> = sol.iter().zip(f).map(|(y, x)| y[c] * x).collect();
            integrate_complex(self.rule, &v, hh)
        };
        let (wa, wb) = (weigh(&w, 0), weigh(&w, 1));
        let (ba, bb) = (weigh(&beta, 0), weigh(&beta, 1));
        let d = -wa * (bb + self.beta_q_u_total) - (wb - 1.0) * (one - ba);
        if !d.is_finite() {
            return Err(Error::Overflow {
                re: lambda.re,
                im: lambda.im,
            });
        }
        Ok(d)
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        self.eval_strided(lambda, 1)
    }
}

/// `V1`, `V2` with data `(1, 0)` and `(0, 1)`; needs `alpha < 1`.
pub fn fundamental_solutions(c: &LinearizedCoefficients, lambda: Complex64) -> Result<FundamentalSolutions> {
    Determinant::new(c).fundamental_solutions(lambda, 1)
}

/// `D(lambda) = H1 J2 - H2 J1`; needs `alpha < 1`.
pub fn char_determinant(c: &LinearizedCoefficients, lambda: Complex64) -> Result<Complex64> {
    if c.alpha >= 1.0 {
        return Err(Error::WrongRegime("the second-order determinant needs alpha < 1".into()));
    }
    Determinant::new(c).eval(lambda)
}

/// Determinant of the `2 x 2` system for `alpha = 1`. Reduces to
/// `1 - K(lambda)` when `sigma* = 0`.
pub fn char_determinant_alpha1(c: &LinearizedCoefficients, lambda: Complex64) -> Result<Complex64> {
    if c.alpha != 1.0 {
        return Err(Error::WrongRegime("the scalar-environment determinant needs alpha = 1".into()));
    }
    Determinant::new(c).eval(lambda)
}

/// Boundary points per side before adaptive refinement.
const SIDE_SAMPLES: usize = 64;
/// Refinement depth limit for a single boundary segment.
const MAX_DEPTH: usize = 40;
/// A boundary value below `BOUNDARY_TOL * scale` counts as a zero on the contour.
const BOUNDARY_TOL: f64 = 1e-10;

struct Winding {
    turns: i64,
    max_abs: f64,
    evaluations: usize,
}

fn segment_phase(
    det: &Determinant,
    a: Complex64,
    da: Complex64,
    b: Complex64,
    db: Complex64,
    depth: usize,
    evals: &mut usize,
    min_abs: &mut f64,
) -> Result<f64> {
    let step = (db / da).arg();
    if step.abs() < std::f64::consts::FRAC_PI_2 {
        return Ok(step);
    }
    if depth == MAX_DEPTH {
        return Err(Error::BoundaryZero {
            min_abs: da.norm().min(db.norm()),
            scale: f64::NAN,
        });
    }
    let mid = 0.5 * (a + b);
    let dm = det.eval(mid)?;
    *evals += 1;
    *min_abs = min_abs.min(dm.norm());
    Ok(segment_phase(det, a, da, mid, dm, depth + 1, evals, min_abs)?
        + segment_phase(det, mid, dm, b, db, depth + 1, evals, min_abs)?)
}

fn boundary_points(rect: &Rect) -> Vec<Complex64> {
    let c = rect.corners();
    let mut pts = Vec::with_capacity(4 * SIDE_SAMPLES);
    for side in 0..4 {
        let (a, b) = (c[side], c[(side + 1) % 4]);
        for k in 0..SIDE_SAMPLES {
            pts.push(a + (b - a) * (k as f64 / SIDE_SAMPLES as f64));
        }
    }
    pts
}

fn winding(det: &Determinant, rect: &Rect, scale: Option<f64>) -> Result<Winding> {
    let pts = boundary_points(rect);
    let vals: Vec<Complex64> = pts.par_iter().map(|&z| det.eval(z)).collect::<Result<_>>()?;
    let mut min_abs = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.norm()));
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let scale_now = scale.unwrap_or(max_abs);
    if min_abs < BOUNDARY_TOL * scale_now {
        return Err(Error::BoundaryZero {
            min_abs,
            scale: scale_now,
        });
    }
    let segments: Vec<Result<(f64, usize, f64)>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let j = (i + 1) % pts.len();
            let mut evals = 0;
            let mut local_min = f64::INFINITY;
            let phase = segment_phase(det, pts[i], vals[i], pts[j], vals[j], 0, &mut evals, &mut local_min)?;
            Ok((phase, evals, local_min))
        })
        .collect();
    let mut total = 0.0;
    let mut evaluations = pts.len();
    for seg in segments {
        let (phase, evals, local_min) = seg.map_err(|e| match e {
            Error::BoundaryZero { min_abs, .. } => Error::BoundaryZero {
                min_abs,
                scale: scale_now,
            },
            other => other,
        })?;
        total += phase;
        evaluations += evals;
        min_abs = min_abs.min(local_min);
    }
    if min_abs < BOUNDARY_TOL * scale_now {
        return Err(Error::BoundaryZero {
            min_abs,
            scale: scale_now,
        });
    }
    Ok(Winding {
        turns: (total / std::f64::consts::TAU).round() as i64,
        max_abs,
        evaluations,
    })
}

/// Number of zeros of the determinant inside `rect`, with multiplicity.
pub fn count_roots(c: &LinearizedCoefficients, rect: &Rect) -> Result<usize> {
    let det = Determinant::new(c);
    let w = winding(&det, rect, None)?;
    usize::try_from(w.turns).map_err(|_| {
        Error::domain(format!("negative winding number {} around the rectangle", w.turns))
    })
}

/// A located eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    /// `|D|` at the reported point.
    pub residual: f64,
    /// Winding count of the smallest rectangle that isolated it.
    pub multiplicity: usize,
}

impl Root {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Bookkeeping of a root search.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchMethod {
    pub determinant: &'static str,
    pub shooting_steps: usize,
    pub determinant_evaluations: usize,
    pub newton_iterations: usize,
    pub winding_count: usize,
    pub rectangles_examined: usize,
}

/// Eigenvalues found in a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Sorted by real part, then imaginary part.
    pub roots: Vec<Root>,
    /// Largest real part among `roots`; `None` stands for minus infinity.
    pub spectral_bound_estimate: Option<f64>,
    pub search_region: Rect,
    /// Maximum of `|D|` on the boundary of the search region.
    pub scale: f64,
    pub incomplete: bool,
    pub method: SearchMethod,
}

const NEWTON_MAX: usize = 60;
/// Rectangles are not subdivided below this size relative to the search region.
const MIN_RELATIVE_SIZE: f64 = 1e-9;

struct Leaf {
    roots: Vec<Root>,
    evaluations: usize,
    newton: usize,
    rectangles: usize,
    incomplete: bool,
}

impl Leaf {
    fn empty() -> Self {
        Leaf {
            roots: Vec::new(),
            evaluations: 0,
            newton: 0,
            rectangles: 0,
            incomplete: false,
        }
    }

    fn merge(mut self, other: Leaf) -> Leaf {
        self.roots.extend(other.roots);
        self.evaluations += other.evaluations;
        self.newton += other.newton;
        self.rectangles += other.rectangles;
        self.incomplete |= other.incomplete;
        self
    }
}

struct Search<'a> {
    det: &'a Determinant,
    scale: f64,
    min_size: f64,
}

impl Search<'_> {
    fn newton(&self, rect: &Rect, evals: &mut usize, iters: &mut usize) -> Result<Option<(Complex64, f64)>> {
        let target = 1e-8 * self.scale;
        let mut z = rect.center();
        let mut dz = self.det.eval(z)?;
        *evals += 1;
        let mut converged_step = false;
        for _ in 0..NEWTON_MAX {
            *iters += 1;
            let delta = 1e-6 * (1.0 + z.norm());
            let dp = self.det.eval(z + delta)?;
            let dm = self.det.eval(z - delta)?;
            *evals += 2;
            let deriv = (dp - dm) / (2.0 * delta);
            if deriv.norm() == 0.0 || !deriv.is_finite() {
                return Ok(None);
            }
            let step = dz / deriv;
            z -= step;
            if !rect.contains(z) {
                return Ok(None);
            }
            dz = self.det.eval(z)?;
            *evals += 1;
            if step.norm() <= 1e-13 * (1.0 + z.norm()) {
                converged_step = true;
            }
            if dz.norm() <= target && (converged_step || step.norm() <= 1e-10 * (1.0 + z.norm())) {
                return Ok(Some((z, dz.norm())));
            }
            if converged_step {
                break;
            }
        }
        Ok((dz.norm() <= target).then_some((z, dz.norm())))
    }

    fn explore(&self, rect: Rect, count: usize, budget: usize) -> Result<Leaf> {
        let mut leaf = Leaf::empty();
        leaf.rectangles = 1;
        if count == 0 {
            return Ok(leaf);
        }
        if budget == 0 {
            leaf.incomplete = true;
            return Ok(leaf);
        }
        let tiny = rect.width().max(rect.height()) <= self.min_size;
        if count == 1 || tiny {
            let mut evals = 0;
            let mut iters = 0;
            let found = self.newton(&rect, &mut evals, &mut iters)?;
            leaf.evaluations += evals;
            leaf.newton += iters;
            if let Some((z, residual)) = found {
                leaf.roots.push(Root {
                    re: z.re,
                    im: z.im,
                    residual,
                    multiplicity: count,
                });
                return Ok(leaf);
            }
            if tiny {
                leaf.incomplete = true;
                return Ok(leaf);
            }
        }
        // split off-centre, nudging the cut away from zeros of D
        let mut last_err = None;
        for t in [0.5, 0.5 + 0.0377, 0.5 - 0.0613, 0.5 + 0.1171] {
            let (a, b) = rect.split(t);
            let counted = winding(self.det, &a, Some(self.scale)).and_then(|wa| {
                winding(self.det, &b, Some(self.scale)).map(|wb| (wa, wb))
            });
            match counted {
                Ok((wa, wb)) => {
                    leaf.evaluations += wa.evaluations + wb.evaluations;
                    let (ca, cb) = (wa.turns.max(0) as usize, wb.turns.max(0) as usize);
                    let (la, lb) = rayon::join(
                        || self.explore(a, ca, budget - 1),
                        || self.explore(b, cb, budget - 1),
                    );
                    return Ok(leaf.merge(la?).merge(lb?));
                }
                Err(e @ Error::BoundaryZero { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one split was attempted"))
    }
}

/// Locates the zeros of the determinant in `rect` by subdivision and Newton
/// polishing. The report is flagged incomplete if more than `max_roots`
/// zeros are present or a cluster could not be resolved.
pub fn find_roots(c: &LinearizedCoefficients, rect: &Rect, max_roots: usize) -> Result<SpectrumReport> {
    let det = Determinant::new(c);
    let top = winding(&det, rect, None)?;
    let total = usize::try_from(top.turns)
        .map_err(|_| Error::domain(format!("negative winding number {}", top.turns)))?;
    let search = Search {
        det: &det,
        scale: top.max_abs,
        min_size: MIN_RELATIVE_SIZE * rect.width().max(rect.height()),
    };
    let mut leaf = search.explore(*rect, total, 64)?;
    leaf.roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut incomplete = leaf.incomplete;
    if leaf.roots.len() > max_roots {
        leaf.roots.truncate(max_roots);
        incomplete = true;
    }
    let found: usize = leaf.roots.iter().map(|r| r.multiplicity).sum();
    if found != total {
        incomplete = true;
    }
    let spectral_bound_estimate = leaf.roots.iter().map(|r| r.re).reduce(f64::max);
    Ok(SpectrumReport {
        roots: leaf.roots,
        spectral_bound_estimate,
        search_region: *rect,
        scale: top.max_abs,
        incomplete,
        method: SearchMethod {
            determinant: if det.alpha() < 1.0 { "second_order_shooting" } else { "scalar_environment_extension" },
            shooting_steps: c.grid.n(),
            determinant_evaluations: top.evaluations + leaf.evaluations,
            newton_iterations: leaf.newton,
            winding_count: total,
            rectangles_examined: leaf.rectangles,
        },
    })
}

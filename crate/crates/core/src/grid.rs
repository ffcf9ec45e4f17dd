//! Uniform grids on `[0, m]`, sampled functions, quadrature and the
//! environment operator.
//!
//! Every integral in the crate goes through this module. Two node-based rules
//! are available:
//!
//! * [`Quadrature::Trapezoid`]: the composite trapezoid rule, second order and
//!   exact for piecewise-linear data.
//! * [`Quadrature::EndCorrected`]: the trapezoid rule with the leading
//!   Euler-Maclaurin term `-h^2/12 (f'(b) - f'(a))` subtracted, the
//!   derivatives being estimated from the samples. Fourth order for smooth
//!   data.
//!
//! Both rules produce cumulative integrals with `C(0) = 0` whose last value is
//! the full integral, so `int_0^s + int_s^m = int_0^m` holds at every node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid `s_i = i m / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    m: f64,
    n: usize,
}

/// Largest accepted number of cells.
pub const MAX_CELLS: usize = 1 << 22;

impl Grid {
    pub fn new(m: f64, n: usize) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::domain(format!("grid length must be positive, got {m}")));
        }
        if n < 8 || n % 2 != 0 || n > MAX_CELLS {
            return Err(Error::domain(format!(
                "grid needs an even number of cells in [8, {MAX_CELLS}], got {n}"
            )));
        }
        Ok(Grid { m, n })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Number of cells.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.m / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.m
        } else {
            i as f64 * self.m / self.n as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::domain(format!(
                "grid mismatch: [0,{}]/{} vs [0,{}]/{}",
                self.m, self.n, other.m, other.n
            )));
        }
        Ok(())
    }
}

/// A real function sampled at the nodes of a [`Grid`], linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite sample {} at s = {}",
                values[i],
                grid.node(i)
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation; `s` outside `[0, m]` is an error.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let m = self.grid.m;
        if !(0.0..=m).contains(&s) {
            return Err(Error::domain(format!("s = {s} outside [0, {m}]")));
        }
        let h = self.grid.h();
        let k = ((s / h).floor() as usize).min(self.grid.n - 1);
        let t = (s - self.grid.node(k)) / h;
        Ok((1.0 - t) * self.values[k] + t * self.values[k + 1])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Max-norm distance to another function on the same grid.
    pub fn max_diff(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }
}

/// Node-based quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Trapezoid,
    #[default]
    EndCorrected,
}

impl Quadrature {
    /// Integral over all samples, spacing `h`. Needs at least two samples;
    /// the end correction needs four and silently degrades to trapezoid below that.
    pub fn integrate_slice(self, values: &[f64], h: f64) -> f64 {
        let n = values.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.5 * (values[0] + values[n - 1]);
        for v in &values[1..n - 1] {
            sum += v;
        }
        let trap = h * sum;
        match self {
            Quadrature::Trapezoid => trap,
            Quadrature::EndCorrected if n >= 4 => {
                let d0 = left_derivative(values, h);
                let dn = right_derivative(values, h);
                trap - h * h / 12.0 * (dn - d0)
            }
            Quadrature::EndCorrected => trap,
        }
    }

    /// Running integrals. With `from_zero` entry `k` is `int_0^{s_k}`,
    /// otherwise `int_{s_k}^m`.
    pub fn cumulative_slice(self, values: &[f64], h: f64, from_zero: bool) -> Vec<f64> {
        let n = values.len();
        let mut out = vec![0.0; n];
        if n < 2 {
            return out;
        }
        let corrected = self == Quadrature::EndCorrected && n >= 4;
        if from_zero {
            for k in 1..n {
                out[k] = out[k - 1] + 0.5 * h * (values[k - 1] + values[k]);
            }
            if corrected {
                let d0 = left_derivative(values, h);
                for k in 1..n {
                    out[k] -= h * h / 12.0 * (node_derivative(values, h, k) - d0);
                }
            }
        } else {
            for k in (0..n - 1).rev() {
                out[k] = out[k + 1] + 0.5 * h * (values[k] + values[k + 1]);
            }
            if corrected {
                let dn = right_derivative(values, h);
                for k in 0..n - 1 {
                    out[k] -= h * h / 12.0 * (dn - node_derivative(values, h, k));
                }
            }
        }
        out
    }

    pub fn integral(self, f: &GridFunction) -> f64 {
        self.integrate_slice(&f.values, f.grid.h())
    }

    pub fn cumulative(self, f: &GridFunction, from_zero: bool) -> GridFunction {
        GridFunction {
            grid: f.grid,
            values: self.cumulative_slice(&f.values, f.grid.h(), from_zero),
        }
    }

    /// `alpha int_0^s w u + int_s^m w u` at every node.
    pub fn environment(self, u: &GridFunction, alpha: f64, w: &GridFunction) -> Result<GridFunction> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!("alpha = {alpha} outside [0, 1]")));
        }
        u.grid.check_same(&w.grid)?;
        let wu: Vec<f64> = u.values.iter().zip(&w.values).map(|(a, b)| a * b).collect();
        Ok(GridFunction {
            grid: u.grid,
            values: environment_slice(self, &wu, u.grid.h(), alpha),
        })
    }
}

/// Environment from the samples of `w u`. Written as `total - (1 - alpha) C(s)`
/// so that monotonicity of `C` carries over exactly.
pub(crate) fn environment_slice(rule: Quadrature, wu: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let c = rule.cumulative_slice(wu, h, true);
    let total = *c.last().unwrap_or(&0.0);
    let k = 1.0 - alpha;
    c.iter().map(|ci| total - k * ci).collect()
}

fn left_derivative(v: &[f64], h: f64) -> f64 {
    (-11.0 * v[0] + 18.0 * v[1] - 9.0 * v[2] + 2.0 * v[3]) / (6.0 * h)
}

fn right_derivative(v: &[f64], h: f64) -> f64 {
    let n = v.len() - 1;
    (11.0 * v[n] - 18.0 * v[n - 1] + 9.0 * v[n - 2] - 2.0 * v[n - 3]) / (6.0 * h)
}

fn node_derivative(v: &[f64], h: f64, k: usize) -> f64 {
    let n = v.len() - 1;
    if k == 0 {
        left_derivative(v, h)
    } else if k == n {
        right_derivative(v, h)
    } else {
        (v[k + 1] - v[k - 1]) / (2.0 * h)
    }
}

/// Composite trapezoid value of `int_a^b f` for the piecewise-linear
/// interpolant of `f`.
pub fn integrate(f: &GridFunction, a: f64, b: f64) -> Result<f64> {
    let m = f.grid.m;
    if !(0.0 <= a && a <= b && b <= m) {
        return Err(Error::domain(format!(
            "integration bounds [{a}, {b}] not inside [0, {m}] or reversed"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    if a == 0.0 && b == m {
        return Ok(Quadrature::Trapezoid.integral(f));
    }
    let h = f.grid.h();
    let first = ((a / h).floor() as usize).min(f.grid.n - 1);
    let last = ((b / h).ceil() as usize).clamp(first + 1, f.grid.n);
    let mut total = 0.0;
    for k in first..last {
        let lo = f.grid.node(k).max(a);
        let hi = f.grid.node(k + 1).min(b);
        if hi > lo {
            total += 0.5 * (hi - lo) * (f.eval(lo)? + f.eval(hi)?);
        }
    }
    Ok(total)
}

/// Trapezoid running integral, `int_0^{s_k}` or `int_{s_k}^m`.
pub fn cumulative_integral(f: &GridFunction, from_zero: bool) -> GridFunction {
    Quadrature::Trapezoid.cumulative(f, from_zero)
}

/// The environment `Q(s) = alpha int_0^s w u + int_s^m w u`, trapezoid rule.
pub fn environment(u: &GridFunction, alpha: f64, w: &GridFunction) -> Result<GridFunction> {
    Quadrature::Trapezoid.environment(u, alpha, w)
}

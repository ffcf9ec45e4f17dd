//! Model ingredients and the textual model file.
//!
//! A model file is TOML:
//!
//! ```toml
//! m = 1.0
//! alpha = 0.5
//! grid_n = 2048                # optional
//! q_validation_max = 1.5       # optional
//! quadrature = "end_corrected" # or "trapezoid"
//!
//! [rates]
//! w = "1"
//! gamma = "1 - s/2"
//! mu = "1"
//! beta = "piecewise(Q <= 3/4, (480/997)*(1+s)*(3-2*Q), (480/997)*(1+s)*1.5*exp(-(4/3)*(Q-3/4)))"
//!
//! [solver]      # all optional
//! b_range = [0.5, 2.0]
//!
//! [spectral]    # all optional
//! search = [-5.0, 5.0]
//! rect = [-5.0, 1.0, -10.0, 10.0]
//!
//! [simulation]  # all optional
//! t_end = 20.0
//! eps = 1e-4
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, GridExpr, Var};
use crate::grid::{Grid, Quadrature};

pub const DEFAULT_GRID_N: usize = 2048;

/// The vital rates together with every partial derivative the analysis needs.
#[derive(Debug, Clone)]
pub struct Rates {
    pub w: Expr,
    pub w_s: Expr,
    pub beta: Expr,
    pub beta_q: Expr,
    pub gamma: Expr,
    pub gamma_s: Expr,
    pub gamma_q: Expr,
    pub gamma_sq: Expr,
    pub gamma_qq: Expr,
    pub mu: Expr,
    pub mu_q: Expr,
}

impl Rates {
    pub fn new(w: Expr, beta: Expr, gamma: Expr, mu: Expr) -> Result<Self> {
        if w.depends_on(Var::Q) {
            return Err(Error::model(format!("weight w must not depend on Q: {w}")));
        }
        let gamma_s = gamma.diff(Var::S);
        let gamma_q = gamma.diff(Var::Q);
        Ok(Rates {
            w_s: w.diff(Var::S),
            beta_q: beta.diff(Var::Q),
            gamma_sq: gamma_s.diff(Var::Q),
            gamma_qq: gamma_q.diff(Var::Q),
            mu_q: mu.diff(Var::Q),
            w,
            beta,
            gamma,
            gamma_s,
            gamma_q,
            mu,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Bracket searched for birth levels `b = u*(0)` of positive equilibria.
    pub b_range: [f64; 2],
    /// Damping of the environment fixed point.
    pub damping: f64,
    /// Relative max-norm tolerance of the environment fixed point.
    pub tol: f64,
    pub max_iter: usize,
    /// Target for `|R(Q*) - 1|` in the outer bisection.
    pub residual_tol: f64,
    /// Sub-intervals of `b_range` scanned for sign changes.
    pub scan_intervals: usize,
    /// Skip the root search and use this birth level as the equilibrium.
    pub forced_b: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            b_range: [1e-3, 10.0],
            damping: 0.5,
            tol: 1e-12,
            max_iter: 500,
            residual_tol: 1e-10,
            scan_intervals: 64,
            forced_b: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSettings {
    /// Real window for the dominant root of the explicit characteristic function.
    /// Defaults to `[-3 max(mu*/gamma*) - 10, 10]`.
    pub search: Option<[f64; 2]>,
    /// `[re0, re1, im0, im1]` for the determinant root search.
    pub rect: [f64; 4],
    pub max_roots: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings {
            search: None,
            rect: [-5.0, 1.0, -10.0, 10.0],
            max_roots: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub t_end: f64,
    /// Perturbation size relative to the L1 norm of the equilibrium.
    pub eps: f64,
    pub cfl: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            t_end: 20.0,
            eps: 1e-4,
            cfl: 0.9,
        }
    }
}

/// Everything needed to analyse one model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    alpha: f64,
    grid: Grid,
    rates: Rates,
    pub q_validation_max: Option<f64>,
    pub quadrature: Quadrature,
    /// Read `w(s)` instead of `w(eta)` inside the integral defining `e*`.
    pub estar_w_of_s: bool,
    pub solver: SolverSettings,
    pub spectral: SpectralSettings,
    pub simulation: SimSettings,
}

impl ModelSpec {
    /// Builds a model from expression sources and checks the ingredients at `Q = 0`.
    pub fn from_sources(m: f64, alpha: f64, grid_n: usize, w: &str, beta: &str, gamma: &str, mu: &str) -> Result<Self> {
        let parse_rate = |name: &str, src: &str| {
            parse(src).map_err(|e| Error::model(format!("rate `{name}`: {e}")))
        };
        let rates = Rates::new(
            parse_rate("w", w)?,
            parse_rate("beta", beta)?,
            parse_rate("gamma", gamma)?,
            parse_rate("mu", mu)?,
        )?;
        Self::new(m, alpha, grid_n, rates)
    }

    pub fn new(m: f64, alpha: f64, grid_n: usize, rates: Rates) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::model(format!("alpha = {alpha} outside [0, 1]")));
        }
        let grid = Grid::new(m, grid_n).map_err(|e| Error::model(e.to_string()))?;
        let model = ModelSpec {
            alpha,
            grid,
            rates,
            q_validation_max: None,
            quadrature: Quadrature::default(),
            estar_w_of_s: false,
            solver: SolverSettings::default(),
            spectral: SpectralSettings::default(),
            simulation: SimSettings::default(),
        };
        model.validate(0.0)?;
        Ok(model)
    }

    pub fn m(&self) -> f64 {
        self.grid.m()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn with_grid_n(mut self, n: usize) -> Result<Self> {
        self.grid = Grid::new(self.grid.m(), n).map_err(|e| Error::model(e.to_string()))?;
        Ok(self)
    }

    pub fn with_quadrature(mut self, rule: Quadrature) -> Self {
        self.quadrature = rule;
        self
    }

    /// Same model with `beta` replaced.
    pub fn with_beta(&self, beta: Expr) -> Result<Self> {
        let r = &self.rates;
        let rates = Rates::new(r.w.clone(), beta, r.gamma.clone(), r.mu.clone())?;
        Ok(ModelSpec {
            rates,
            ..self.clone()
        })
    }

    /// Checks `w > 0` at every node, and `gamma > 0`, `mu >= 0`, `beta >= 0`
    /// at every node for nine environment levels spread over `[0, q_max]`.
    pub fn validate(&self, q_max: f64) -> Result<()> {
        if !(q_max.is_finite() && q_max >= 0.0) {
            return Err(Error::model(format!("invalid validation range [0, {q_max}]")));
        }
        let nodes = self.grid.nodes();
        let zeros = vec![0.0; nodes.len()];
        let w = GridExpr::new(&self.rates.w, &nodes)
            .eval(&zeros)
            .map_err(|e| Error::model(format!("w: {e}")))?;
        if let Some(i) = w.iter().position(|&v| v <= 0.0) {
            return Err(Error::model(format!("w({}) = {} is not positive", nodes[i], w[i])));
        }
        let levels = if q_max == 0.0 { 1 } else { 9 };
        let checks: [(&str, &Expr, fn(f64) -> bool, &str); 3] = [
            ("gamma", &self.rates.gamma, |v| v > 0.0, "positive"),
            ("mu", &self.rates.mu, |v| v >= 0.0, "non-negative"),
            ("beta", &self.rates.beta, |v| v >= 0.0, "non-negative"),
        ];
        for (name, expr, ok, what) in checks {
            let g = GridExpr::new(expr, &nodes);
            for j in 0..levels {
                let q = if levels == 1 { 0.0 } else { q_max * j as f64 / (levels - 1) as f64 };
                let v = g
                    .eval(&vec![q; nodes.len()])
                    .map_err(|e| Error::model(format!("{name}: {e}")))?;
                if let Some(i) = v.iter().position(|&x| !ok(x)) {
                    return Err(Error::model(format!(
                        "{name}({}, {q}) = {} is not {what}",
                        nodes[i], v[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses and validates a model file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| Error::model(format!("model file: {e}")))?;
        file.into_spec()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateSources {
    w: String,
    beta: String,
    gamma: String,
    mu: String,
}

/// Raw model file contents before validation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    m: f64,
    alpha: f64,
    grid_n: Option<usize>,
    q_validation_max: Option<f64>,
    quadrature: Option<Quadrature>,
    #[serde(default)]
    estar_w_of_s: bool,
    rates: RateSources,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    spectral: SpectralSettings,
    #[serde(default)]
    simulation: SimSettings,
}

impl ModelFile {
    fn into_spec(self) -> Result<ModelSpec> {
        let r = &self.rates;
        let mut spec = ModelSpec::from_sources(
            self.m,
            self.alpha,
            self.grid_n.unwrap_or(DEFAULT_GRID_N),
            &r.w,
            &r.beta,
            &r.gamma,
            &r.mu,
        )?;
        let [lo, hi] = self.solver.b_range;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::model(format!("solver.b_range [{lo}, {hi}] is not a valid bracket")));
        }
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            return Err(Error::model("solver.damping must lie in (0, 1]"));
        }
        if let Some(b) = self.solver.forced_b {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::model("solver.forced_b must be a non-negative number"));
            }
        }
        let [re0, re1, im0, im1] = self.spectral.rect;
        if !(re0 < re1 && im0 < im1) {
            return Err(Error::model("spectral.rect must be [re0, re1, im0, im1] with re0 < re1, im0 < im1"));
        }
        if !(self.simulation.t_end > 0.0 && self.simulation.eps > 0.0 && self.simulation.cfl > 0.0 && self.simulation.cfl <= 1.0) {
            return Err(Error::model("simulation settings need t_end > 0, eps > 0, 0 < cfl <= 1"));
        }
        if let Some(q) = self.q_validation_max {
            spec.validate(q)?;
        }
        spec.q_validation_max = self.q_validation_max;
        spec.quadrature = self.quadrature.unwrap_or_default();
        spec.estar_w_of_s = self.estar_w_of_s;
        spec.solver = self.solver;
        spec.spectral = self.spectral;
        spec.simulation = self.simulation;
        Ok(spec)
    }
}

//! Experiment configuration: one structured TOML file per experiment, no
//! positional parameters beyond paths, so every run is reproducible from the
//! checked-in configs. Unknown keys are rejected.

use std::io;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use brokenpde::{BrokenProblem, CoefficientModel, Expr, GridSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dirichlet boundary expression in `x`, `y`.
    pub boundary: String,
    pub grid: GridSection,
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub bounds_x: [f64; 2],
    /// Defaults to `bounds_x`.
    #[serde(default)]
    pub bounds_y: Option<[f64; 2]>,
    /// Points per axis; at least 9 for experiment grids.
    pub n: usize,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    #[serde(default)]
    pub s: f64,
    pub a_plus: Option<String>,
    pub a_minus: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    #[serde(default = "zero_expr")]
    pub f_x: String,
    #[serde(default = "zero_expr")]
    pub f_y: String,
    pub lambda: f64,
    pub alpha: f64,
    pub omega0: f64,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_picard: f64,
    pub max_picard: usize,
    pub theta: f64,
    pub tol_cg: f64,
    /// 0 means `20 * node count`.
    pub max_cg: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { tol_picard: 1e-10, max_picard: 200, theta: 1.0, tol_cg: 1e-12, max_cg: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Base point for order/fit/frequency diagnostics.
    pub z: [f64; 2],
    /// Largest radius of the vanishing-order sweep.
    pub r_max: f64,
    /// Number of dyadic levels in the sweep.
    pub levels: usize,
    /// Degree of the harmonic fit.
    pub degree: usize,
    /// Fit radius for harmonic fits and interface normals; 0 selects the
    /// default `8h`.
    pub r_fit: f64,
    pub freq_r_min: f64,
    pub freq_r_max: f64,
    pub freq_steps: usize,
    /// Ball radius for the sign-measure report.
    pub measure_radius: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            z: [0.0, 0.0],
            r_max: 0.4,
            levels: 4,
            degree: 2,
            r_fit: 0.0,
            freq_r_min: 0.08,
            freq_r_max: 0.4,
            freq_steps: 9,
            measure_radius: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.dim != 1 && self.grid.dim != 2 {
            return Err(invalid("grid.dim", "must be 1 or 2"));
        }
        if self.grid.n < 9 {
            return Err(invalid("grid.n", format!("need at least 9 points per axis, got {}", self.grid.n)));
        }
        let c = &self.coefficients;
        if c.s < 0.0 {
            return Err(invalid("coefficients.s", "must be >= 0"));
        }
        if c.s == 0.0 {
            if c.a_plus.is_none() || c.a_minus.is_none() {
                return Err(invalid(
                    "coefficients.a_plus",
                    "the jump regime (s = 0) needs `a_plus` and `a_minus`",
                ));
            }
            if c.a.is_some() || c.b.is_some() {
                return Err(invalid("coefficients.a", "`a`/`b` belong to the power regime (s > 0)"));
            }
        } else {
            if c.a.is_none() || c.b.is_none() {
                return Err(invalid("coefficients.a", "the power regime (s > 0) needs `a` and `b`"));
            }
            if c.a_plus.is_some() || c.a_minus.is_some() {
                return Err(invalid(
                    "coefficients.a_plus",
                    "`a_plus`/`a_minus` belong to the jump regime (s = 0)",
                ));
            }
        }
        if self.solver.theta <= 0.0 || self.solver.theta > 1.0 {
            return Err(invalid("solver.theta", "must lie in (0, 1]"));
        }
        if self.analysis.freq_steps < 2 {
            return Err(invalid("analysis.freq_steps", "need at least 2 radii"));
        }
        // Surface expression syntax errors at load time, key by key.
        self.expr("boundary", &self.boundary)?;
        for (key, text) in [
            ("coefficients.a_plus", &c.a_plus),
            ("coefficients.a_minus", &c.a_minus),
            ("coefficients.a", &c.a),
            ("coefficients.b", &c.b),
        ] {
            if let Some(text) = text {
                self.expr(key, text)?;
            }
        }
        self.expr("coefficients.f_x", &c.f_x)?;
        self.expr("coefficients.f_y", &c.f_y)?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let [lo, hi] = self.grid.bounds_x;
        let res = if self.grid.dim == 1 {
            GridSpec::line(lo, hi, self.grid.n)
        } else {
            let by = self.grid.bounds_y.unwrap_or(self.grid.bounds_x);
            GridSpec::rect([(lo, hi), (by[0], by[1])], [self.grid.n, self.grid.n])
        };
        res.map_err(|e| invalid("grid", e.to_string()))
    }

    fn expr(&self, key: &str, text: &str) -> Result<Expr, ConfigError> {
        Expr::parse(text).map_err(|e| invalid(key, e.to_string()))
    }

    pub fn boundary_expr(&self) -> Result<Expr, ConfigError> {
        self.expr("boundary", &self.boundary)
    }

    pub fn model(&self) -> Result<CoefficientModel, ConfigError> {
        let c = &self.coefficients;
        let f = [self.expr("coefficients.f_x", &c.f_x)?, self.expr("coefficients.f_y", &c.f_y)?];
        let model = if c.s == 0.0 {
            CoefficientModel::jump(
                self.expr("coefficients.a_plus", c.a_plus.as_ref().unwrap())?,
                self.expr("coefficients.a_minus", c.a_minus.as_ref().unwrap())?,
                f,
                c.lambda,
                c.alpha,
                c.omega0,
            )
        } else {
            CoefficientModel::power(
                c.s,
                self.expr("coefficients.a", c.a.as_ref().unwrap())?,
                self.expr("coefficients.b", c.b.as_ref().unwrap())?,
                f,
                c.lambda,
                c.alpha,
                c.omega0,
            )
        };
        model.map_err(|e| invalid("coefficients", e.to_string()))
    }

    pub fn problem(&self) -> Result<BrokenProblem, ConfigError> {
        let grid = self.grid_spec()?;
        let mut p = BrokenProblem::new(grid, self.model()?, self.boundary_expr()?);
        p.tol_picard = self.solver.tol_picard;
        p.max_picard = self.solver.max_picard;
        p.theta = self.solver.theta;
        p.tol_cg = self.solver.tol_cg;
        p.max_cg = self.solver.max_cg;
        Ok(p)
    }

    /// Effective fit radius: the configured value, or `8h` when unset.
    pub fn effective_r_fit(&self, grid: &GridSpec) -> f64 {
        if self.analysis.r_fit > 0.0 {
            self.analysis.r_fit
        } else {
            8.0 * grid.max_spacing()
        }
    }

    /// Equispaced frequency radii `freq_r_min ..= freq_r_max`.
    pub fn frequency_radii(&self) -> Vec<f64> {
        let a = &self.analysis;
        let step = (a.freq_r_max - a.freq_r_min) / (a.freq_steps - 1) as f64;
        (0..a.freq_steps).map(|k| a.freq_r_min + step * k as f64).collect()
    }

    /// Copy of the configuration on an `n`-point grid (refinement sweeps).
    pub fn with_n(&self, n: usize) -> Self {
        let mut cfg = self.clone();
        cfg.grid.n = n;
        cfg
    }
}

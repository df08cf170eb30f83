//! Run configuration: JSON document, validated at parse time.
//!
//! Every optional block is filled with its defaults while parsing, so the
//! effective configuration serializes to a document that parses back to the
//! same value.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slider_core::dynamics::{Method, Problem, SolverSettings, StepControl};
use slider_core::geometry::{build_grid, DomainRect, Grid, HeightTable, SliderShape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Malformed JSON, wrong types or unknown keys.
    Parse {
        line: usize,
        path: String,
        message: String,
    },
    /// Well-formed document violating a constraint.
    Validation { path: String, constraint: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                path,
                message,
            } => write!(f, "parse error at line {line} ({path}): {message}"),
            ConfigError::Validation { path, constraint } => {
                write!(f, "invalid value for {path}: {constraint}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str, constraint: &str) -> ConfigError {
    ConfigError::Validation {
        path: path.to_string(),
        constraint: constraint.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub shape: ShapeConfig,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub gcurve: GcurveConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    LineContact { alpha: f64 },
    PointContact { alpha: f64 },
    Flat,
    /// CSV with columns `x1,x2,h0,dh0_dx1` on every grid node, boundary
    /// included; a relative path is taken from the config file's directory.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub force: f64,
    pub eta0: f64,
    #[serde(default)]
    pub eta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub omega: f64,
    pub tol: f64,
    /// Filled with `50 nx ny` when absent.
    pub max_iter: Option<usize>,
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            omega: s.omega,
            tol: s.tol,
            max_iter: s.max_iter,
            warm_start: s.warm_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub eps_contact: f64,
    pub max_samples: usize,
    pub method: Method,
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let c = StepControl::new(1e-6);
        Self {
            t_end: 10.0,
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            eps_contact: c.eps_contact,
            max_samples: c.max_samples,
            method: c.method,
            max_step: c.max_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    pub beta_init: f64,
    pub max_expansions: usize,
    pub tol: f64,
    pub beta_tol: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            beta_init: 0.5,
            max_expansions: slider_core::steady::DEFAULT_MAX_EXPANSIONS,
            tol: 1e-6,
            beta_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcurveConfig {
    pub betas: Vec<f64>,
}

impl Default for GcurveConfig {
    /// 20 logarithmically spaced clearances from 10 down to 1e-3.
    fn default() -> Self {
        Self {
            betas: (0..20)
                .map(|k| 10.0 * 1e-4f64.powf(k as f64 / 19.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Odd-mode cutoff of the flat-slider series.
    pub series_cutoff: usize,
    pub fine_tol: f64,
    pub lcp_cases: usize,
    pub comparison_regions: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            series_cutoff: 99,
            fine_tol: 1e-10,
            lcp_cases: 100,
            comparison_regions: 20,
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            path,
            message: inner.to_string(),
        }
    })?;
    cfg.validate()?;
    if cfg.solver.max_iter.is_none() {
        cfg.solver.max_iter = Some(50 * cfg.grid.nx * cfg.grid.ny);
    }
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, "must be > 0"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        for (path, v) in [
            ("domain.x1_min", d.x1_min),
            ("domain.x1_max", d.x1_max),
            ("domain.x2_min", d.x2_min),
            ("domain.x2_max", d.x2_max),
        ] {
            if !v.is_finite() {
                return Err(invalid(path, "must be finite"));
            }
        }
        if !(d.x1_min < 0.0) {
            return Err(invalid("domain.x1_min", "must be < 0"));
        }
        if !(d.x1_max > 0.0) {
            return Err(invalid("domain.x1_max", "must be > 0"));
        }
        if !(d.x2_min < 0.0) {
            return Err(invalid("domain.x2_min", "must be < 0"));
        }
        if !(d.x2_max > 0.0) {
            return Err(invalid("domain.x2_max", "must be > 0"));
        }
        match &self.shape {
            ShapeConfig::LineContact { alpha } | ShapeConfig::PointContact { alpha } => {
                if !(*alpha >= 1.0 && alpha.is_finite()) {
                    return Err(invalid("shape.alpha", "must be >= 1"));
                }
            }
            ShapeConfig::Tabulated { path } => {
                if path.as_os_str().is_empty() {
                    return Err(invalid("shape.path", "must not be empty"));
                }
            }
            ShapeConfig::Flat => {}
        }
        if self.grid.nx < 3 {
            return Err(invalid("grid.nx", "must be >= 3"));
        }
        if self.grid.ny < 3 {
            return Err(invalid("grid.ny", "must be >= 3"));
        }
        positive("physics.force", self.physics.force)?;
        positive("physics.eta0", self.physics.eta0)?;
        if !self.physics.eta1.is_finite() {
            return Err(invalid("physics.eta1", "must be finite"));
        }
        let s = &self.solver;
        if !(s.omega > 0.0 && s.omega < 2.0) {
            return Err(invalid("solver.omega", "must lie in (0, 2)"));
        }
        positive("solver.tol", s.tol)?;
        if s.max_iter == Some(0) {
            return Err(invalid("solver.max_iter", "must be >= 1"));
        }
        let i = &self.integrator;
        positive("integrator.t_end", i.t_end)?;
        positive("integrator.rel_tol", i.rel_tol)?;
        positive("integrator.abs_tol", i.abs_tol)?;
        if !(i.eps_contact >= 0.0 && i.eps_contact.is_finite()) {
            return Err(invalid("integrator.eps_contact", "must be >= 0"));
        }
        if i.max_samples < 2 {
            return Err(invalid("integrator.max_samples", "must be >= 2"));
        }
        if let Some(h) = i.max_step {
            positive("integrator.max_step", h)?;
        }
        positive("steady.beta_init", self.steady.beta_init)?;
        positive("steady.tol", self.steady.tol)?;
        positive("steady.beta_tol", self.steady.beta_tol)?;
        if self.gcurve.betas.is_empty() {
            return Err(invalid("gcurve.betas", "must not be empty"));
        }
        for (k, &b) in self.gcurve.betas.iter().enumerate() {
            positive(&format!("gcurve.betas[{k}]"), b)?;
        }
        if self.oracle.series_cutoff < 1 {
            return Err(invalid("oracle.series_cutoff", "must be >= 1"));
        }
        positive("oracle.fine_tol", self.oracle.fine_tol)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn domain_rect(&self) -> slider_core::Result<DomainRect> {
        let d = &self.domain;
        DomainRect::new(d.x1_min, d.x1_max, d.x2_min, d.x2_max)
    }

    pub fn build_grid(&self) -> slider_core::Result<Grid> {
        build_grid(self.domain_rect()?, self.grid.nx, self.grid.ny)
    }

    /// `base` resolves a relative table path.
    pub fn build_shape(&self, grid: &Grid, base: &Path) -> slider_core::Result<SliderShape> {
        match &self.shape {
            ShapeConfig::LineContact { alpha } => SliderShape::line(*alpha),
            ShapeConfig::PointContact { alpha } => SliderShape::point(*alpha),
            ShapeConfig::Flat => Ok(SliderShape::Flat),
            ShapeConfig::Tabulated { path } => {
                let file = File::open(base.join(path))?;
                let table = HeightTable::from_csv(file, grid)?;
                Ok(SliderShape::Tabulated(Box::new(table)))
            }
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            omega: self.solver.omega,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            warm_start: self.solver.warm_start,
        }
    }

    pub fn step_control(&self) -> StepControl {
        let i = &self.integrator;
        StepControl {
            method: i.method,
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            eps_contact: i.eps_contact,
            max_samples: i.max_samples,
            max_step: i.max_step,
        }
    }

    pub fn build_problem(&self, base: &Path) -> slider_core::Result<Problem> {
        let grid = self.build_grid()?;
        let shape = self.build_shape(&grid, base)?;
        let p = &self.physics;
        Problem::new(shape, grid, p.force, p.eta0, p.eta1, self.solver_settings())
    }
}

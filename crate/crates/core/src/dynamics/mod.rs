//! Film force `G(beta, gamma)`, slider dynamics and the a priori bounds.

pub mod ode;
mod trajectory;

use serde::Serialize;

pub use ode::{ForceSample, Method, StepControl, Termination};
pub use trajectory::{
    integrate_trajectory, monitor_energies, EnergyMonitor, Sample, SegmentKind, SegmentVerdict,
    Trajectory,
};

use crate::error::{Error, Result};
use crate::geometry::{compute_v1, ContactBox, Grid, SliderShape};
use crate::vi::{
    load_integral, solve_linear, solve_vi_psor, DiscreteSystem, PressureField, Stencil,
};

/// PSOR parameters shared by every film solve of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub omega: f64,
    pub tol: f64,
    /// Defaults to `50 nx ny`.
    pub max_iter: Option<usize>,
    pub warm_start: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            omega: 1.5,
            tol: 1e-8,
            max_iter: None,
            warm_start: true,
        }
    }
}

/// Slider, film discretization, applied load and initial state.
#[derive(Debug, Clone)]
pub struct Problem {
    shape: SliderShape,
    grid: Grid,
    force: f64,
    eta0: f64,
    eta1: f64,
    solver: SolverSettings,
    stencil: Stencil,
    v1: f64,
}

impl Problem {
    pub fn new(
        shape: SliderShape,
        grid: Grid,
        force: f64,
        eta0: f64,
        eta1: f64,
        solver: SolverSettings,
    ) -> Result<Self> {
        if !(force > 0.0 && force.is_finite()) {
            return Err(Error::param("force", "must be > 0"));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::param("eta0", "must be > 0"));
        }
        if !eta1.is_finite() {
            return Err(Error::param("eta1", "must be finite"));
        }
        if !(solver.omega > 0.0 && solver.omega < 2.0) {
            return Err(Error::param("omega", "must lie in ]0, 2["));
        }
        if !(solver.tol > 0.0) {
            return Err(Error::param("tol", "must be > 0"));
        }
        let stencil = Stencil::new(&grid, &shape)?;
        let v1 = compute_v1(&shape, &grid);
        Ok(Self {
            shape,
            grid,
            force,
            eta0,
            eta1,
            solver,
            stencil,
            v1,
        })
    }

    pub fn shape(&self) -> &SliderShape {
        &self.shape
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn force(&self) -> f64 {
        self.force
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn solver(&self) -> &SolverSettings {
        &self.solver
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn max_iter(&self) -> usize {
        self.solver.max_iter.unwrap_or(50 * self.grid.len())
    }

    /// Copy with a different initial state.
    pub fn with_initial(&self, eta0: f64, eta1: f64) -> Result<Self> {
        if !(eta0 > 0.0) {
            return Err(Error::param("eta0", "must be > 0"));
        }
        Ok(Self {
            eta0,
            eta1,
            ..self.clone()
        })
    }

    pub fn with_force(&self, force: f64) -> Result<Self> {
        if !(force > 0.0) {
            return Err(Error::param("force", "must be > 0"));
        }
        Ok(Self {
            force,
            ..self.clone()
        })
    }

    pub fn with_solver(&self, solver: SolverSettings) -> Self {
        Self {
            solver,
            ..self.clone()
        }
    }

    pub fn assemble(&self, beta: f64, gamma: f64) -> Result<DiscreteSystem> {
        self.stencil.assemble(beta, gamma)
    }

    /// Constructive `c1 = |h0|_inf |Omega| / sqrt(lambda1)`, so that
    /// `G(beta, gamma) <= c1 / beta^3 - F` for `gamma >= 0`.
    pub fn c1(&self) -> f64 {
        let d = &self.grid.domain;
        self.shape.max_height(d) * d.area() / d.first_dirichlet_eigenvalue().sqrt()
    }
}

/// `G(beta, gamma) = int q - F` with `q` the film pressure at clearance
/// `beta` and squeeze velocity `gamma`.
pub fn eval_g(
    problem: &Problem,
    beta: f64,
    gamma: f64,
    warm_start: Option<&PressureField>,
) -> Result<(f64, PressureField)> {
    let system = problem.assemble(beta, gamma)?;
    let field = solve_vi_psor(
        &system,
        problem.solver.omega,
        problem.solver.tol,
        problem.max_iter(),
        warm_start,
    )?;
    let g = load_integral(&field, &problem.grid) - problem.force;
    Ok((g, field))
}

/// `E1 = gamma^2 / 2 + F beta` and `E2 = E1 + c1 / (2 beta^2)`.
pub fn energies(eta: f64, eta_dot: f64, c1: f64, force: f64) -> (f64, f64) {
    let e1 = 0.5 * eta_dot * eta_dot + force * eta;
    (e1, e1 + c1 / (2.0 * eta * eta))
}

/// Computable a priori constants for a problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub v1: f64,
    /// Ceiling on `eta'`.
    pub v2: f64,
    pub c1: f64,
    pub lambda1: f64,
    pub d1: f64,
    /// Ceiling on `eta`.
    pub d2: f64,
    /// `eta' > -v3`.
    pub v3: f64,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub d3: &'static str,
    pub d4: &'static str,
    /// Existence of a stationary state is guaranteed for this exponent.
    pub steady_admissible: Option<bool>,
    /// Global existence with a positive barrier is guaranteed.
    pub global_admissible: Option<bool>,
    pub gradient_kink: bool,
}

const NOT_COMPUTABLE: &str = "not computable (non-constructive constants c3, c4, beta0)";

pub fn bounds_report(problem: &Problem) -> BoundsReport {
    let f = problem.force;
    let (eta0, eta1) = (problem.eta0, problem.eta1);
    let v1 = problem.v1;
    let v2 = (eta1 + 1.0).max(v1);
    let c1 = problem.c1();
    let d1 = (c1 / f).cbrt();
    // c1 / (2 d1^2) = c1^(1/3) F^(2/3) / 2, finite also when c1 = 0
    let barrier_at_d1 = 0.5 * c1.cbrt() * f.powf(2.0 / 3.0);
    let d2 = 2.0
        * eta0
            .max(d1)
            .max((0.5 * eta1 * eta1 + f * eta0 + c1 / (2.0 * eta0 * eta0)) / f)
            .max((0.5 * v2 * v2 + f * d1 + barrier_at_d1) / f);
    let v3 = (1.0 - eta1)
        .max(2.0 * (2.0 * f * d2).sqrt())
        .max(2.0 * (eta1 * eta1 + 2.0 * f * eta0).sqrt());
    let (s1, s2, steady, global) = match *problem.shape() {
        SliderShape::LineContact { alpha } => (
            Some(2.0 * (1.0 - 1.0 / alpha)),
            Some(2.0 - 3.0 / alpha),
            Some(alpha > 1.0),
            Some(alpha >= 1.5),
        ),
        SliderShape::PointContact { alpha } => (
            Some(2.0 - 3.0 / alpha),
            Some(2.0 - 4.0 / alpha),
            Some(alpha > 1.5),
            Some(alpha >= 2.0),
        ),
        SliderShape::Flat => (None, None, Some(false), Some(false)),
        SliderShape::Tabulated(_) => (None, None, None, None),
    };
    BoundsReport {
        v1,
        v2,
        c1,
        lambda1: problem.grid.domain.first_dirichlet_eigenvalue(),
        d1,
        d2,
        v3,
        s1,
        s2,
        d3: NOT_COMPUTABLE,
        d4: NOT_COMPUTABLE,
        steady_admissible: steady,
        global_admissible: global,
        gradient_kink: problem.shape.has_kink(),
    }
}

/// One check of `G(beta, gamma) >= F_S - gamma d - F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub gamma: f64,
    pub g: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Spring force and damping coefficient of the film on a sub-region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpringDamper {
    pub beta: f64,
    /// `int_U q1`, the wedge pressure on `U` with zero boundary data.
    pub spring: f64,
    /// `int_U q2`, the unit-squeeze pressure on `U` with zero boundary data.
    pub damping: f64,
    /// Grid nodes inside `U`.
    pub nodes: usize,
    pub checks: Vec<LowerBoundCheck>,
}

impl SpringDamper {
    pub fn lower_bound(&self, gamma: f64, force: f64) -> f64 {
        self.spring - gamma * self.damping - force
    }

    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Absolute slack allowed in the lower-bound verdicts.
pub const LOWER_BOUND_SLACK: f64 = 1e-6;

pub fn spring_damper_decomposition(
    problem: &Problem,
    beta: f64,
    region: &ContactBox,
) -> Result<SpringDamper> {
    spring_damper_with_checks(problem, beta, region, &[0.0, -0.5, -1.0])
}

/// As [`spring_damper_decomposition`], checking the lower bound at the
/// given squeeze velocities.
pub fn spring_damper_with_checks(
    problem: &Problem,
    beta: f64,
    region: &ContactBox,
    gammas: &[f64],
) -> Result<SpringDamper> {
    let full = problem.assemble(beta, 0.0)?;
    let grid = problem.grid();
    let nodes = full.grid_nodes().to_vec();
    let sub = full.restrict(|i| region.contains(grid.node(nodes[i])));
    let (spring, damping) = if sub.is_empty() {
        (0.0, 0.0)
    } else {
        let max_iter = 20 * sub.len() + 100;
        let q1 = solve_linear(&sub, Some(sub.wedge_load()), 1e-13, max_iter)?;
        let q2 = solve_linear(&sub, Some(&sub.unit_load()), 1e-13, max_iter)?;
        (load_integral(&q1, grid), load_integral(&q2, grid))
    };
    let mut out = SpringDamper {
        beta,
        spring,
        damping,
        nodes: sub.len(),
        checks: Vec::new(),
    };
    let mut warm: Option<PressureField> = None;
    for &gamma in gammas {
        let (g, field) = eval_g(problem, beta, gamma, warm.as_ref())?;
        let bound = out.lower_bound(gamma, problem.force);
        out.checks.push(LowerBoundCheck {
            gamma,
            g,
            bound,
            holds: g >= bound - LOWER_BOUND_SLACK,
        });
        warm = Some(field);
    }
    Ok(out)
}

/// Largest difference quotient `|G(beta, a) - G(beta, b)| / |a - b|` over
/// consecutive entries of `gammas`.
pub fn lipschitz_in_gamma(problem: &Problem, beta: f64, gammas: &[f64]) -> Result<f64> {
    let mut values = Vec::with_capacity(gammas.len());
    let mut warm: Option<PressureField> = None;
    for &gamma in gammas {
        let (g, field) = eval_g(problem, beta, gamma, warm.as_ref())?;
        values.push(g);
        warm = Some(field);
    }
    Ok(gammas
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| (y[1] - y[0]).abs() / (x[1] - x[0]).abs())
        .fold(0.0, f64::max))
}

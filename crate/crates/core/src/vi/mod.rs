//! Discrete Reynolds variational inequality.
//!
//! The film pressure solves an obstacle problem over nonnegative functions
//! vanishing on the boundary. After five-point discretization this is a
//! symmetric M-matrix linear complementarity problem, solved here by PSOR;
//! the unconstrained auxiliary problems go through conjugate gradients.

mod linear;
mod psor;
mod system;

use serde::Serialize;

pub use linear::solve_linear;
pub use psor::solve_vi_psor;
pub use system::{assemble_system, DiscreteSystem, Stencil};

use crate::geometry::Grid;

/// Nodal pressures on the unknowns of a [`DiscreteSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub values: Vec<f64>,
    /// `max_i |min(p_i, (Ap - b)_i)|`.
    pub residual_comp: f64,
    /// Constraint violation: `max(-p_i, -(Ap - b)_i, 0)` for PSOR output,
    /// `max |Ap - rhs|` for linear solves.
    pub residual_lin: f64,
    pub iterations: usize,
}

impl PressureField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            residual_comp: 0.0,
            residual_lin: 0.0,
            iterations: 0,
        }
    }

    pub fn max_abs_diff(&self, other: &PressureField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Riemann sum `sum_i p_i dx dy`; boundary nodes carry no pressure.
pub fn load_integral(field: &PressureField, grid: &Grid) -> f64 {
    field.values.iter().sum::<f64>() * grid.cell_area()
}

/// Complementarity summary of a candidate pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplementarityReport {
    pub residual: f64,
    /// Nodes with `p_i = 0` (cavitated).
    pub active: usize,
    pub free: usize,
}

impl ComplementarityReport {
    pub fn active_fraction(&self) -> f64 {
        let n = self.active + self.free;
        if n == 0 {
            0.0
        } else {
            self.active as f64 / n as f64
        }
    }
}

pub fn complementarity_report(
    field: &PressureField,
    system: &DiscreteSystem,
) -> crate::Result<ComplementarityReport> {
    if field.values.len() != system.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: system.len(),
            actual: field.values.len(),
        });
    }
    let (residual, _) = complementarity_residuals(system, &field.values);
    let active = field.values.iter().filter(|&&p| p == 0.0).count();
    Ok(ComplementarityReport {
        residual,
        active,
        free: field.values.len() - active,
    })
}

/// Returns `(max |min(p, Ap - b)|, max violation of p >= 0 and Ap - b >= 0)`.
pub(crate) fn complementarity_residuals(system: &DiscreteSystem, p: &[f64]) -> (f64, f64) {
    let r = system.residual(p);
    let mut comp: f64 = 0.0;
    let mut feas: f64 = 0.0;
    for (&p, &r) in p.iter().zip(&r) {
        comp = comp.max(p.min(r).abs());
        feas = feas.max(-p).max(-r);
    }
    (comp, feas)
}

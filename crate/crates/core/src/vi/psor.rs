use crate::error::{Error, Result};

use super::system::DiscreteSystem;
use super::{complementarity_residuals, PressureField};

/// Solves the complementarity problem `p >= 0, Ap - b >= 0, p.(Ap - b) = 0`
/// by projected successive over-relaxation.
///
/// Nodes are swept in index order. The iteration stops once the largest
/// nodal update is below `tol * max(1, |p|_inf)` and the complementarity
/// residual is below `10 tol`.
pub fn solve_vi_psor(
    system: &DiscreteSystem,
    omega: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&PressureField>,
) -> Result<PressureField> {
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::param("omega", format!("must lie in ]0, 2[, got {omega}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let n = system.len();
    let mut p = match warm_start {
        Some(w) if w.values.len() == n => w.values.iter().map(|v| v.max(0.0)).collect(),
        Some(w) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: w.values.len(),
            })
        }
        None => vec![0.0; n],
    };
    let diag = system.diag();
    let load = system.load();
    let links = system.links();

    let mut update = f64::INFINITY;
    let mut comp = f64::INFINITY;
    for iter in 1..=max_iter {
        update = 0.0;
        let mut pmax: f64 = 0.0;
        for i in 0..n {
            let mut s = load[i];
            for l in &links[i] {
                if l.weight != 0.0 {
                    s += l.weight * p[l.node as usize];
                }
            }
            let old = p[i];
            let new = (old + omega * (s / diag[i] - old)).max(0.0);
            update = update.max((new - old).abs());
            pmax = pmax.max(new);
            p[i] = new;
        }
        if update <= tol * pmax.max(1.0) {
            let (c, feas) = complementarity_residuals(system, &p);
            comp = c;
            if c <= 10.0 * tol {
                return Ok(PressureField {
                    values: p,
                    residual_comp: c,
                    residual_lin: feas,
                    iterations: iter,
                });
            }
        }
    }
    let (c, feas) = complementarity_residuals(system, &p);
    if comp.is_infinite() {
        comp = c;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        update,
        residual: comp,
        last: Box::new(PressureField {
            values: p,
            residual_comp: c,
            residual_lin: feas,
            iterations: max_iter,
        }),
    })
}

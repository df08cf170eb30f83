use crate::error::{Error, Result};

use super::system::DiscreteSystem;
use super::{complementarity_residuals, PressureField};

/// Unconstrained solve of `A p = rhs` by conjugate gradients.
///
/// `rhs` defaults to the system load. Converges when the residual 2-norm
/// drops below `tol` times the right-hand side norm; the returned values
/// may be negative.
pub fn solve_linear(
    system: &DiscreteSystem,
    rhs_override: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<PressureField> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let n = system.len();
    let rhs = rhs_override.unwrap_or(system.load());
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rhs.len(),
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let target = tol * dot(rhs, rhs).sqrt();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while rr.sqrt() > target {
        if iterations == max_iter {
            let field = finish(system, rhs, x, iterations);
            return Err(Error::NoConvergence {
                iterations,
                update: rr.sqrt(),
                residual: field.residual_lin,
                last: Box::new(field),
            });
        }
        system.apply_into(&d, &mut ad);
        let alpha = rr / dot(&d, &ad);
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    Ok(finish(system, rhs, x, iterations))
}

fn finish(system: &DiscreteSystem, rhs: &[f64], x: Vec<f64>, iterations: usize) -> PressureField {
    let ax = system.apply(&x);
    let lin = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let comp = match system.with_load(rhs.to_vec()) {
        Ok(s) => complementarity_residuals(&s, &x).0,
        Err(_) => f64::NAN,
    };
    PressureField {
        values: x,
        residual_comp: comp,
        residual_lin: lin,
        iterations,
    }
}

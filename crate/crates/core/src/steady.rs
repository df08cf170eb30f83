//! Stationary clearances `G(beta, 0) = 0` and the load-capacity curve.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{eval_g, Problem};
use crate::error::{Error, Result};
use crate::geometry::SliderShape;
use crate::vi::{complementarity_report, load_integral, PressureField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyResult {
    pub beta: f64,
    pub g_at_root: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Rejects shapes for which no stationary state is guaranteed.
///
/// Tabulated heights carry no exponent and are let through.
pub fn check_steady_admissible(shape: &SliderShape) -> Result<()> {
    match *shape {
        SliderShape::Flat => Err(Error::InadmissibleShape(
            "no stationary solution for flat slider".into(),
        )),
        SliderShape::LineContact { alpha } if alpha <= 1.0 => Err(Error::InadmissibleShape(
            format!("line contact needs alpha > 1, got {alpha}"),
        )),
        SliderShape::PointContact { alpha } if alpha <= 1.5 => Err(Error::InadmissibleShape(
            format!("point contact needs alpha > 3/2, got {alpha}"),
        )),
        _ => Ok(()),
    }
}

pub const DEFAULT_MAX_EXPANSIONS: usize = 40;

/// Expands geometrically from `beta_init` (halving the lower end, doubling
/// the upper end) until `g(lo) > 0 > g(hi)`.
pub fn find_bracket(problem: &Problem, beta_init: f64, max_expansions: usize) -> Result<(f64, f64)> {
    check_steady_admissible(problem.shape())?;
    if !(beta_init > 0.0 && beta_init.is_finite()) {
        return Err(Error::param("beta_init", "must be > 0"));
    }
    let g = |beta: f64| eval_g(problem, beta, 0.0, None).map(|(g, _)| g);
    let g0 = g(beta_init)?;
    let (mut lo, mut hi) = (beta_init, beta_init);
    if g0 > 0.0 {
        for _ in 0..max_expansions {
            hi *= 2.0;
            if g(hi)? < 0.0 {
                return Ok((lo, hi));
            }
            lo = hi;
        }
    } else {
        for _ in 0..max_expansions {
            lo *= 0.5;
            if g(lo)? > 0.0 {
                return Ok((lo, hi));
            }
            hi = lo;
        }
    }
    Err(Error::BracketFailure {
        expansions: max_expansions,
        lo,
        hi,
    })
}

/// Bisection on a sign-changing bracket until the interval is shorter than
/// `beta_tol` and `|g| <= tol` at the midpoint.
pub fn find_steady(
    problem: &Problem,
    bracket: (f64, f64),
    tol: f64,
    beta_tol: f64,
) -> Result<SteadyResult> {
    check_steady_admissible(problem.shape())?;
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::param("bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    if !(tol > 0.0 && beta_tol > 0.0) {
        return Err(Error::param("tol", "tolerances must be > 0"));
    }
    let warm = problem.solver().warm_start;
    let (g_lo, f_lo) = eval_g(problem, lo, 0.0, None)?;
    let (g_hi, _) = eval_g(problem, hi, 0.0, None)?;
    let mut evaluations = 2;
    if g_lo.abs() <= tol || g_hi.abs() <= tol {
        let (beta, g) = if g_lo.abs() <= g_hi.abs() { (lo, g_lo) } else { (hi, g_hi) };
        return Ok(SteadyResult {
            beta,
            g_at_root: g,
            bracket,
            evaluations,
        });
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::param(
            "bracket",
            format!("no sign change: g({lo}) = {g_lo}, g({hi}) = {g_hi}"),
        ));
    }
    let mut p_lo = f_lo;
    loop {
        let mid = 0.5 * (lo + hi);
        let start = warm.then_some(&p_lo);
        let (g, field) = eval_g(problem, mid, 0.0, start)?;
        evaluations += 1;
        if g.abs() <= tol && hi - lo <= beta_tol {
            return Ok(SteadyResult {
                beta: mid,
                g_at_root: g,
                bracket,
                evaluations,
            });
        }
        if mid <= lo || mid >= hi {
            // interval exhausted in floating point without meeting `tol`
            return Err(Error::NoConvergence {
                iterations: evaluations,
                update: hi - lo,
                residual: g.abs(),
                last: Box::new(field),
            });
        }
        if g > 0.0 {
            lo = mid;
            p_lo = field;
        } else {
            hi = mid;
        }
    }
}

/// One entry of the load-capacity curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub beta: f64,
    pub g: f64,
    pub load: f64,
    pub active_fraction: f64,
    pub psor_iters: usize,
    /// At least four grid cells span the near-contact width `beta^(1/alpha)`.
    pub resolved: bool,
}

/// `g(beta) = G(beta, 0)` for every entry, in order.
///
/// With warm starts the sweep is sequential; otherwise entries are
/// evaluated in parallel. Both give the same rows up to solver tolerance.
pub fn g_curve(problem: &Problem, betas: &[f64]) -> Result<Vec<CurveRow>> {
    if let Some(&b) = betas.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::param("betas", format!("all entries must be > 0, got {b}")));
    }
    let row = |beta: f64, warm: Option<&PressureField>| -> Result<(CurveRow, PressureField)> {
        let system = problem.assemble(beta, 0.0)?;
        let (g, field) = eval_g(problem, beta, 0.0, warm)?;
        let rep = complementarity_report(&field, &system)?;
        let r = CurveRow {
            beta,
            g,
            load: load_integral(&field, problem.grid()),
            active_fraction: rep.active_fraction(),
            psor_iters: field.iterations,
            resolved: resolved(problem, beta),
        };
        Ok((r, field))
    };
    if problem.solver().warm_start {
        let mut out = Vec::with_capacity(betas.len());
        let mut prev: Option<PressureField> = None;
        for &beta in betas {
            let (r, field) = row(beta, prev.as_ref())?;
            out.push(r);
            prev = Some(field);
        }
        Ok(out)
    } else {
        betas.par_iter().map(|&b| row(b, None).map(|(r, _)| r)).collect()
    }
}

fn resolved(problem: &Problem, beta: f64) -> bool {
    match problem.shape().alpha() {
        Some(alpha) => beta.powf(1.0 / alpha) / problem.grid().spacing() >= 4.0,
        None => true,
    }
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "beta,g,load,active_fraction,psor_iters,resolved")?;
    for r in rows {
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{},{}",
            r.beta, r.g, r.load, r.active_fraction, r.psor_iters, r.resolved
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SolverSettings;
    use crate::geometry::{build_grid, DomainRect};

    fn problem(shape: SliderShape, n: usize, force: f64) -> Problem {
        let g = build_grid(DomainRect::centered_square(1.0).unwrap(), n, n).unwrap();
        let solver = SolverSettings {
            omega: 1.85,
            tol: 1e-11,
            ..Default::default()
        };
        Problem::new(shape, g, force, 1.0, 0.0, solver).unwrap()
    }

    #[test]
    fn flat_and_inadmissible_shapes_are_rejected() {
        let p = problem(SliderShape::Flat, 7, 1.0);
        match find_bracket(&p, 0.5, 10) {
            Err(Error::InadmissibleShape(msg)) => {
                assert_eq!(msg, "no stationary solution for flat slider")
            }
            other => panic!("{other:?}"),
        }
        assert!(find_steady(&p, (0.1, 1.0), 1e-6, 1e-6).is_err());
        let p = problem(SliderShape::line(1.0).unwrap(), 7, 1.0);
        assert!(matches!(find_bracket(&p, 0.5, 10), Err(Error::InadmissibleShape(_))));
        let p = problem(SliderShape::point(1.5).unwrap(), 7, 1.0);
        assert!(matches!(find_bracket(&p, 0.5, 10), Err(Error::InadmissibleShape(_))));
        assert!(check_steady_admissible(&SliderShape::point(1.6).unwrap()).is_ok());
    }

    #[test]
    fn bracket_and_root_for_line_contact() {
        let p = problem(SliderShape::line(2.0).unwrap(), 31, 1.0);
        let (lo, hi) = find_bracket(&p, 0.5, DEFAULT_MAX_EXPANSIONS).unwrap();
        assert!(lo < hi);
        assert!(eval_g(&p, lo, 0.0, None).unwrap().0 > 0.0);
        assert!(eval_g(&p, hi, 0.0, None).unwrap().0 < 0.0);
        let r = find_steady(&p, (lo, hi), 1e-7, 1e-9).unwrap();
        assert!(r.g_at_root.abs() <= 1e-7);
        assert!(lo < r.beta && r.beta < hi);
        assert_eq!(r.bracket, (lo, hi));
        // independent re-evaluation from a cold start
        let g = eval_g(&p, r.beta, 0.0, None).unwrap().0;
        assert!(g.abs() <= 1e-6, "{g}");
    }

    #[test]
    fn sign_change_on_log_grid() {
        let p = problem(SliderShape::line(2.0).unwrap(), 31, 1.0);
        let betas: Vec<f64> = (0..20).map(|k| 1e-3 * 1e4f64.powf(k as f64 / 19.0)).collect();
        let rows = g_curve(&p, &betas).unwrap();
        let changes = rows.windows(2).filter(|w| (w[0].g > 0.0) != (w[1].g > 0.0)).count();
        assert_eq!(changes, 1);
        assert!(rows[0].g > 0.0 && rows[19].g < 0.0);
        assert!(rows.iter().all(|r| r.g > -1.0 - 1e-12));
        assert!(!rows[0].resolved && rows[19].resolved);
    }

    #[test]
    fn upper_bound_beyond_d1() {
        let p = problem(SliderShape::point(2.0).unwrap(), 21, 1.0);
        let d1 = (p.c1() / p.force()).cbrt();
        for beta in [d1 * 1.01, 2.0 * d1, 10.0 * d1] {
            let g = eval_g(&p, beta, 0.0, None).unwrap().0;
            assert!(g < 0.0);
            assert!(g > -1.0 && g <= p.c1() / beta.powi(3) - 1.0);
        }
    }

    #[test]
    fn endpoint_already_a_root() {
        let p = problem(SliderShape::line(2.0).unwrap(), 21, 1.0);
        let (lo, hi) = find_bracket(&p, 0.5, 40).unwrap();
        let r = find_steady(&p, (lo, hi), 1e-9, 1e-10).unwrap();
        let again = find_steady(&p, (r.beta, hi), 1e-6, 1e-6).unwrap();
        assert_eq!(again.beta, r.beta);
        assert_eq!(again.evaluations, 2);
    }

    #[test]
    fn flat_curve_is_minus_force() {
        let p = problem(SliderShape::Flat, 15, 1.5);
        for r in g_curve(&p, &[0.01, 0.5, 3.0]).unwrap() {
            assert_eq!(r.g, -1.5);
            assert_eq!(r.load, 0.0);
            assert_eq!(r.active_fraction, 1.0);
        }
        assert!(g_curve(&p, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn warm_and_cold_sweeps_agree() {
        let p = problem(SliderShape::point(2.5).unwrap(), 21, 1.0);
        let cold = p.with_solver(SolverSettings {
            warm_start: false,
            ..*p.solver()
        });
        let betas = [2.0, 1.0, 0.5, 0.25, 0.1];
        let a = g_curve(&p, &betas).unwrap();
        let b = g_curve(&cold, &betas).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.g - y.g).abs() < 1e-8);
        }
        // parallel evaluation is still reproducible
        assert_eq!(b, g_curve(&cold, &betas).unwrap());
    }

    #[test]
    fn heavier_load_lowers_the_root() {
        let mut roots = Vec::new();
        for f in [0.5, 1.0, 2.0] {
            let p = problem(SliderShape::line(2.0).unwrap(), 21, f);
            let b = find_bracket(&p, 0.5, 40).unwrap();
            roots.push(find_steady(&p, b, 1e-8, 1e-8).unwrap().beta);
        }
        // observed, not guaranteed in general
        assert!(roots[0] > roots[1] && roots[1] > roots[2], "{roots:?}");
    }

    #[test]
    fn curve_csv_layout() {
        let rows = [CurveRow {
            beta: 0.5,
            g: -0.25,
            load: 0.75,
            active_fraction: 0.5,
            psor_iters: 12,
            resolved: true,
        }];
        let mut buf = Vec::new();
        write_curve_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "beta,g,load,active_fraction,psor_iters,resolved\n0.5,-0.25,0.75,0.5,12,true\n"
        );
    }
}

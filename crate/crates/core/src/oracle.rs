//! Reference computations that do not go through the production solvers:
//! closed forms for the flat slider, brute-force complementarity and the
//! comparison principle.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::ode::{integrate, ForceSample, Method, RawSample, StepControl, Termination};
use crate::dynamics::{eval_g, Problem, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{ContactBox, DomainRect, Grid};
use crate::vi::{solve_linear, DiscreteSystem, PressureField};

/// Truncated series with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub cutoff: usize,
}

/// `C = int w` with `-Laplace w = 1`, `w = 0` on the boundary of a
/// `L1 x L2` rectangle, summed over odd modes `m, n <= cutoff`:
///
/// `C = sum 64 L1^3 L2^3 / (pi^6 m^2 n^2 (m^2 L2^2 + n^2 L1^2))`.
///
/// All terms are positive; with `m^2 L2^2 + n^2 L1^2 >= 2 m n L1 L2` the
/// tail is bounded by `32 (L1 L2)^2 / pi^6 * 2 S T` with `S = sum 1/m^3`
/// over odd `m` and `T <= 1 / (4 K^2)` the odd tail beyond the cutoff `K`.
pub fn flat_c_omega(domain: &DomainRect, cutoff: usize) -> SeriesValue {
    let cutoff = cutoff.max(1);
    let (l1, l2) = (domain.len1(), domain.len2());
    let pref = 64.0 * (l1 * l2).powi(3) / PI.powi(6);
    let (a, b) = (l2 * l2, l1 * l1);
    let mut sum = 0.0;
    // accumulate smallest terms last per row for a stable sum
    for m in (0..cutoff.div_ceil(2)).rev().map(|k| 2 * k + 1) {
        let mf = (m * m) as f64;
        let mut row = 0.0;
        for n in (0..cutoff.div_ceil(2)).rev().map(|k| 2 * k + 1) {
            let nf = (n * n) as f64;
            row += 1.0 / (mf * nf * (mf * a + nf * b));
        }
        sum += row;
    }
    let odd_zeta3 = 7.0 / 8.0 * 1.202_056_903_159_594_2;
    let k = cutoff as f64;
    let tail = 32.0 * (l1 * l2).powi(2) / PI.powi(6) * 2.0 * odd_zeta3 / (4.0 * k * k);
    SeriesValue {
        value: pref * sum,
        tail_bound: tail,
        cutoff,
    }
}

/// Same constant from the single series obtained by separating `w` into
/// the one-dimensional profile `x (L1 - x) / 2` plus a harmonic correction:
///
/// `C = L1^3 L2 / 12 - 16 L1^4 / pi^5 sum_{m odd} tanh(m pi L2 / (2 L1)) / m^5`.
pub fn flat_c_omega_single_series(domain: &DomainRect, terms: usize) -> f64 {
    let (l1, l2) = (domain.len1(), domain.len2());
    let mut s = 0.0;
    for m in (0..terms.max(1)).rev().map(|k| 2 * k + 1) {
        let mf = m as f64;
        s += (mf * PI * l2 / (2.0 * l1)).tanh() / mf.powi(5);
    }
    l1.powi(3) * l2 / 12.0 - 16.0 * l1.powi(4) / PI.powi(5) * s
}

/// Flat slider: `eta'' = C (eta')^- / eta^3 - F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatModel {
    pub c_omega: f64,
    pub force: f64,
}

/// Lower envelope `eta(t) >= a / sqrt(t + b)` for `t >= t0`, with the free
/// flight `-F t^2 / 2 + eta1 t + eta0` on `[0, t0]` when `eta1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatEnvelope {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    /// Apex height `eta0 + eta1^2 / 2F` (equals `eta0` when `eta1 <= 0`).
    pub eta_hat0: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub force: f64,
}

impl FlatEnvelope {
    pub fn lower(&self, t: f64) -> f64 {
        if t < self.t0 {
            -0.5 * self.force * t * t + self.eta1 * t + self.eta0
        } else {
            self.a / (t + self.b).sqrt()
        }
    }
}

impl FlatModel {
    pub fn new(c_omega: f64, force: f64) -> Result<Self> {
        if !(c_omega > 0.0) {
            return Err(Error::param("c_omega", "must be > 0"));
        }
        if !(force > 0.0) {
            return Err(Error::param("force", "must be > 0"));
        }
        Ok(Self { c_omega, force })
    }

    pub fn for_domain(domain: &DomainRect, force: f64, cutoff: usize) -> Result<Self> {
        Self::new(flat_c_omega(domain, cutoff).value, force)
    }

    pub fn accel(&self, eta: f64, eta_dot: f64) -> f64 {
        self.c_omega * (-eta_dot).max(0.0) / eta.powi(3) - self.force
    }

    pub fn envelope(&self, eta0: f64, eta1: f64) -> FlatEnvelope {
        let (c, f) = (self.c_omega, self.force);
        let a = (c / (2.0 * f)).sqrt();
        if eta1 <= 0.0 {
            FlatEnvelope {
                a,
                b: (c / (eta0 * eta0) - 2.0 * eta1) / (2.0 * f),
                t0: 0.0,
                eta_hat0: eta0,
                eta0,
                eta1,
                force: f,
            }
        } else {
            let t0 = eta1 / f;
            let hat = eta0 + eta1 * eta1 / (2.0 * f);
            FlatEnvelope {
                a,
                b: c / (2.0 * f * hat * hat) - t0,
                t0,
                eta_hat0: hat,
                eta0,
                eta1,
                force: f,
            }
        }
    }
}

/// Integrates the scalar flat-slider equation without any film solve.
///
/// For `eta1 > 0` the free flight up to the apex `t0 = eta1 / F` is
/// emitted in closed form, and the descent is integrated from the apex.
pub fn flat_reference_trajectory(
    model: &FlatModel,
    eta0: f64,
    eta1: f64,
    t_end: f64,
    fine_tol: f64,
) -> Result<Trajectory> {
    if !(eta0 > 0.0) {
        return Err(Error::NonPositiveClearance(eta0));
    }
    let f = model.force;
    let sample = |t: f64, eta: f64, eta_dot: f64| {
        let g = model.accel(eta, eta_dot);
        RawSample {
            t,
            eta,
            eta_dot,
            force: ForceSample {
                g,
                load: g + f,
                iterations: 0,
            },
        }
    };
    let mut raw = Vec::new();
    let (mut t_start, mut start) = (0.0, (eta0, eta1));
    if eta1 > 0.0 {
        let t0 = eta1 / f;
        let t_arc = t0.min(t_end);
        const ARC_SAMPLES: usize = 64;
        for k in 0..=ARC_SAMPLES {
            let t = t_arc * k as f64 / ARC_SAMPLES as f64;
            raw.push(sample(t, -0.5 * f * t * t + eta1 * t + eta0, eta1 - f * t));
        }
        if t0 >= t_end {
            return Ok(Trajectory::from_raw(raw, Termination::ReachedHorizon, f, 0.0));
        }
        t_start = t0;
        start = (eta0 + eta1 * eta1 / (2.0 * f), 0.0);
        raw.pop();
    }
    let control = StepControl {
        method: Method::DormandPrince45,
        rel_tol: fine_tol,
        abs_tol: fine_tol * 1e-3,
        eps_contact: 0.0,
        max_samples: usize::MAX,
        max_step: None,
    };
    let mut rhs = |eta: f64, eta_dot: f64| {
        let g = model.accel(eta, eta_dot);
        Ok(ForceSample {
            g,
            load: g + f,
            iterations: 0,
        })
    };
    let (tail, term) = integrate(&mut rhs, start.0, start.1, t_end - t_start, &control)?;
    raw.extend(tail.into_iter().map(|mut s| {
        s.t += t_start;
        s
    }));
    let term = match term {
        Termination::ContactGuard { t } => Termination::ContactGuard { t: t + t_start },
        Termination::StepFailure { t, reason } => Termination::StepFailure {
            t: t + t_start,
            reason,
        },
        other => other,
    };
    Ok(Trajectory::from_raw(raw, term, f, 0.0))
}

/// Largest system size accepted by [`lcp_enumerate`].
pub const ENUMERATION_LIMIT: usize = 16;

/// Solves the complementarity problem by trying every active set.
///
/// Each candidate solves the free block with a dense LU factorization; the
/// candidate with the smallest violation of `p >= 0`, `Ap - b >= 0` is
/// returned. For a positive definite matrix exactly one active set is
/// consistent.
pub fn lcp_enumerate(system: &DiscreteSystem) -> Result<PressureField> {
    let n = system.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(n));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = system.diag()[i];
        for (j, v) in system.off_diagonal(i) {
            a[(i, j)] = v;
        }
    }
    let b = DVector::from_column_slice(system.load());
    let scale = b.amax().max(f64::MIN_POSITIVE);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut p = vec![0.0; n];
        if !free.is_empty() {
            let k = free.len();
            let sub = DMatrix::from_fn(k, k, |r, c| a[(free[r], free[c])]);
            let rhs = DVector::from_fn(k, |r, _| b[free[r]]);
            let Some(sol) = sub.lu().solve(&rhs) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                p[i] = sol[r];
            }
        }
        let w = &a * DVector::from_column_slice(&p) - &b;
        let mut violation: f64 = 0.0;
        for i in 0..n {
            violation = violation.max(-p[i]).max(-w[i]);
            if mask & (1 << i) == 0 {
                violation = violation.max(p[i].abs());
            }
        }
        let violation = violation / scale;
        if best.as_ref().is_none_or(|(v, _)| violation < *v) {
            best = Some((violation, p));
            if violation <= 1e-15 {
                break;
            }
        }
    }
    match best {
        Some((v, p)) if v <= 1e-9 => {
            let (comp, feas) = crate::vi::complementarity_residuals(system, &p);
            Ok(PressureField {
                values: p,
                residual_comp: comp,
                residual_lin: feas,
                iterations: 0,
            })
        }
        _ => Err(Error::NoSolution),
    }
}

/// Grid-aligned block of interior nodes `i_lo..=i_hi`, `j_lo..=j_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubRect {
    pub i_lo: usize,
    pub i_hi: usize,
    pub j_lo: usize,
    pub j_hi: usize,
}

impl SubRect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i_lo..=self.i_hi).contains(&i) && (self.j_lo..=self.j_hi).contains(&j)
    }

    pub fn whole(grid: &Grid) -> Self {
        Self {
            i_lo: 0,
            i_hi: grid.nx - 1,
            j_lo: 0,
            j_hi: grid.ny - 1,
        }
    }
}

/// Sub-domain `U` for the comparison check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Region {
    Block(SubRect),
    Contact(ContactBox),
}

impl Region {
    fn contains(&self, grid: &Grid, k: usize) -> bool {
        match self {
            Region::Block(r) => {
                let (i, j) = grid.ij(k);
                r.contains(i, j)
            }
            Region::Contact(b) => b.contains(grid.node(k)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    /// `min_U (q - r)`.
    pub worst_margin: f64,
    pub threshold: f64,
    pub nodes: usize,
    pub passed: bool,
}

/// Checks that the film pressure `q` dominates on `U` the unconstrained
/// solution `r` of the same operator and load with zero data on the
/// boundary of `U`.
pub fn comparison_check(
    problem: &Problem,
    beta: f64,
    gamma: f64,
    region: &Region,
) -> Result<ComparisonVerdict> {
    let grid = problem.grid();
    if let Region::Block(r) = region {
        if r.i_lo > r.i_hi || r.j_lo > r.j_hi || r.i_hi >= grid.nx || r.j_hi >= grid.ny {
            return Err(Error::param("region", format!("{r:?} is not inside the grid")));
        }
    }
    let system = problem.assemble(beta, gamma)?;
    let (_, q) = eval_g(problem, beta, gamma, None)?;
    let sub = system.restrict(|k| region.contains(grid, k));
    if sub.is_empty() {
        return Err(Error::param("region", "contains no grid node"));
    }
    let r = solve_linear(&sub, None, 1e-14, 50 * sub.len() + 100)?;
    let worst = sub
        .grid_nodes()
        .iter()
        .zip(&r.values)
        .map(|(&k, &rv)| q.values[k] - rv)
        .fold(f64::INFINITY, f64::min);
    let qmax = q.values.iter().cloned().fold(0.0, f64::max);
    let threshold = -10.0 * problem.solver().tol * qmax.max(1.0);
    Ok(ComparisonVerdict {
        worst_margin: worst,
        threshold,
        nodes: sub.len(),
        passed: worst >= threshold,
    })
}

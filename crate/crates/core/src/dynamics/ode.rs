//! Adaptive integrators for `eta'' = G(eta, eta')`.
//!
//! Each right-hand-side evaluation may run a full obstacle solve, so both
//! methods reuse the final stage of an accepted step as the first stage of
//! the next one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Force evaluation at a state, with bookkeeping for the trajectory record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    /// `G(eta, eta')`.
    pub g: f64,
    /// `int p dx`.
    pub load: f64,
    pub iterations: usize,
}

/// Source of the acceleration `G(eta, eta')`.
pub trait ForceModel {
    fn force(&mut self, eta: f64, eta_dot: f64) -> Result<ForceSample>;
}

impl<F> ForceModel for F
where
    F: FnMut(f64, f64) -> Result<ForceSample>,
{
    fn force(&mut self, eta: f64, eta_dot: f64) -> Result<ForceSample> {
        self(eta, eta_dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explicit Dormand-Prince 5(4) pair.
    #[default]
    DormandPrince45,
    /// Linearly implicit Rosenbrock 2(3) pair (L-stable) with a
    /// finite-difference Jacobian; for strongly damped runs.
    Rosenbrock23,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Heights at or below this end the run with a contact guard.
    pub eps_contact: f64,
    /// Cap on the number of recorded samples.
    pub max_samples: usize,
    /// Optional cap on the step size.
    pub max_step: Option<f64>,
}

impl StepControl {
    pub fn new(eps_contact: f64) -> Self {
        Self {
            method: Method::DormandPrince45,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            eps_contact,
            max_samples: 1_000_000,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub t: f64,
    pub eta: f64,
    pub eta_dot: f64,
    pub force: ForceSample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedHorizon,
    ContactGuard { t: f64 },
    StepFailure { t: f64, reason: String },
}

/// Integrates from `(eta0, eta1)` at `t = 0` to `t_end`, recording every
/// accepted step.
pub fn integrate(
    model: &mut dyn ForceModel,
    eta0: f64,
    eta1: f64,
    t_end: f64,
    control: &StepControl,
) -> Result<(Vec<RawSample>, Termination)> {
    if !(t_end > 0.0) {
        return Err(Error::param("t_end", "must be > 0"));
    }
    if !(eta0 > 0.0) {
        return Err(Error::NonPositiveClearance(eta0));
    }
    if !(control.rel_tol > 0.0 && control.abs_tol > 0.0) {
        return Err(Error::param("tolerances", "must be > 0"));
    }
    let f0 = model.force(eta0, eta1)?;
    let mut samples = vec![RawSample {
        t: 0.0,
        eta: eta0,
        eta_dot: eta1,
        force: f0,
    }];
    if eta0 <= control.eps_contact {
        return Ok((samples, Termination::ContactGuard { t: 0.0 }));
    }
    let mut stepper = Stepper {
        model,
        control,
        dt_min: 1e-12 * t_end,
    };
    let term = match control.method {
        Method::DormandPrince45 => stepper.run_dopri(&mut samples, t_end)?,
        Method::Rosenbrock23 => stepper.run_rosenbrock(&mut samples, t_end)?,
    };
    Ok((samples, term))
}

struct Stepper<'a> {
    model: &'a mut dyn ForceModel,
    control: &'a StepControl,
    dt_min: f64,
}

/// Outcome of a stage evaluation: a clearance that left `]0, inf[` rejects
/// the step rather than failing the run.
enum Stage {
    Ok(ForceSample),
    Outside,
}

impl Stepper<'_> {
    fn eval(&mut self, y: [f64; 2]) -> Result<Stage> {
        if !(y[0] > 0.0) || !y[0].is_finite() || !y[1].is_finite() {
            return Ok(Stage::Outside);
        }
        match self.model.force(y[0], y[1]) {
            Ok(f) => Ok(Stage::Ok(f)),
            Err(Error::NonPositiveClearance(_)) => Ok(Stage::Outside),
            Err(e) => Err(e),
        }
    }

    fn error_norm(&self, err: [f64; 2], y0: [f64; 2], y1: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            let sc = self.control.abs_tol + self.control.rel_tol * y0[i].abs().max(y1[i].abs());
            s += (err[i] / sc).powi(2);
        }
        (s / 2.0).sqrt()
    }

    fn initial_step(&self, y: [f64; 2], f: [f64; 2], t_end: f64) -> f64 {
        let sc = |i: usize| self.control.abs_tol + self.control.rel_tol * y[i].abs();
        let d0 = ((y[0] / sc(0)).powi(2) + (y[1] / sc(1)).powi(2)).sqrt();
        let d1 = ((f[0] / sc(0)).powi(2) + (f[1] / sc(1)).powi(2)).sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        self.clamp_step(h.min(t_end), t_end)
    }

    fn clamp_step(&self, h: f64, remaining: f64) -> f64 {
        let h = match self.control.max_step {
            Some(m) => h.min(m),
            None => h,
        };
        h.min(remaining)
    }

    /// Shared bookkeeping after an accepted step. Returns a termination if
    /// the run must stop.
    fn accept(&self, samples: &mut Vec<RawSample>, s: RawSample) -> Option<Termination> {
        samples.push(s);
        if s.eta <= self.control.eps_contact {
            return Some(Termination::ContactGuard { t: s.t });
        }
        if samples.len() >= self.control.max_samples {
            return Some(Termination::StepFailure {
                t: s.t,
                reason: format!("sample limit {} reached", self.control.max_samples),
            });
        }
        None
    }

    fn run_dopri(&mut self, samples: &mut Vec<RawSample>, t_end: f64) -> Result<Termination> {
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        // difference between the 5th and embedded 4th order weights
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];

        let last = *samples.last().expect("initial sample");
        let mut t = last.t;
        let mut y = [last.eta, last.eta_dot];
        let mut k1 = [y[1], last.force.g];
        let mut h = self.initial_step(y, k1, t_end);
        let mut rejected_last = false;

        while t < t_end {
            let remaining = t_end - t;
            h = self.clamp_step(h, remaining);
            if h < self.dt_min && h < remaining {
                return Ok(Termination::StepFailure {
                    t,
                    reason: format!("step size {h:e} fell below {:e}", self.dt_min),
                });
            }
            let mut k = [[0.0; 2]; 7];
            k[0] = k1;
            let mut outside = false;
            let mut f_new = None;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys[0] += h * a * kj[0];
                        ys[1] += h * a * kj[1];
                    }
                }
                match self.eval(ys)? {
                    Stage::Ok(f) => {
                        k[s] = [ys[1], f.g];
                        if s == 6 {
                            f_new = Some((ys, f));
                        }
                    }
                    Stage::Outside => {
                        outside = true;
                        break;
                    }
                }
            }
            if outside {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            let (y_new, f) = f_new.expect("last stage evaluated");
            let mut err = [0.0; 2];
            for (e, kj) in E.iter().zip(&k) {
                err[0] += h * e * kj[0];
                err[1] += h * e * kj[1];
            }
            let norm = self.error_norm(err, y, y_new);
            let t_new = if h >= remaining { t_end } else { t + h };
            if norm <= 1.0 {
                t = t_new;
                y = y_new;
                k1 = k[6];
                let s = RawSample {
                    t,
                    eta: y[0],
                    eta_dot: y[1],
                    force: f,
                };
                if let Some(term) = self.accept(samples, s) {
                    return Ok(term);
                }
                let mut fac = if norm == 0.0 { 5.0 } else { 0.9 * norm.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                h *= fac;
                rejected_last = false;
            } else {
                h *= (0.9 * norm.powf(-0.2)).max(0.2);
                rejected_last = true;
            }
        }
        Ok(Termination::ReachedHorizon)
    }

    /// Modified Rosenbrock triple of Shampine and Reichelt (ode23s).
    fn run_rosenbrock(&mut self, samples: &mut Vec<RawSample>, t_end: f64) -> Result<Termination> {
        let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
        let e32 = 6.0 + std::f64::consts::SQRT_2;

        let last = *samples.last().expect("initial sample");
        let mut t = last.t;
        let mut y = [last.eta, last.eta_dot];
        let mut f0 = [y[1], last.force.g];
        let mut h = self.initial_step(y, f0, t_end);
        let mut rejected_last = false;
        let mut jac: Option<[f64; 2]> = None;

        while t < t_end {
            let remaining = t_end - t;
            h = self.clamp_step(h, remaining);
            if h < self.dt_min && h < remaining {
                return Ok(Termination::StepFailure {
                    t,
                    reason: format!("step size {h:e} fell below {:e}", self.dt_min),
                });
            }
            // dG/deta, dG/deta' by one-sided differences
            let (ga, gb) = match jac {
                Some([a, b]) => (a, b),
                None => {
                    let de = 1e-6 * y[0].abs().max(1e-8);
                    let dv = 1e-6 * y[1].abs().max(1e-3);
                    let fe = match self.eval([y[0] + de, y[1]])? {
                        Stage::Ok(f) => f.g,
                        Stage::Outside => unreachable!("positive perturbation of a positive height"),
                    };
                    let fv = match self.eval([y[0], y[1] + dv])? {
                        Stage::Ok(f) => f.g,
                        Stage::Outside => unreachable!("height unchanged"),
                    };
                    let j = [(fe - f0[1]) / de, (fv - f0[1]) / dv];
                    jac = Some(j);
                    (j[0], j[1])
                }
            };
            // W = I - h d J with J = [[0, 1], [ga, gb]]
            let hd = h * d;
            let w = [[1.0, -hd], [-hd * ga, 1.0 - hd * gb]];
            let det = w[0][0] * w[1][1] - w[0][1] * w[1][0];
            let solve = |r: [f64; 2]| {
                [
                    (w[1][1] * r[0] - w[0][1] * r[1]) / det,
                    (w[0][0] * r[1] - w[1][0] * r[0]) / det,
                ]
            };
            let k1 = solve(f0);
            let y1 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
            let f1 = match self.eval(y1)? {
                Stage::Ok(f) => [y1[1], f.g],
                Stage::Outside => {
                    h *= 0.25;
                    rejected_last = true;
                    continue;
                }
            };
            let s2 = solve([f1[0] - k1[0], f1[1] - k1[1]]);
            let k2 = [s2[0] + k1[0], s2[1] + k1[1]];
            let y_new = [y[0] + h * k2[0], y[1] + h * k2[1]];
            let (f2, force) = match self.eval(y_new)? {
                Stage::Ok(f) => ([y_new[1], f.g], f),
                Stage::Outside => {
                    h *= 0.25;
                    rejected_last = true;
                    continue;
                }
            };
            let k3 = solve([
                f2[0] - e32 * (k2[0] - f1[0]) - 2.0 * (k1[0] - f0[0]),
                f2[1] - e32 * (k2[1] - f1[1]) - 2.0 * (k1[1] - f0[1]),
            ]);
            let err = [
                h / 6.0 * (k1[0] - 2.0 * k2[0] + k3[0]),
                h / 6.0 * (k1[1] - 2.0 * k2[1] + k3[1]),
            ];
            let norm = self.error_norm(err, y, y_new);
            let t_new = if h >= remaining { t_end } else { t + h };
            if norm <= 1.0 {
                t = t_new;
                y = y_new;
                f0 = f2;
                jac = None;
                let s = RawSample {
                    t,
                    eta: y[0],
                    eta_dot: y[1],
                    force,
                };
                if let Some(term) = self.accept(samples, s) {
                    return Ok(term);
                }
                let mut fac = if norm == 0.0 {
                    5.0
                } else {
                    0.8 * norm.powf(-1.0 / 3.0)
                };
                fac = fac.clamp(0.2, 5.0);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                h *= fac;
                rejected_last = false;
            } else {
                h *= (0.8 * norm.powf(-1.0 / 3.0)).max(0.2);
                rejected_last = true;
            }
        }
        Ok(Termination::ReachedHorizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(k: f64, c: f64) -> impl FnMut(f64, f64) -> Result<ForceSample> {
        move |x: f64, v: f64| {
            Ok(ForceSample {
                g: -k * (x - 1.0) - c * v,
                load: 0.0,
                iterations: 0,
            })
        }
    }

    #[test]
    fn free_fall_is_exact() {
        for method in [Method::DormandPrince45, Method::Rosenbrock23] {
            let mut m = |_: f64, _: f64| {
                Ok(ForceSample {
                    g: -2.0,
                    load: 0.0,
                    iterations: 0,
                })
            };
            let ctl = StepControl {
                method,
                ..StepControl::new(1e-6)
            };
            let (s, term) = integrate(&mut m, 3.0, 1.0, 1.5, &ctl).unwrap();
            assert_eq!(term, Termination::ReachedHorizon);
            for x in &s {
                let exact = 3.0 + x.t - x.t * x.t;
                assert!((x.eta - exact).abs() < 1e-9, "{method:?}: {} vs {exact}", x.eta);
            }
            assert_eq!(s.last().unwrap().t, 1.5);
        }
    }

    #[test]
    fn damped_oscillator_converges_with_order() {
        // x'' = -(x - 1) - 0.5 x', x(0) = 2, x'(0) = 0
        let exact = |t: f64| {
            let w = (1.0f64 - 0.0625).sqrt();
            let a = 1.0;
            let b = 0.25 / w;
            1.0 + (-0.25 * t).exp() * (a * (w * t).cos() + b * (w * t).sin())
        };
        for method in [Method::DormandPrince45, Method::Rosenbrock23] {
            let mut errs = Vec::new();
            for tol in [1e-5, 1e-8] {
                let ctl = StepControl {
                    method,
                    rel_tol: tol,
                    abs_tol: tol,
                    ..StepControl::new(1e-9)
                };
                let (s, _) = integrate(&mut oscillator(1.0, 0.5), 2.0, 0.0, 10.0, &ctl).unwrap();
                let e = s
                    .iter()
                    .map(|x| (x.eta - exact(x.t)).abs())
                    .fold(0.0, f64::max);
                errs.push(e);
            }
            assert!(errs[1] < errs[0] / 50.0, "{method:?}: {errs:?}");
            assert!(errs[1] < 1e-5, "{method:?}: {errs:?}");
        }
    }

    #[test]
    fn rosenbrock_takes_large_steps_on_stiff_damping() {
        let c = 1e4;
        let ctl = |method| StepControl {
            method,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            ..StepControl::new(1e-9)
        };
        let (explicit, _) =
            integrate(&mut oscillator(1.0, c), 2.0, 0.0, 20.0, &ctl(Method::DormandPrince45)).unwrap();
        let (implicit, _) =
            integrate(&mut oscillator(1.0, c), 2.0, 0.0, 20.0, &ctl(Method::Rosenbrock23)).unwrap();
        assert!(implicit.len() * 20 < explicit.len(), "{} vs {}", implicit.len(), explicit.len());
        let a = explicit.last().unwrap().eta;
        let b = implicit.last().unwrap().eta;
        assert!((a - b).abs() < 1e-4 * a, "{a} vs {b}");
    }

    #[test]
    fn contact_guard_fires() {
        let mut m = |_: f64, _: f64| {
            Ok(ForceSample {
                g: -1.0,
                load: 0.0,
                iterations: 0,
            })
        };
        let (s, term) = integrate(&mut m, 0.5, 0.0, 10.0, &StepControl::new(1e-3)).unwrap();
        match term {
            Termination::ContactGuard { t } => {
                assert!(t > 0.99 && t < 1.0);
                assert!(s.last().unwrap().eta <= 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_limit_is_step_failure() {
        let ctl = StepControl {
            max_samples: 5,
            ..StepControl::new(1e-9)
        };
        let (s, term) = integrate(&mut oscillator(1.0, 0.1), 2.0, 0.0, 100.0, &ctl).unwrap();
        assert_eq!(s.len(), 5);
        assert!(matches!(term, Termination::StepFailure { .. }));
    }

    #[test]
    fn times_strictly_increase() {
        let (s, _) = integrate(&mut oscillator(4.0, 0.3), 2.0, 1.0, 7.0, &StepControl::new(1e-9)).unwrap();
        assert!(s.windows(2).all(|w| w[1].t > w[0].t));
    }
}

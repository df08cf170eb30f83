//! Subcommand dispatch and artifact writing.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use slider_core::dynamics::{bounds_report, integrate_trajectory, BoundsReport, Problem, Termination};
use slider_core::geometry::{build_grid, compute_v1, SliderShape};
use slider_core::oracle::{
    comparison_check, flat_c_omega, flat_c_omega_single_series, flat_reference_trajectory,
    lcp_enumerate, FlatModel, Region, SubRect,
};
use slider_core::steady::{find_bracket, find_steady, g_curve, write_curve_csv};
use slider_core::vi::{assemble_system, load_integral, solve_linear, solve_vi_psor};
use slider_core::Error;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
/// Contact guard, bracket failure, inadmissible shape, failed checks.
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Steady,
    Gcurve,
    Bounds,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Steady => "steady",
            Command::Gcurve => "gcurve",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
        }
    }
}

/// Result of one dispatch: exit status, the JSON document echoed on
/// stdout, and the files written.
#[derive(Debug)]
pub struct Outcome {
    pub exit: i32,
    pub report: Value,
    pub files: Vec<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } => EXIT_SOLVER,
        Error::InvalidDomain(_)
        | Error::TooCoarse { .. }
        | Error::InvalidShape(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::Io(_)
        | Error::Csv(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidDomain(_) => "invalid_domain",
        Error::TooCoarse { .. } => "too_coarse",
        Error::OutOfDomain { .. } => "out_of_domain",
        Error::InvalidShape(_) => "invalid_shape",
        Error::BoxOutsideDomain(_) => "box_outside_domain",
        Error::UnsupportedShape(_) => "unsupported_shape",
        Error::NonPositiveClearance(_) => "non_positive_clearance",
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NoConvergence { .. } => "no_convergence",
        Error::BracketFailure { .. } => "bracket_failure",
        Error::InadmissibleShape(_) => "inadmissible_shape",
        Error::TooLarge(_) => "too_large",
        Error::NoSolution => "no_solution",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
    }
}

pub fn error_report(command: Command, err: &Error) -> Value {
    let reason = match err {
        Error::InadmissibleShape(msg) => msg.clone(),
        other => other.to_string(),
    };
    json!({
        "command": command.name(),
        "status": "error",
        "kind": error_kind(err),
        "reason": reason,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Runs `command`; `base` resolves relative paths inside the config and
/// `out` receives the artifacts.
pub fn dispatch(cfg: &RunConfig, command: Command, base: &Path, out: &Path) -> Outcome {
    let mut files = Vec::new();
    let result = fs::create_dir_all(out)
        .map_err(Error::from)
        .and_then(|_| {
            let p = out.join("config.json");
            write_json(&p, cfg)?;
            files.push(p);
            run(cfg, command, base, out, &mut files)
        });
    match result {
        Ok((exit, report)) => Outcome {
            exit,
            report,
            files,
        },
        Err(err) => {
            let report = error_report(command, &err);
            let p = out.join(format!("{}.json", command.name()));
            if write_json(&p, &report).is_ok() {
                files.push(p);
            }
            Outcome {
                exit: exit_code(&err),
                report,
                files,
            }
        }
    }
}

fn run(
    cfg: &RunConfig,
    command: Command,
    base: &Path,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> slider_core::Result<(i32, Value)> {
    let problem = cfg.build_problem(base)?;
    let json_path = out.join(format!("{}.json", command.name()));
    let (exit, report) = match command {
        Command::Simulate => {
            let (exit, report) = simulate(cfg, &problem, out, files)?;
            (exit, report)
        }
        Command::Steady => {
            let s = &cfg.steady;
            let bracket = find_bracket(&problem, s.beta_init, s.max_expansions)?;
            let r = find_steady(&problem, bracket, s.tol, s.beta_tol)?;
            let mut v = serde_json::to_value(r).map_err(std::io::Error::other)?;
            v["status"] = json!("ok");
            (EXIT_OK, v)
        }
        Command::Gcurve => {
            let rows = g_curve(&problem, &cfg.gcurve.betas)?;
            let p = out.join("gcurve.csv");
            write_curve_csv(&rows, BufWriter::new(fs::File::create(&p)?))?;
            files.push(p);
            let positive = rows.iter().filter(|r| r.g > 0.0).count();
            let report = json!({
                "command": "gcurve",
                "status": "ok",
                "rows": rows.len(),
                "positive": positive,
                "negative": rows.len() - positive,
                "unresolved": rows.iter().filter(|r| !r.resolved).count(),
            });
            return Ok((EXIT_OK, report));
        }
        Command::Bounds => {
            let b = bounds_report(&problem);
            let v = serde_json::to_value(b).map_err(std::io::Error::other)?;
            (EXIT_OK, v)
        }
        Command::Verify => verify(cfg, &problem)?,
    };
    write_json(&json_path, &report)?;
    files.push(json_path);
    Ok((exit, report))
}

fn simulate(
    cfg: &RunConfig,
    problem: &Problem,
    out: &Path,
    files: &mut Vec<PathBuf>,
) -> slider_core::Result<(i32, Value)> {
    let traj = integrate_trajectory(problem, cfg.integrator.t_end, &cfg.step_control())?;
    let p = out.join("trajectory.csv");
    traj.write_csv(BufWriter::new(fs::File::create(&p)?))?;
    files.push(p);
    let b: BoundsReport = bounds_report(problem);
    let margins = json!({
        "v2": b.v2 - traj.max_eta_dot(),
        "d2": b.d2 - traj.max_eta(),
        "v3": traj.min_eta_dot() + b.v3,
    });
    let bounds_hold =
        traj.max_eta_dot() < b.v2 && traj.max_eta() < b.d2 && traj.min_eta_dot() > -b.v3;
    let (status, exit) = match traj.termination {
        Termination::ReachedHorizon => ("ok", EXIT_OK),
        Termination::ContactGuard { .. } => ("contact_guard", EXIT_DOMAIN),
        Termination::StepFailure { .. } => ("step_failure", EXIT_SOLVER),
    };
    let m = &traj.monitor;
    let report = json!({
        "command": "simulate",
        "status": status,
        "termination": traj.termination,
        "samples": traj.samples.len(),
        "t_final": traj.samples.last().map(|s| s.t),
        "eta_min": traj.min_eta(),
        "eta_max": traj.max_eta(),
        "eta_dot_min": traj.min_eta_dot(),
        "eta_dot_max": traj.max_eta_dot(),
        "psor_iterations": traj.samples.iter().map(|s| s.psor_iters).sum::<usize>(),
        "bounds": b,
        "margins": margins,
        "bounds_hold": bounds_hold,
        "energy": {
            "passed": m.passed(),
            "tolerance": m.tolerance,
            "worst_violation": m.worst_violation,
            "violations": m.violations,
            "segments": m.segments.len(),
        },
    });
    Ok((exit, report))
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    threshold: f64,
    detail: String,
}

fn verify(cfg: &RunConfig, problem: &Problem) -> slider_core::Result<(i32, Value)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domain = problem.grid().domain;
    let mut checks = Vec::new();

    // flat-slider constant: double series against the single series
    let series = flat_c_omega(&domain, cfg.oracle.series_cutoff);
    let single = flat_c_omega_single_series(&domain, 5000);
    checks.push(Check {
        name: "c_omega_series",
        passed: (series.value - single).abs() <= series.tail_bound + 1e-12 * single,
        value: (series.value - single).abs(),
        threshold: series.tail_bound,
        detail: format!("series {} single {}", series.value, single),
    });

    // and against the unit-source solve on the configured grid
    let grid = problem.grid();
    let sys = assemble_system(grid, &SliderShape::Flat, 1.0, -1.0)?;
    let w = solve_linear(&sys, Some(&sys.unit_load()), 1e-12, 50 * grid.len() + 100)?;
    let grid_c = load_integral(&w, grid);
    let rel = (grid_c - series.value).abs() / series.value;
    checks.push(Check {
        name: "c_omega_grid",
        passed: rel <= 0.02,
        value: rel,
        threshold: 0.02,
        detail: format!("grid {grid_c} series {}", series.value),
    });

    // film force vanishes above the cutoff velocity
    let mut worst = 0.0f64;
    for beta in [0.1, 1.0] {
        let (g, field) =
            slider_core::dynamics::eval_g(problem, beta, problem.v1() + 0.1, None)?;
        worst = worst.max(load_integral(&field, grid).abs()).max((g + problem.force()).abs());
    }
    checks.push(Check {
        name: "cutoff",
        passed: worst <= 1e-10,
        value: worst,
        threshold: 1e-10,
        detail: format!("v1 {}", problem.v1()),
    });

    // projected SOR against active-set enumeration on tiny grids
    let mut worst = 0.0f64;
    const SIZES: [(usize, usize); 6] = [(3, 3), (3, 4), (4, 3), (4, 4), (3, 5), (5, 3)];
    for _ in 0..cfg.oracle.lcp_cases {
        let (nx, ny) = SIZES[rng.random_range(0..SIZES.len())];
        let g = build_grid(domain, nx, ny)?;
        let shape = match rng.random_range(0..3) {
            0 => SliderShape::line(rng.random_range(1.0..4.0))?,
            1 => SliderShape::point(rng.random_range(1.0..4.0))?,
            _ => SliderShape::Flat,
        };
        let v1 = compute_v1(&shape, &g);
        let beta = rng.random_range(0.05..2.0);
        let gamma = rng.random_range(-2.0..v1 + 1.0);
        let s = assemble_system(&g, &shape, beta, gamma)?;
        let exact = lcp_enumerate(&s)?;
        let psor = solve_vi_psor(&s, 1.3, 1e-14, 1_000_000, None)?;
        worst = worst.max(exact.max_abs_diff(&psor));
    }
    checks.push(Check {
        name: "lcp_enumeration",
        passed: worst <= 1e-9,
        value: worst,
        threshold: 1e-9,
        detail: format!("{} cases", cfg.oracle.lcp_cases),
    });

    // film pressure dominates the unconstrained solution on sub-rectangles
    let mut worst: Option<(f64, f64)> = None;
    let mut all = true;
    let (nx, ny) = (grid.nx, grid.ny);
    for _ in 0..cfg.oracle.comparison_regions {
        let i_lo = rng.random_range(0..nx);
        let j_lo = rng.random_range(0..ny);
        let r = SubRect {
            i_lo,
            i_hi: rng.random_range(i_lo..nx),
            j_lo,
            j_hi: rng.random_range(j_lo..ny),
        };
        let beta = rng.random_range(0.05..2.0);
        let gamma = rng.random_range(-2.0..problem.v1() + 1.0);
        let v = comparison_check(problem, beta, gamma, &Region::Block(r))?;
        all &= v.passed;
        if worst.is_none_or(|(m, _)| v.worst_margin - v.threshold < m) {
            worst = Some((v.worst_margin - v.threshold, v.worst_margin));
        }
    }
    checks.push(Check {
        name: "comparison",
        passed: all,
        value: worst.map_or(0.0, |w| w.1),
        threshold: -10.0 * problem.solver().tol,
        detail: format!("{} regions", cfg.oracle.comparison_regions),
    });

    // flat-slider reference motion stays above its decay envelope
    let model = FlatModel::new(series.value, problem.force())?;
    let (eta0, eta1) = (problem.eta0(), problem.eta1());
    let reference =
        flat_reference_trajectory(&model, eta0, eta1, cfg.integrator.t_end, cfg.oracle.fine_tol)?;
    let env = model.envelope(eta0, eta1);
    let ratio = reference
        .samples
        .iter()
        .map(|s| s.eta / env.lower(s.t))
        .fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "flat_envelope",
        passed: ratio >= 1.0 - 1e-6,
        value: ratio,
        threshold: 1.0 - 1e-6,
        detail: format!("a {} b {} t0 {}", env.a, env.b, env.t0),
    });

    let passed = checks.iter().all(|c| c.passed);
    let report = json!({
        "command": "verify",
        "status": if passed { "ok" } else { "failed" },
        "seed": cfg.seed,
        "passed": passed,
        "checks": checks,
    });
    Ok((if passed { EXIT_OK } else { EXIT_DOMAIN }, report))
}

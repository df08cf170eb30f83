//! Randomized properties of the film solver and the force law.

use proptest::prelude::*;
use slider_core::dynamics::{eval_g, Problem, SolverSettings};
use slider_core::geometry::{build_grid, compute_v1, DomainRect, SliderShape};
use slider_core::oracle::{comparison_check, Region, SubRect};
use slider_core::vi::{assemble_system, complementarity_report, load_integral, solve_vi_psor};

fn shape_strategy() -> impl Strategy<Value = SliderShape> {
    prop_oneof![
        (1.0f64..4.0).prop_map(|a| SliderShape::line(a).unwrap()),
        (1.0f64..4.0).prop_map(|a| SliderShape::point(a).unwrap()),
        Just(SliderShape::Flat),
    ]
}

fn problem(shape: SliderShape, n: usize) -> Problem {
    let grid = build_grid(DomainRect::centered_square(1.0).unwrap(), n, n).unwrap();
    let solver = SolverSettings {
        omega: 1.7,
        tol: 1e-11,
        ..Default::default()
    };
    Problem::new(shape, grid, 1.0, 1.0, 0.0, solver).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psor_output_is_complementary(
        shape in shape_strategy(),
        n in 3usize..12,
        beta in 0.05f64..2.0,
        gamma in -2.0f64..2.0,
    ) {
        let grid = build_grid(DomainRect::centered_square(1.0).unwrap(), n, n).unwrap();
        let s = assemble_system(&grid, &shape, beta, gamma).unwrap();
        let p = solve_vi_psor(&s, 1.5, 1e-12, 1_000_000, None).unwrap();
        prop_assert!(p.values.iter().all(|&v| v >= 0.0));
        let rep = complementarity_report(&p, &s).unwrap();
        let scale = p.values.iter().cloned().fold(1.0, f64::max);
        prop_assert!(rep.residual <= 1e-10 * scale);
        prop_assert!(p.residual_lin <= 1e-9 * scale);
    }

    #[test]
    fn force_exceeds_minus_load(shape in shape_strategy(), beta in 0.01f64..5.0, gamma in -3.0f64..3.0) {
        let p = problem(shape, 9);
        let (g, field) = eval_g(&p, beta, gamma, None).unwrap();
        prop_assert!(g >= -1.0);
        prop_assert_eq!(g, load_integral(&field, p.grid()) - 1.0);
    }

    #[test]
    fn force_is_nonincreasing_in_squeeze_velocity(
        shape in shape_strategy(),
        beta in 0.05f64..2.0,
        gamma in -2.0f64..2.0,
        step in 0.01f64..1.0,
    ) {
        let p = problem(shape, 9);
        let a = eval_g(&p, beta, gamma, None).unwrap().0;
        let b = eval_g(&p, beta, gamma + step, None).unwrap().0;
        prop_assert!(b <= a + 1e-9);
    }

    #[test]
    fn no_pressure_above_cutoff(shape in shape_strategy(), beta in 0.05f64..2.0, extra in 0.0f64..3.0) {
        let grid = build_grid(DomainRect::centered_square(1.0).unwrap(), 11, 11).unwrap();
        let v1 = compute_v1(&shape, &grid);
        let s = assemble_system(&grid, &shape, beta, v1 + extra).unwrap();
        let p = solve_vi_psor(&s, 1.5, 1e-10, 100_000, None).unwrap();
        prop_assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_load_is_linear_in_squeeze(beta in 0.2f64..3.0, gamma in -3.0f64..-0.01) {
        let p = problem(SliderShape::Flat, 9);
        let reference = eval_g(&p, 1.0, -1.0, None).unwrap().0 + 1.0;
        let load = eval_g(&p, beta, gamma, None).unwrap().0 + 1.0;
        let predicted = -gamma * reference / beta.powi(3);
        prop_assert!((load - predicted).abs() <= 1e-8 * predicted.max(1.0));
    }

    #[test]
    fn comparison_holds_on_blocks(
        shape in shape_strategy(),
        corners in (0usize..15, 0usize..15, 0usize..15, 0usize..15),
        beta in 0.05f64..2.0,
        gamma in -2.0f64..2.0,
    ) {
        let p = problem(shape, 15);
        let (a, b, c, d) = corners;
        let r = SubRect { i_lo: a.min(b), i_hi: a.max(b), j_lo: c.min(d), j_hi: c.max(d) };
        let v = comparison_check(&p, beta, gamma, &Region::Block(r)).unwrap();
        prop_assert!(v.passed, "{:?}", v);
    }
}

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riemann_core::solutions::{
    random_damped_params, trace_condition_residual, Coeff, CorruptedField, Family, Layout, PlasticityField,
    PlasticityParams,
};
use riemann_core::algebra::ComplexMatrix;
use riemann_core::systems::{builtin_system, builtin_system_with, parse_expression, BuiltinParams};
use riemann_core::verify::{
    compatibility_residual, det_phi_scan, ode_residual_417, ode_samples, pde_residuals, pde_residuals_with,
    plasticity_tolerances, Grid,
};

fn full_system(params: &PlasticityParams) -> riemann_core::systems::SystemSpec {
    let bp = BuiltinParams { rho: params.rho, potential: parse_expression(&params.potential).unwrap(), a: 1.0 };
    builtin_system_with("plasticity-full", &bp).unwrap()
}

#[test]
fn general_family_solves_full_system() {
    for (seed, v) in [(1, "0"), (2, "x*y*exp(-t)")] {
        let params = random_damped_params(seed, v).unwrap();
        let sys = full_system(&params);
        let field = PlasticityField::new(&params, Layout::Full).unwrap();
        let start = Instant::now();
        let tols = plasticity_tolerances(&sys, 1e-5);
        let report = pde_residuals_with(&sys, &field, &Grid::default(), 1e-5, &tols).unwrap();
        eprintln!("seed {seed}: {:?}\n{report}", start.elapsed());
        assert!(report.pass, "{report}");
        assert_eq!(report.masked, 0);

        let theta = PlasticityField::new(&params, Layout::Theta).unwrap();
        let compat = compatibility_residual(&theta, &Grid::default(), 1e-5).unwrap();
        assert!(compat.pass, "{compat}");
        let ode = ode_residual_417(&params, 0.5, &ode_samples(), 0.0).unwrap();
        assert!(ode <= 1e-8, "ode residual {ode:e}");
    }
}

#[test]
fn ode_residual_examples() {
    let unit = PlasticityParams::default();
    assert!(ode_residual_417(&unit, 0.0, &ode_samples(), 0.0).unwrap() <= 1e-8);
    assert!(ode_residual_417(&unit, 0.0, &ode_samples(), 1e-3).unwrap() > 1e-4);
    let case_i = PlasticityParams { family: Family::CaseI, omega: Coeff::constant(0.6, 0.0), ..PlasticityParams::default() };
    let r = ode_residual_417(&case_i, 0.0, &ode_samples(), 0.0).unwrap();
    assert!((r - 0.3).abs() < 1e-15);
    let flat = PlasticityParams { omega: Coeff::constant(0.0, 0.0), ..case_i };
    assert_eq!(ode_residual_417(&flat, 0.0, &ode_samples(), 0.0).unwrap(), 0.0);
}

#[test]
fn special_cases_solve_reduced_system() {
    let sys = builtin_system("plasticity-reduced").unwrap();
    let case_i = PlasticityParams {
        family: Family::CaseI,
        c1: Coeff::Damped { a: 1.0, s: 0.3, b: 0.4, q: 0.8 },
        c2: Coeff::Damped { a: -0.5, s: 0.5, b: 0.2, q: 1.0 },
        ..PlasticityParams::default()
    };
    let case_ii = PlasticityParams {
        family: Family::CaseII,
        c1: Coeff::Damped { a: 0.7, s: 0.4, b: -0.3, q: 0.6 },
        c2: Coeff::constant(0.0, -0.5),
        c3: Coeff::constant(-0.5, 0.2),
        ..PlasticityParams::default()
    };
    for params in [case_i, case_ii] {
        let field = PlasticityField::new(&params, Layout::Reduced).unwrap();
        let report = pde_residuals(&sys, &field, &Grid::default(), 1e-8).unwrap();
        eprintln!("{}\n{report}", params.family.name());
        assert!(report.pass, "{report}");
        if params.family == Family::CaseII {
            // (0, 0.5) is a grid point at each of the three times.
            assert_eq!(report.masked, 3);
        }
    }
}

#[test]
fn special_cases_corrupted_fail() {
    let sys = builtin_system("plasticity-reduced").unwrap();
    let params = PlasticityParams { family: Family::CaseI, ..PlasticityParams::default() };
    let bad = CorruptedField { inner: PlasticityField::new(&params, Layout::Reduced).unwrap(), component: 3 };
    let report = pde_residuals(&sys, &bad, &Grid::default(), 1e-4).unwrap();
    assert!(!report.pass);
}

#[test]
fn general_family_corrupted_fails() {
    let params = random_damped_params(1, "0").unwrap();
    let sys = full_system(&params);
    let bad = CorruptedField { inner: PlasticityField::new(&params, Layout::Full).unwrap(), component: 2 };
    let tols = plasticity_tolerances(&sys, 1e-4);
    assert!(!pde_residuals_with(&sys, &bad, &Grid::default(), 1e-4, &tols).unwrap().pass);
}

#[test]
fn trace_conditions_vanish_for_general_family() {
    let params = random_damped_params(3, "0").unwrap();
    let sys = builtin_system("plasticity-subsystem").unwrap();
    let field = PlasticityField::new(&params, Layout::Subsystem).unwrap();
    let (one, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let lambda = ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bad = CorruptedField { inner: PlasticityField::new(&params, Layout::Subsystem).unwrap(), component: 2 };
    let mut worst_bad = 0.0f64;
    for _ in 0..20 {
        let p = [rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let tr = trace_condition_residual(&sys, &field, &lambda, p).unwrap();
        let worst = tr.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-6, "trace {worst:e} at {p:?}");
        let tr = trace_condition_residual(&sys, &bad, &lambda, p).unwrap();
        worst_bad = worst_bad.max(tr.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    assert!(worst_bad > 1e-3);
}

#[test]
fn det_phi_is_one_for_constant_wave_vectors() {
    let params = random_damped_params(4, "0").unwrap();
    let field = PlasticityField::new(&params, Layout::Subsystem).unwrap();
    let (one, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let lambda = ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]]).unwrap();
    let d = vec![ComplexMatrix::zeros(4, 2); 2];
    let rep = det_phi_scan(&field, &lambda, &d, &Grid::default()).unwrap();
    assert!(rep.max_dev_from_one <= 1e-12);
    assert!(rep.flagged.is_empty());
}

#[test]
fn fields_are_real_and_divergence_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let families = [
        random_damped_params(6, "0").unwrap(),
        PlasticityParams { family: Family::CaseI, c1: Coeff::constant(0.4, -0.8), ..PlasticityParams::default() },
        PlasticityParams {
            family: Family::CaseII,
            c1: Coeff::constant(1.0, 0.5),
            c2: Coeff::constant(2.0, 0.0),
            ..PlasticityParams::default()
        },
    ];
    for params in families {
        let field = PlasticityField::new(&params, Layout::Velocity).unwrap();
        let theta = PlasticityField::new(&params, Layout::Theta).unwrap();
        use riemann_core::solutions::Field;
        for _ in 0..30 {
            let p = [rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let h = 1e-4;
            let at = |dx: f64, dy: f64| field.eval([p[0], p[1] + dx, p[2] + dy]).unwrap();
            let d = |k: usize, dx: f64, dy: f64| {
                (8.0 * (at(dx, dy)[k] - at(-dx, -dy)[k]) - (at(2.0 * dx, 2.0 * dy)[k] - at(-2.0 * dx, -2.0 * dy)[k]))
                    / (12.0 * h)
            };
            let (ux, uy, vx, vy) = (d(0, h, 0.0), d(0, 0.0, h), d(1, h, 0.0), d(1, 0.0, h));
            assert!((ux + vy).abs() < 1e-8 && (uy - vx).abs() < 1e-8);
            let th = theta.eval(p).unwrap()[0];
            assert!(th > -std::f64::consts::FRAC_PI_2 && th <= std::f64::consts::FRAC_PI_2);
            let sv = (uy + vx) * (2.0 * th).sin() + (ux - vy) * (2.0 * th).cos();
            assert!(sv.abs() < 1e-8 * (1.0 + ux.abs() + uy.abs()), "{}: {sv:e}", params.family.name());
        }
    }
}

#[test]
fn branch_cut_of_theta_is_not_a_residual() {
    // With c1 = 1 and c2 = -i/2 the angle 2θ wraps through ±π inside the default grid.
    let sys = builtin_system("plasticity-reduced").unwrap();
    let params = PlasticityParams { family: Family::CaseII, c2: Coeff::constant(0.0, -0.5), ..PlasticityParams::default() };
    let field = PlasticityField::new(&params, Layout::Reduced).unwrap();
    let report = pde_residuals(&sys, &field, &Grid::default(), 1e-8).unwrap();
    assert!(report.pass, "{report}");
    assert_eq!(report.masked, 3);
}

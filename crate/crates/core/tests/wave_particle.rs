use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use riemann_core::algebra::ComplexMatrix;
use riemann_core::dispersion::{InhomFactorization, WaveVector};
use riemann_core::solutions::{
    simple_wave_integrate, wave_particle_fields, CorruptedField, HolomorphicFn, Stepping, WaveParticleField,
};
use riemann_core::systems::{builtin_system_with, BuiltinParams};
use riemann_core::verify::{det_phi_scan, liouville_residual, pde_residuals, Grid};

fn system(a: f64) -> riemann_core::systems::SystemSpec {
    builtin_system_with("wave-particle", &BuiltinParams { a, ..BuiltinParams::default() }).unwrap()
}

#[test]
fn liouville_and_system_residuals() {
    for psi in ["r", "exp(r)", "r + r^3/10"] {
        for a in [1.0, SQRT_2] {
            let field = WaveParticleField { psi: HolomorphicFn::parse(psi).unwrap(), a, n: 1 };
            let grid = Grid::wave_particle();
            let l = liouville_residual(&field, 0, a, &grid, 1e-6).unwrap();
            assert!(l.pass, "psi = {psi}, a = {a}\n{l}");
            let s = pde_residuals(&system(a), &field, &grid, 1e-6).unwrap();
            assert!(s.pass, "psi = {psi}, a = {a}\n{s}");
        }
    }
}

#[test]
fn corrupted_wave_field_fails() {
    let field = WaveParticleField { psi: HolomorphicFn::parse("exp(r)").unwrap(), a: 1.0, n: 1 };
    let bad = CorruptedField { inner: field, component: 0 };
    let grid = Grid::wave_particle();
    assert!(!liouville_residual(&bad, 0, 1.0, &grid, 1e-4).unwrap().pass);
    assert!(!pde_residuals(&system(1.0), &bad, &grid, 1e-4).unwrap().pass);
}

#[test]
fn hand_point_is_exact() {
    let s = wave_particle_fields(&HolomorphicFn::parse("r").unwrap(), SQRT_2, 1, 1.0, 0.0).unwrap();
    assert!(s.u.abs() <= 1e-12);
    assert_eq!(s.phi, 3.0 * PI);
}

#[test]
fn reduced_flow_matches_closed_form() {
    let a = 1.3;
    let sys = system(a);
    let lambda = WaveVector::real(&[1.0, 0.0]).unwrap();
    let rotation = {
        let sys = sys.clone();
        Arc::new(move |x: &[f64], u: &[Complex64]| {
            let b = sys.eval_source(u, x)?;
            let beta = b[1].re.atan2(b[0].re);
            let (s, c) = (-2.0 * beta).sin_cos();
            ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]])
        })
    };
    let fac = InhomFactorization::new(Arc::new(|_, _| Ok(Complex64::new(1.0, 0.0))), rotation);
    let closed = |x: f64| 2.0 * (SQRT_2 / (a * x)).ln();
    let path = simple_wave_integrate(&sys, &lambda, &fac, &[closed(0.5), 3.0 * PI], (0.5, 2.0), 0.05, Stepping::Adaptive { tol: 1e-8 })
        .unwrap();
    for (r, f) in path.r.iter().zip(&path.f) {
        assert!((f[0] - closed(*r)).abs() <= 1e-6, "u({r}) = {} vs {}", f[0], closed(*r));
        assert!((f[1] - 3.0 * PI).abs() <= 1e-12);
    }
    let psi = HolomorphicFn::parse("r").unwrap();
    let end = wave_particle_fields(&psi, a, 1, 2.0, 0.0).unwrap();
    assert!((path.last()[0] - end.u).abs() <= 1e-6);
    assert!((path.at(1.234).unwrap()[0] - closed(1.234)).abs() <= 1e-6);
}

#[test]
fn det_phi_one_for_wave_particle() {
    let field = WaveParticleField { psi: HolomorphicFn::parse("exp(r)").unwrap(), a: 1.0, n: 1 };
    let (one, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let lambda = ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]]).unwrap();
    let rep = det_phi_scan(&field, &lambda, &[ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(2, 2)], &Grid::wave_particle())
        .unwrap();
    assert!(rep.max_dev_from_one <= 1e-12 && rep.flagged.is_empty());
}

#[test]
fn branch_cut_of_phi_is_not_a_residual() {
    // psi' = 2r is negative real on x < 0, y = 0, where arg jumps by 2π.
    let field = WaveParticleField { psi: HolomorphicFn::parse("10 + r^2").unwrap(), a: 1.0, n: 1 };
    let grid: Grid = "x=-1:-0.2,y=-1:1,nx=9,ny=9,nt=1".parse().unwrap();
    let s = pde_residuals(&system(1.0), &field, &grid, 1e-6).unwrap();
    assert!(s.pass, "{s}");
    assert!(liouville_residual(&field, 0, 1.0, &grid, 1e-6).unwrap().pass);
}

//! Wave–particle solutions generated by a holomorphic `ψ(r)`, `r = x + iy`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::Field;
use crate::systems::{parse_expression_in, Compiled, Expr};
use crate::{Error, Result};

/// A holomorphic function of `r` with its symbolic derivative.
#[derive(Clone, Debug)]
pub struct HolomorphicFn {
    pub expr: Expr,
    value: Compiled,
    derivative: Compiled,
}

impl HolomorphicFn {
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(parse_expression_in(text, &["r"])?)
    }

    /// Rejects expressions built from `abs`, `re`, `im` or `conj`.
    pub fn new(expr: Expr) -> Result<Self> {
        let derivative = expr
            .derivative("r")
            .map_err(|_| Error::Input(format!("psi = {expr} is not holomorphic in r")))?;
        Ok(Self { value: expr.compile(&["r"])?, derivative: derivative.compile(&["r"])?, expr })
    }

    pub fn eval(&self, r: Complex64) -> Result<Complex64> {
        self.value.eval(&[r])
    }

    pub fn derivative(&self, r: Complex64) -> Result<Complex64> {
        self.derivative.eval(&[r])
    }
}

/// Shock amplitude and phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaveSample {
    pub u: f64,
    pub phi: f64,
}

/// `u = 2 ln(√8 |ψ′| / (a(ψ + ψ̄)))`, `φ = π − 2 arg ψ′ + 2nπ` with `n` odd.
pub fn wave_particle_fields(psi: &HolomorphicFn, a: f64, n: i64, x: f64, y: f64) -> Result<WaveSample> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Input(format!("a must be positive, got {a}")));
    }
    if n % 2 == 0 {
        return Err(Error::Input(format!("n must be odd, got {n}")));
    }
    let r = Complex64::new(x, y);
    let d = psi.derivative(r)?;
    let s = 2.0 * psi.eval(r)?.re;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("psi + conj(psi) = {s} is not positive at ({x}, {y})")));
    }
    if !(d.norm() > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("psi' = {d} at ({x}, {y})")));
    }
    let u = 2.0 * (8f64.sqrt() * d.norm() / (a * s)).ln();
    let phi = PI - 2.0 * d.arg() + 2.0 * n as f64 * PI;
    Ok(WaveSample { u, phi })
}

/// `(u, φ)` as a field in `(t, x, y)`; `t` is ignored.
#[derive(Clone, Debug)]
pub struct WaveParticleField {
    pub psi: HolomorphicFn,
    pub a: f64,
    pub n: i64,
}

impl Field for WaveParticleField {
    fn components(&self) -> usize {
        2
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        let s = wave_particle_fields(&self.psi, self.a, self.n, point[1], point[2])?;
        Ok(vec![s.u, s.phi])
    }

    /// φ appears only as φ/2 inside sin and cos.
    fn period(&self, component: usize) -> Option<f64> {
        (component == 1).then_some(4.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_linear_psi_point() {
        let psi = HolomorphicFn::parse("r").unwrap();
        let s = wave_particle_fields(&psi, 2f64.sqrt(), 1, 1.0, 0.0).unwrap();
        assert!(s.u.abs() <= 1e-15);
        assert!((s.phi / 2.0).sin() + 1.0 < 1e-15);
        assert!((s.phi / 2.0).cos().abs() < 1e-15);
    }

    #[test]
    fn test_scale_symmetry() {
        let a = HolomorphicFn::parse("r").unwrap();
        let b = HolomorphicFn::parse("3.5*r").unwrap();
        for (x, y) in [(0.7, 0.2), (1.5, -0.9)] {
            let (sa, sb) = (wave_particle_fields(&a, 1.0, 1, x, y).unwrap(), wave_particle_fields(&b, 1.0, 1, x, y).unwrap());
            assert!((sa.u - sb.u).abs() < 1e-14 && (sa.phi - sb.phi).abs() < 1e-14);
        }
    }

    #[test]
    fn test_domain_errors() {
        let psi = HolomorphicFn::parse("r").unwrap();
        assert!(matches!(wave_particle_fields(&psi, 1.0, 1, -1.0, 0.0), Err(Error::Domain(_))));
        assert!(wave_particle_fields(&psi, 1.0, 2, 1.0, 0.0).is_err());
        assert!(wave_particle_fields(&psi, 0.0, 1, 1.0, 0.0).is_err());
        assert!(HolomorphicFn::parse("conj(r)").is_err());
        assert!(HolomorphicFn::parse("x").is_err());
    }
}

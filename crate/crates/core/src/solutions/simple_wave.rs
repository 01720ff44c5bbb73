//! Simple-wave profiles `u = f(r)` for a constant real wave vector.
//!
//! Along `x = r λ/|λ|²` the profile obeys `df/dr = Ω L b (+ τ)`.

use num_complex::Complex64;

use crate::algebra::max_norm;
use crate::dispersion::{symbol, InhomFactorization, WaveVector};
use crate::systems::SystemSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepping {
    /// Step doubling with local error bound `tol`; `dr` is the first trial step.
    Adaptive { tol: f64 },
    /// Classical RK4 with constant step `dr` (the last step is clipped).
    Fixed,
}

/// Nodes of an integrated path with derivatives for Hermite interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    pub r: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub df: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn last(&self) -> &[f64] {
        self.f.last().expect("path has at least one node")
    }

    /// Cubic Hermite interpolation between nodes.
    pub fn at(&self, r: f64) -> Result<Vec<f64>> {
        let (lo, hi) = (self.r[0].min(*self.r.last().unwrap()), self.r[0].max(*self.r.last().unwrap()));
        if !(lo..=hi).contains(&r) {
            return Err(Error::Input(format!("r = {r} outside the integrated span [{lo}, {hi}]")));
        }
        if self.r.len() == 1 {
            return Ok(self.f[0].clone());
        }
        let forward = self.r[1] > self.r[0];
        let k = self
            .r
            .windows(2)
            .position(|w| if forward { r <= w[1] } else { r >= w[1] })
            .unwrap_or(self.r.len() - 2);
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Ok((0..self.f[k].len())
            .map(|i| h00 * self.f[k][i] + h10 * h * self.df[k][i] + h01 * self.f[k + 1][i] + h11 * h * self.df[k + 1][i])
            .collect())
    }
}

const MIN_STEP: f64 = 1e-12;
const MAX_STEPS: usize = 1_000_000;

struct Rhs<'a> {
    sys: &'a SystemSpec,
    direction: Vec<f64>,
    lambda: WaveVector,
    fac: &'a InhomFactorization,
}

impl Rhs<'_> {
    fn eval(&self, r: f64, f: &[f64]) -> Result<Vec<f64>> {
        let x: Vec<f64> = self.direction.iter().map(|d| d * r).collect();
        let u: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let b = self.sys.eval_source(&u, &x)?;
        let omega = self.fac.omega_at(&x, &u)?;
        let l = self.fac.l_at(&x, &u)?;
        let mut out: Vec<Complex64> = l.mul_vec(&b)?.into_iter().map(|z| omega * z).collect();
        if let Some(tau) = &self.fac.tau {
            let tau = tau(&x, &u)?;
            let (a, _) = self.sys.eval_at(&u, &x)?;
            let s = symbol(&a, &self.lambda)?;
            let miss = max_norm(&s.mul_vec(&tau)?);
            if miss > 1e-8 * max_norm(&tau).max(1.0) * s.max_abs().max(1.0) {
                return Err(Error::Input(format!("tau violates A^i lambda_i tau = 0 by {miss:e} at r = {r}")));
            }
            for (o, t) in out.iter_mut().zip(tau) {
                *o += t;
            }
        }
        let scale = out.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
        let mut real = Vec::with_capacity(out.len());
        for z in out {
            if !z.is_finite() {
                return Err(Error::Eval(format!("non-finite right-hand side at r = {r}")));
            }
            if z.im.abs() > 1e-10 * scale {
                return Err(Error::Eval(format!("complex right-hand side {z} at r = {r}")));
            }
            real.push(z.re);
        }
        Ok(real)
    }

    fn rk4(&self, r: f64, f: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>> {
        let axpy = |k: &[f64], s: f64| -> Vec<f64> { f.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k2 = self.eval(r + h / 2.0, &axpy(k1, h / 2.0))?;
        let k3 = self.eval(r + h / 2.0, &axpy(&k2, h / 2.0))?;
        let k4 = self.eval(r + h, &axpy(&k3, h))?;
        Ok((0..f.len()).map(|i| f[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }
}

/// Integrates the simple-wave profile from `r_span.0` to `r_span.1`.
pub fn simple_wave_integrate(
    sys: &SystemSpec,
    lambda: &WaveVector,
    fac: &InhomFactorization,
    f0: &[f64],
    r_span: (f64, f64),
    dr: f64,
    stepping: Stepping,
) -> Result<SampledPath> {
    if lambda.len() != sys.p {
        return Err(Error::Shape(format!("wave vector has {} components, system has {} coordinates", lambda.len(), sys.p)));
    }
    if lambda.lambda.iter().any(|z| z.im != 0.0) {
        return Err(Error::Unsupported("simple waves need a real wave vector".into()));
    }
    if f0.len() != sys.q {
        return Err(Error::Shape(format!("initial value has {} components, system has {} unknowns", f0.len(), sys.q)));
    }
    if !(dr > 0.0 && dr.is_finite()) {
        return Err(Error::Input(format!("step must be positive, got {dr}")));
    }
    let re: Vec<f64> = lambda.lambda.iter().map(|z| z.re).collect();
    let norm2: f64 = re.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return Err(Error::Input("wave vector is zero".into()));
    }
    let direction: Vec<f64> = re.iter().map(|v| v / norm2).collect();
    let rhs = Rhs { sys, direction, lambda: lambda.clone(), fac };

    let (r0, r1) = r_span;
    let sign = if r1 >= r0 { 1.0 } else { -1.0 };
    let mut r = r0;
    let mut f = f0.to_vec();
    let mut k = rhs.eval(r, &f)?;
    let mut path = SampledPath { r: vec![r], f: vec![f.clone()], df: vec![k.clone()] };
    let mut h = dr;
    let remaining = |r: f64| (r1 - r) * sign;
    let mut steps = 0;
    while remaining(r) > 0.0 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Convergence { iterations: MAX_STEPS, last: Complex64::new(r, 0.0) });
        }
        let last = h >= remaining(r);
        let step = if last { remaining(r) } else { h };
        let next = match stepping {
            Stepping::Fixed => rhs.rk4(r, &f, &k, sign * step)?,
            Stepping::Adaptive { tol } => {
                let big = rhs.rk4(r, &f, &k, sign * step)?;
                let mid = rhs.rk4(r, &f, &k, sign * step / 2.0)?;
                let kmid = rhs.eval(r + sign * step / 2.0, &mid)?;
                let small = rhs.rk4(r + sign * step / 2.0, &mid, &kmid, sign * step / 2.0)?;
                let err = big.iter().zip(&small).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if err > tol {
                    h = step / 2.0;
                    if h < MIN_STEP {
                        return Err(Error::Convergence { iterations: steps, last: Complex64::new(r, 0.0) });
                    }
                    continue;
                }
                if err < tol / 32.0 {
                    h = 2.0 * step;
                }
                // Local extrapolation from the doubled step.
                small.iter().zip(&big).map(|(s, b)| s + (s - b) / 15.0).collect()
            }
        };
        r = if last { r1 } else { r + sign * step };
        f = next;
        k = rhs.eval(r, &f)?;
        path.r.push(r);
        path.f.push(f.clone());
        path.df.push(k.clone());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::algebra::ComplexMatrix;
    use crate::systems::{parse_expression, Expr};

    fn scalar_toy() -> SystemSpec {
        let one = || vec![vec![Expr::num(1.0)]];
        SystemSpec::new(
            "toy",
            vec!["x".into(), "y".into()],
            vec!["f".into()],
            vec![one(), one()],
            vec![parse_expression("f").unwrap()],
            &BTreeMap::new(),
            None,
        )
        .unwrap()
    }

    fn unit() -> InhomFactorization {
        InhomFactorization::constant(Complex64::new(1.0, 0.0), ComplexMatrix::identity(1))
    }

    #[test]
    fn test_exponential_toy() {
        let lam = WaveVector::real(&[1.0, 0.0]).unwrap();
        let path = simple_wave_integrate(&scalar_toy(), &lam, &unit(), &[1.0], (0.0, 1.0), 0.1, Stepping::Adaptive { tol: 1e-8 })
            .unwrap();
        assert_eq!(*path.r.last().unwrap(), 1.0);
        assert!((path.last()[0] - 1f64.exp()).abs() < 1e-9);
        let mid = path.at(0.437).unwrap()[0];
        assert!((mid - 0.437f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn test_fixed_step_order() {
        let lam = WaveVector::real(&[1.0, 0.0]).unwrap();
        let err = |dr| {
            let p = simple_wave_integrate(&scalar_toy(), &lam, &unit(), &[1.0], (0.0, 1.0), dr, Stepping::Fixed).unwrap();
            (p.last()[0] - 1f64.exp()).abs()
        };
        assert!(err(0.1) / err(0.05) >= 14.0);
    }

    #[test]
    fn test_backward_span() {
        let lam = WaveVector::real(&[2.0, 0.0]).unwrap();
        let p = simple_wave_integrate(&scalar_toy(), &lam, &unit(), &[1.0], (1.0, 0.0), 0.1, Stepping::Adaptive { tol: 1e-8 })
            .unwrap();
        assert!((p.last()[0] - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn test_homogeneous_is_constant() {
        let mut sys = scalar_toy();
        sys = SystemSpec::new("h", sys.coords.clone(), sys.vars.clone(), vec![vec![vec![Expr::num(1.0)]]; 2], vec![Expr::num(0.0)], &BTreeMap::new(), None)
            .unwrap();
        let lam = WaveVector::real(&[1.0, 1.0]).unwrap();
        let f0 = [0.123456789];
        let p = simple_wave_integrate(&sys, &lam, &unit(), &f0, (0.0, 3.0), 0.25, Stepping::Fixed).unwrap();
        assert!(p.f.iter().all(|f| f[0].to_bits() == f0[0].to_bits()));
    }

    #[test]
    fn test_tau_must_be_annihilated() {
        let lam = WaveVector::real(&[1.0, 0.0]).unwrap();
        let fac = unit().with_tau(Arc::new(|_, _| Ok(vec![Complex64::new(1.0, 0.0)])));
        let err = simple_wave_integrate(&scalar_toy(), &lam, &fac, &[1.0], (0.0, 1.0), 0.1, Stepping::Fixed).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }
}

//! Wave relations, dispersion roots, orthogonal complements and checks of
//! rotation-matrix factorizations for inhomogeneous systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{is_special_orthogonal, kernel_basis, max_norm, rank_with_tolerance, ComplexMatrix};
use crate::systems::{eval_system, SystemSpec};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Roots closer than this are treated as the same root.
pub const CLUSTER_RADIUS: f64 = 1e-8;

/// Tolerance for the SO(q, ℂ) check applied to every evaluated rotation.
pub const ROTATION_TOL: f64 = 1e-8;

/// A nonzero complex wave vector; `r = λ_i x^i` is its Riemann invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveVector {
    pub lambda: Vec<Complex64>,
}

impl WaveVector {
    pub fn new(lambda: Vec<Complex64>) -> Result<Self> {
        if lambda.is_empty() || lambda.iter().all(|z| *z == ZERO) {
            return Err(Error::Input("wave vector must be nonzero".into()));
        }
        if lambda.iter().any(|z| !z.is_finite()) {
            return Err(Error::Input("wave vector has a non-finite component".into()));
        }
        Ok(Self { lambda })
    }

    pub fn real(components: &[f64]) -> Result<Self> {
        Self::new(components.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Rescaled so that `λ₁ = 1`; unchanged when `λ₁ = 0`.
    pub fn gauged(&self) -> Self {
        let l1 = self.lambda[0];
        if l1 == ZERO {
            return self.clone();
        }
        Self { lambda: self.lambda.iter().map(|z| z / l1).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { lambda: self.lambda.iter().map(|z| z.conj()).collect() }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `r = λ_i x^i`.
    pub fn invariant(&self, x: &[f64]) -> Complex64 {
        self.lambda.iter().zip(x).map(|(l, xi)| l * xi).sum()
    }
}

/// `Σ_i λ_i A^i`.
pub fn symbol(mats: &[ComplexMatrix], lambda: &WaveVector) -> Result<ComplexMatrix> {
    if mats.len() != lambda.len() {
        return Err(Error::Shape(format!("{} matrices against a wave vector of length {}", mats.len(), lambda.len())));
    }
    let mut acc = ComplexMatrix::zeros(mats[0].rows(), mats[0].cols());
    for (a, l) in mats.iter().zip(&lambda.lambda) {
        acc = acc.add(&a.scale(*l))?;
    }
    Ok(acc)
}

/// `(λ_i A^i(u)) γ`; vanishes exactly for characteristic pairs.
pub fn wave_relation_residual(
    sys: &SystemSpec,
    u: &[Complex64],
    lambda: &WaveVector,
    gamma: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (mats, _) = eval_system(sys, u)?;
    symbol(&mats, lambda)?.mul_vec(gamma)
}

/// Ascending-power polynomial.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<Complex64>);

impl Poly {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.0.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect())
    }

    fn trimmed(mut self, rel: f64) -> Poly {
        let scale = self.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while let Some(last) = self.0.last() {
            if last.norm() <= rel * scale {
                self.0.pop();
            } else {
                break;
            }
        }
        self
    }

    fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn roots(&self) -> Result<Vec<Complex64>> {
        let Some(n) = self.degree() else { return Ok(Vec::new()) };
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.0[n];
        let mut companion = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..n {
            companion[(0, k)] = -self.0[n - 1 - k] / lead;
            if k + 1 < n {
                companion[(k + 1, k)] = ONE;
            }
        }
        let eig = companion
            .eigenvalues()
            .ok_or_else(|| Error::Degenerate("companion eigenvalue iteration failed".into()))?;
        let d = self.derivative();
        Ok(eig
            .iter()
            .map(|&z0| {
                let mut z = z0;
                for _ in 0..20 {
                    let dp = d.eval(z);
                    if dp == ZERO {
                        break;
                    }
                    let step = self.eval(z) / dp;
                    let next = z - step;
                    if !next.is_finite() || step.norm() > 1e-2 * (1.0 + z.norm()) {
                        break;
                    }
                    z = next;
                    if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                        break;
                    }
                }
                z
            })
            .collect())
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn submatrix(m: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rows.len(), cols.len());
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            out[(a, b)] = m[(r, c)];
        }
    }
    out
}

/// Monomial coefficients of `det(A + ζB)` from samples at Chebyshev nodes.
fn minor_polynomial(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Poly> {
    let k = a.rows();
    let n = k + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    let mut vander = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, &x) in nodes.iter().enumerate() {
        for p in 0..n {
            vander[(j, p)] = Complex64::new(x.powi(p as i32), 0.0);
        }
        values.push(a.add(&b.scale(Complex64::new(x, 0.0)))?.determinant()?);
    }
    let coeffs = vander.inverse()?.mul_vec(&values)?;
    Ok(Poly(coeffs))
}

/// All ζ with `rank(A¹ + ζA²) < min(m, q)`, i.e. wave vectors `λ = (1, ζ)`.
///
/// Each `min(m,q)`-minor is a polynomial in ζ; its roots come from a companion
/// matrix and are polished by Newton steps. A ζ is kept when it is a root of
/// every minor that does not vanish identically, then confirmed by a rank test
/// at tolerance 1e-8. Directions with `λ₁ = 0` are not reported.
pub fn dispersion_roots_2d(sys: &SystemSpec, u: &[Complex64]) -> Result<Vec<Complex64>> {
    if sys.p != 2 {
        return Err(Error::Unsupported(format!("dispersion roots need p = 2, system has p = {}", sys.p)));
    }
    let (mats, _) = eval_system(sys, u)?;
    let (a1, a2) = (&mats[0], &mats[1]);
    let k = sys.m.min(sys.q);
    let scale = a1.max_abs().max(a2.max_abs()).max(f64::MIN_POSITIVE);
    let mut polys = Vec::new();
    for rows in subsets(sys.m, k) {
        for cols in subsets(sys.q, k) {
            let p = minor_polynomial(&submatrix(a1, &rows, &cols), &submatrix(a2, &rows, &cols))?;
            let p = p.trimmed(1e-12);
            let magnitude = p.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if magnitude > 1e-12 * scale.powi(k as i32) {
                polys.push(p);
            }
        }
    }
    if polys.is_empty() {
        return Err(Error::Degenerate("every maximal minor vanishes identically".into()));
    }
    polys.sort_by_key(|p| p.degree());
    let root_sets: Vec<Vec<Complex64>> = polys.iter().map(Poly::roots).collect::<Result<_>>()?;
    let mut found: Vec<Complex64> = Vec::new();
    for &z in &root_sets[0] {
        let common = polys.iter().zip(&root_sets).skip(1).all(|(p, roots)| {
            roots.iter().any(|r| (r - z).norm() <= CLUSTER_RADIUS * (1.0 + z.norm()))
                || p.eval(z).norm() <= 1e-10 * p.0.iter().map(|c| c.norm()).sum::<f64>() * (1.0 + z.norm()).powi(k as i32)
        });
        if common && !found.iter().any(|f| (f - z).norm() <= CLUSTER_RADIUS) {
            found.push(z);
        }
    }
    let all_real = a1.as_slice().iter().chain(a2.as_slice()).all(|z| z.im == 0.0);
    if all_real {
        found = symmetrize_conjugates(found);
    }
    let mut verified = Vec::new();
    for z in found {
        let m = a1.add(&a2.scale(z))?;
        if rank_with_tolerance(&m, 1e-8)? < k {
            verified.push(z);
        }
    }
    verified.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    Ok(verified)
}

fn symmetrize_conjugates(roots: Vec<Complex64>) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        if z.im.abs() <= CLUSTER_RADIUS * (1.0 + z.norm()) {
            out.push(Complex64::new(z.re, 0.0));
            continue;
        }
        let partner = (0..roots.len()).find(|&j| !used[j] && (roots[j] - z.conj()).norm() <= CLUSTER_RADIUS * (1.0 + z.norm()));
        let avg = match partner {
            Some(j) => {
                used[j] = true;
                (z + roots[j].conj()) / 2.0
            }
            None => z,
        };
        out.push(avg);
        out.push(avg.conj());
    }
    out
}

/// Basis `ξ_a` of `{ξ : Σ_i λ_i ξ^i = 0 for every row λ of Λ}`.
///
/// The contraction is bilinear, not Hermitian. Returns `p − k'` vectors, none
/// when Λ already has rank `p`.
pub fn orthogonal_complement(lambda: &ComplexMatrix) -> Result<Vec<Vec<Complex64>>> {
    let rank = rank_with_tolerance(lambda, crate::DEFAULT_TOL)?;
    if rank < lambda.rows() {
        return Err(Error::Degenerate(format!(
            "wave vectors are linearly dependent (rank {rank} < {})",
            lambda.rows()
        )));
    }
    kernel_basis(lambda, crate::DEFAULT_TOL)
}

pub type ScalarFn = Arc<dyn Fn(&[f64], &[Complex64]) -> Result<Complex64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64], &[Complex64]) -> Result<ComplexMatrix> + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], &[Complex64]) -> Result<Vec<Complex64>> + Send + Sync>;

/// The triple (Ω, L, τ) of a rotation-matrix factorization.
///
/// The conjugate handles default to complex conjugation of the values.
#[derive(Clone)]
pub struct InhomFactorization {
    pub omega: ScalarFn,
    pub l: MatrixFn,
    pub tau: Option<VectorFn>,
    pub omega_bar: Option<ScalarFn>,
    pub l_bar: Option<MatrixFn>,
}

impl fmt::Debug for InhomFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InhomFactorization")
            .field("tau", &self.tau.is_some())
            .field("omega_bar", &self.omega_bar.is_some())
            .field("l_bar", &self.l_bar.is_some())
            .finish_non_exhaustive()
    }
}

impl InhomFactorization {
    pub fn new(omega: ScalarFn, l: MatrixFn) -> Self {
        Self { omega, l, tau: None, omega_bar: None, l_bar: None }
    }

    /// Constant Ω and L.
    pub fn constant(omega: Complex64, l: ComplexMatrix) -> Self {
        Self::new(Arc::new(move |_, _| Ok(omega)), Arc::new(move |_, _| Ok(l.clone())))
    }

    pub fn with_tau(mut self, tau: VectorFn) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn omega_at(&self, x: &[f64], u: &[Complex64]) -> Result<Complex64> {
        (self.omega)(x, u)
    }

    pub fn omega_bar_at(&self, x: &[f64], u: &[Complex64]) -> Result<Complex64> {
        match &self.omega_bar {
            Some(f) => f(x, u),
            None => Ok(self.omega_at(x, u)?.conj()),
        }
    }

    /// L at a point, rejected unless it lies in SO(q, ℂ) to 1e-8.
    pub fn l_at(&self, x: &[f64], u: &[Complex64]) -> Result<ComplexMatrix> {
        let l = (self.l)(x, u)?;
        if !is_special_orthogonal(&l, ROTATION_TOL)? {
            return Err(Error::Input("rotation factor is not in SO(q, C)".into()));
        }
        Ok(l)
    }

    pub fn l_bar_at(&self, x: &[f64], u: &[Complex64]) -> Result<ComplexMatrix> {
        match &self.l_bar {
            Some(f) => {
                let l = f(x, u)?;
                if !is_special_orthogonal(&l, ROTATION_TOL)? {
                    return Err(Error::Input("conjugate rotation factor is not in SO(q, C)".into()));
                }
                Ok(l)
            }
            None => Ok(self.l_at(x, u)?.conj()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimpleWave,
    SimpleMode,
}

fn condition_matrix(
    mats: &[ComplexMatrix],
    x: &[f64],
    u: &[Complex64],
    fac: &InhomFactorization,
    lambda: &WaveVector,
    mode: Mode,
) -> Result<ComplexMatrix> {
    let q = mats[0].cols();
    let omega = fac.omega_at(x, u)?;
    let l = fac.l_at(x, u)?;
    if l.rows() != q {
        return Err(Error::Shape(format!("rotation is {}x{}, system has q = {q}", l.rows(), l.cols())));
    }
    let mut m = symbol(mats, lambda)?.mul(&l)?.scale(omega);
    if mode == Mode::SimpleMode {
        let omega_bar = fac.omega_bar_at(x, u)?;
        let l_bar = fac.l_bar_at(x, u)?;
        m = m.add(&symbol(mats, &lambda.conj())?.mul(&l_bar)?.scale(omega_bar))?;
    }
    m.sub(&ComplexMatrix::identity(q))
}

/// Residual of the factorization condition at `(x, u)`.
///
/// Simple wave: `(Ω λ_i A^i L − I) b`. Simple mode:
/// `(A^i(λ_i Ω L + λ̄_i Ω̄ L̄) − I) b`. A vanishing source makes the
/// condition vacuous, which is reported as an error.
pub fn inhom_condition_residual(
    sys: &SystemSpec,
    x: &[f64],
    u: &[Complex64],
    fac: &InhomFactorization,
    lambda: &WaveVector,
    mode: Mode,
) -> Result<Vec<Complex64>> {
    let (mats, b) = sys.eval_at(u, x)?;
    if b.iter().all(|z| *z == ZERO) {
        return Err(Error::Vacuous("source term vanishes at this point".into()));
    }
    condition_matrix(&mats, x, u, fac, lambda, mode)?.mul_vec(&b)
}

/// Determinant of the factorization matrix.
///
/// Simple wave: `det(Ω λ_i A^i L − I)`. Simple mode:
/// `det(A^i(λ_i L + λ̄_i L̄) − I)`, where callers fold Ω into `L` and `L̄`.
pub fn inhom_dispersion_det(
    sys: &SystemSpec,
    u: &[Complex64],
    lambda: &WaveVector,
    omega: Complex64,
    l: &ComplexMatrix,
    l_bar: &ComplexMatrix,
    mode: Mode,
) -> Result<Complex64> {
    let (mats, _) = eval_system(sys, u)?;
    let mut m = symbol(&mats, lambda)?.mul(l)?;
    match mode {
        Mode::SimpleWave => m = m.scale(omega),
        Mode::SimpleMode => m = m.add(&symbol(&mats, &lambda.conj())?.mul(l_bar)?)?,
    }
    m.sub(&ComplexMatrix::identity(sys.q))?.determinant()
}

/// Two readings of the scalar factor of the wave–particle candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaReading {
    /// `12^{1/4}(1 − ε i)`.
    EpsilonTimesI,
    /// `12^{1/4}(1 − ε^i)` with the principal power.
    EpsilonPowerI,
}

impl OmegaReading {
    pub fn omega(self, eps: f64) -> Complex64 {
        let base = 12f64.powf(0.25);
        match self {
            OmegaReading::EpsilonTimesI => base * Complex64::new(1.0, -eps),
            OmegaReading::EpsilonPowerI => {
                let power = (Complex64::new(0.0, 1.0) * Complex64::new(eps, 0.0).ln()).exp();
                base * (ONE - power)
            }
        }
    }
}

/// Candidate rotation for the wave–particle system, as a function of `b`.
pub fn wave_particle_rotation(b1: Complex64, b2: Complex64, eps: f64) -> Result<ComplexMatrix> {
    let i = Complex64::new(0.0, 1.0);
    let norm2 = b1 * b1 + b2 * b2;
    if norm2.norm() == 0.0 {
        return Err(Error::Singularity("rotation undefined where b = 0".into()));
    }
    let k = 108f64.powf(0.25) * i / (6.0 * Complex64::new(1.0, -eps) * norm2);
    let plus = (b1 + i * b2).powi(2);
    let minus = (b1 - i * b2).powi(2);
    let sqrt3 = 3f64.sqrt();
    let l11 = -k * (sqrt3 * eps * plus + i * minus);
    let l12 = k * (sqrt3 * eps * i * plus + minus);
    ComplexMatrix::from_rows(&[vec![l11, l12], vec![-l12, l11]])
}

/// The reference (Ω, L) candidate for the wave–particle system.
pub fn wave_particle_factorization(sys: &SystemSpec, eps: f64, reading: OmegaReading) -> InhomFactorization {
    let omega = reading.omega(eps);
    let sys = sys.clone();
    InhomFactorization::new(
        Arc::new(move |_, _| Ok(omega)),
        Arc::new(move |x, u| {
            let b = sys.eval_source(u, x)?;
            wave_particle_rotation(b[0], b[1], eps)
        }),
    )
}

/// Outcome of evaluating one reading of the wave–particle factorization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationDiagnostic {
    pub reading: OmegaReading,
    pub eps: f64,
    pub omega: [f64; 2],
    pub residual_max_abs: f64,
    /// Least-squares `s` in `A^i(λ_i Ω L + λ̄_i Ω̄ L̄) b ≈ s b`; 1 means the condition holds.
    pub scale_factor: [f64; 2],
    pub rotation_is_special_orthogonal: bool,
    pub satisfied: bool,
}

/// Evaluates both Ω readings and both signs of ε at `(u, φ)`.
pub fn wave_particle_diagnostics(sys: &SystemSpec, state: &[Complex64], tol: f64) -> Result<Vec<FactorizationDiagnostic>> {
    let lambda = WaveVector::new(vec![ONE, Complex64::new(0.0, 1.0)])?;
    let x = vec![0.0; sys.p];
    let b = sys.eval_source(state, &x)?;
    let bb: Complex64 = b.iter().map(|z| z.conj() * z).sum();
    let mut out = Vec::new();
    for reading in [OmegaReading::EpsilonTimesI, OmegaReading::EpsilonPowerI] {
        for eps in [1.0, -1.0] {
            let fac = wave_particle_factorization(sys, eps, reading);
            let l = (fac.l)(&x, state)?;
            let so = is_special_orthogonal(&l, ROTATION_TOL)?;
            let res = inhom_condition_residual(sys, &x, state, &fac, &lambda, Mode::SimpleMode)?;
            // res = (M − I) b, so M b = res + b.
            let mb: Vec<Complex64> = res.iter().zip(&b).map(|(r, bi)| r + bi).collect();
            let s: Complex64 = b.iter().zip(&mb).map(|(bi, mi)| bi.conj() * mi).sum::<Complex64>() / bb;
            let omega = reading.omega(eps);
            let worst = max_norm(&res);
            out.push(FactorizationDiagnostic {
                reading,
                eps,
                omega: [omega.re, omega.im],
                residual_max_abs: worst,
                scale_factor: [s.re, s.im],
                rotation_is_special_orthogonal: so,
                satisfied: so && worst <= tol,
            });
        }
    }
    Ok(out)
}

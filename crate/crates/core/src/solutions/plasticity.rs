//! Plane plasticity solutions generated by one holomorphic function of `r = x + iy`.
//!
//! A holomorphic `H` gives `u = 2 Re H`, `v = −2 Im H` and the angle
//! `2θ = atan2(Re H′, Im H′)`. These satisfy incompressibility, irrotationality
//! and the Saint-Venant relation for any `H`; the families below are the ones
//! for which the pressure `σ` also exists.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::Serialize;

use super::params::{CoeffFn, Family, PlasticityParams};
use super::Field;
use crate::specfun::{erfi_c, inverse_erf_c};
use crate::systems::{parse_expression_in, Compiled};
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-10;
const BRANCH_GUARD: f64 = 1e-6;

/// `h` and its derivatives in `r`, plus `∂h/∂t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HValue {
    pub h: Complex64,
    pub h1: Complex64,
    pub h2: Complex64,
    pub h3: Complex64,
    pub ht: Complex64,
}

/// Which formulas produce the velocity and angle fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Closed-form fields for case i and case ii; `h` itself for the general family.
    Explicit,
    /// `u = h + h̄`, `v = i(h − h̄)` with `θ` from `h′`, for every family.
    FromH,
}

/// Velocities, angle and mean pressure at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSample {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// Ordering of unknowns handed to the verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `(σ, θ, u, v)` for `plasticity-full`.
    Full,
    /// `(θ_x, θ_y, u, v)` for `plasticity-subsystem`.
    Subsystem,
    /// `(θ, θ_x, θ_y, u, v)` for `plasticity-reduced`.
    Reduced,
    /// `(u, v)`.
    Velocity,
    /// `(θ)`.
    Theta,
}

impl Layout {
    pub fn components(self) -> usize {
        match self {
            Layout::Full | Layout::Subsystem => 4,
            Layout::Reduced => 5,
            Layout::Velocity => 2,
            Layout::Theta => 1,
        }
    }

    /// Layout matching a builtin system name.
    pub fn for_system(name: &str) -> Option<Self> {
        match name {
            "plasticity-full" => Some(Layout::Full),
            "plasticity-subsystem" => Some(Layout::Subsystem),
            "plasticity-reduced" => Some(Layout::Reduced),
            _ => None,
        }
    }
}

struct Coeffs {
    c1: Complex64,
    c2: Complex64,
    c3: Complex64,
    dc1: Complex64,
    dc2: Complex64,
    dc3: Complex64,
    omega: f64,
    domega: f64,
}

/// The generating function of the velocity field at a point.
struct Potential {
    h: Complex64,
    h1: Complex64,
    h2: Complex64,
    ht: Complex64,
    shift: Complex64,
    shift_t: Complex64,
}

/// Everything except σ at one point.
#[derive(Clone, Copy, Debug)]
struct Kinematics {
    u: f64,
    v: f64,
    theta: f64,
    theta_x: f64,
    theta_y: f64,
    u_t: f64,
    v_t: f64,
}

/// A resolved, evaluable parameter set.
#[derive(Debug)]
pub struct Plasticity {
    pub family: Family,
    pub rho: f64,
    pub x_ref: f64,
    pub y_ref: f64,
    pub mask_radius: f64,
    source: Source,
    c1: CoeffFn,
    c2: CoeffFn,
    c3: CoeffFn,
    omega: CoeffFn,
    sigma0: CoeffFn,
    potential: Compiled,
}

impl Plasticity {
    pub fn new(params: &PlasticityParams) -> Result<Self> {
        Self::with_source(params, Source::Explicit)
    }

    pub fn with_source(params: &PlasticityParams, source: Source) -> Result<Self> {
        if !(params.rho > 0.0 && params.rho.is_finite()) {
            return Err(Error::Input(format!("rho must be positive, got {}", params.rho)));
        }
        if !(params.mask_radius >= 0.0) {
            return Err(Error::Input(format!("mask_radius must be non-negative, got {}", params.mask_radius)));
        }
        let v = parse_expression_in(&params.potential, &["t", "x", "y"])
            .map_err(|e| Error::Config(format!("V: {e}")))?;
        Ok(Self {
            family: params.family,
            rho: params.rho,
            x_ref: params.x_ref,
            y_ref: params.y_ref,
            mask_radius: params.mask_radius,
            source,
            c1: CoeffFn::new(&params.c1, "c1")?,
            c2: CoeffFn::new(&params.c2, "c2")?,
            c3: CoeffFn::new(&params.c3, "c3")?,
            omega: CoeffFn::new(&params.omega, "Omega")?,
            sigma0: CoeffFn::new(&params.sigma0, "sigma0")?,
            potential: v.compile(&["t", "x", "y"])?,
        })
    }

    fn coeffs(&self, t: f64) -> Result<Coeffs> {
        let (omega, domega) = if self.family == Family::General {
            let w = self.omega.eval_real(t, "Omega")?;
            if w == 0.0 {
                return Err(Error::Domain(format!("separation constant Omega vanishes at t = {t}")));
            }
            (w, self.omega.derivative(t)?.re)
        } else {
            (0.0, 0.0)
        };
        Ok(Coeffs {
            c1: self.c1.eval(t)?,
            c2: self.c2.eval(t)?,
            c3: self.c3.eval(t)?,
            dc1: self.c1.derivative(t)?,
            dc2: self.c2.derivative(t)?,
            dc3: self.c3.derivative(t)?,
            omega,
            domega,
        })
    }

    /// `h(r)` of the family with derivatives up to third order.
    pub fn h(&self, t: f64, r: Complex64) -> Result<HValue> {
        let c = self.coeffs(t)?;
        let zero = Complex64::new(0.0, 0.0);
        match self.family {
            Family::General => general_h(&c, r),
            Family::CaseI => Ok(HValue { h: c.c1 * r + c.c2, h1: c.c1, h2: zero, h3: zero, ht: c.dc1 * r + c.dc2 }),
            Family::CaseII => {
                let d = r + c.c2;
                if d.norm() == 0.0 {
                    return Err(Error::Singularity(format!("h has a pole at r = {r}")));
                }
                let inv = d.inv();
                Ok(HValue {
                    h: c.c1 * inv + c.c3,
                    h1: -c.c1 * inv * inv,
                    h2: 2.0 * c.c1 * inv * inv * inv,
                    h3: -6.0 * c.c1 * inv * inv * inv * inv,
                    ht: c.dc1 * inv - c.c1 * c.dc2 * inv * inv + c.dc3,
                })
            }
        }
    }

    fn potential_at(&self, t: f64, r: Complex64) -> Result<Potential> {
        let zero = Complex64::new(0.0, 0.0);
        let from_h = |hv: HValue| Potential { h: hv.h, h1: hv.h1, h2: hv.h2, ht: hv.ht, shift: zero, shift_t: zero };
        match (self.source, self.family) {
            (Source::FromH, _) | (_, Family::General) => Ok(from_h(self.h(t, r)?)),
            (Source::Explicit, Family::CaseI) => {
                let c = self.coeffs(t)?;
                Ok(Potential {
                    h: 2.0 * (c.c1.conj() * r + c.c2.conj()),
                    h1: 2.0 * c.c1.conj(),
                    h2: zero,
                    ht: 2.0 * (c.dc1.conj() * r + c.dc2.conj()),
                    shift: zero,
                    shift_t: zero,
                })
            }
            (Source::Explicit, Family::CaseII) => {
                let c = self.coeffs(t)?;
                let hv = self.h(t, r)?;
                Ok(Potential {
                    h: hv.h - c.c3,
                    h1: hv.h1,
                    h2: hv.h2,
                    ht: hv.ht - c.dc3,
                    shift: c.c3,
                    shift_t: c.dc3,
                })
            }
        }
    }

    /// The pole `r = −c₂(t)` of case ii.
    pub fn singular_point(&self, t: f64) -> Result<Option<Complex64>> {
        if self.family != Family::CaseII {
            return Ok(None);
        }
        Ok(Some(-self.c2.eval(t)?))
    }

    pub fn is_masked(&self, t: f64, x: f64, y: f64) -> bool {
        match self.singular_point(t) {
            Ok(Some(p)) => (Complex64::new(x, y) - p).norm() < self.mask_radius,
            Ok(None) => false,
            Err(_) => true,
        }
    }

    fn kinematics(&self, t: f64, x: f64, y: f64) -> Result<Kinematics> {
        let r = Complex64::new(x, y);
        let p = self.potential_at(t, r)?;
        let (theta, theta_x, theta_y) = if self.source == Source::Explicit && self.family == Family::CaseI {
            let c1 = self.c1.eval(t)?;
            let theta = if c1.im == 0.0 { FRAC_PI_4 } else { -0.5 * (c1.re / c1.im).atan() };
            (theta, 0.0, 0.0)
        } else {
            let q = if p.h1.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { p.h2 / p.h1 };
            (angle(p.h1), -0.5 * q.im, -0.5 * q.re)
        };
        let k = Kinematics {
            u: 2.0 * p.h.re + p.shift.re,
            v: -2.0 * p.h.im + p.shift.im,
            theta,
            theta_x,
            theta_y,
            u_t: 2.0 * p.ht.re + p.shift_t.re,
            v_t: -2.0 * p.ht.im + p.shift_t.im,
        };
        let all = [k.u, k.v, k.theta, k.theta_x, k.theta_y, k.u_t, k.v_t];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eval(format!("non-finite field at (t, x, y) = ({t}, {x}, {y})")));
        }
        Ok(k)
    }

    fn check_path(&self, t: f64, x: f64, y: f64) -> Result<()> {
        let Some(p) = self.singular_point(t)? else { return Ok(()) };
        let vertical = segment_distance(p, Complex64::new(self.x_ref, self.y_ref), Complex64::new(self.x_ref, y));
        let horizontal = segment_distance(p, Complex64::new(self.x_ref, y), Complex64::new(x, y));
        let radius = self.mask_radius.max(BRANCH_GUARD);
        if vertical.min(horizontal) < radius {
            return Err(Error::Singularity(format!(
                "sigma integration path to ({x}, {y}) passes within {radius} of the pole r = {p} at t = {t}"
            )));
        }
        Ok(())
    }

    fn potential_value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        let v = self.potential.eval(&[Complex64::new(t, 0.0), Complex64::new(x, 0.0), Complex64::new(y, 0.0)])?;
        Ok(v.re)
    }

    /// Mean pressure by quadrature along `(x_ref, y_ref) → (x_ref, y) → (x, y)`.
    pub fn sigma(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.check_path(t, x, y)?;
        let k = self.kinematics(t, x, y)?;
        let rho = self.rho;
        let local = -rho * self.potential_value(t, x, y)?
            + 0.5 * (2.0 * k.theta).sin()
            + rho * (k.u * k.u + k.v * k.v) / 2.0;
        let along_x = adaptive_simpson(
            |xp| {
                let k = self.kinematics(t, xp, y)?;
                Ok(rho * k.u_t + k.theta_y * (2.0 * k.theta).sin())
            },
            self.x_ref,
            x,
            QUAD_TOL,
        )?;
        let along_y = adaptive_simpson(
            |yp| {
                let k = self.kinematics(t, self.x_ref, yp)?;
                let s = (2.0 * k.theta).sin_cos();
                Ok(rho * k.v_t + k.theta_x * s.0 - 2.0 * k.theta_y * s.1)
            },
            self.y_ref,
            y,
            QUAD_TOL,
        )?;
        Ok(local + along_x + along_y + self.sigma0.eval_real(t, "sigma0")?)
    }

    /// `(u, v)` without the pressure.
    pub fn velocity(&self, t: f64, x: f64, y: f64) -> Result<[f64; 2]> {
        let k = self.kinematics(t, x, y)?;
        Ok([k.u, k.v])
    }

    pub fn sample(&self, t: f64, x: f64, y: f64) -> Result<FieldSample> {
        let k = self.kinematics(t, x, y)?;
        Ok(FieldSample { u: k.u, v: k.v, theta: k.theta, sigma: self.sigma(t, x, y)? })
    }

    /// Case-i pressure from its closed form.
    pub fn case_i_sigma(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        if self.family != Family::CaseI {
            return Err(Error::Unsupported("the closed-form pressure exists for case i only".into()));
        }
        let c = self.coeffs(t)?;
        let rho = self.rho;
        let m = c.c1.norm_sqr();
        let cc = c.c1 * c.c2.conj();
        Ok(-rho * self.potential_value(t, x, y)?
            + rho * (2.0 * m + c.dc1.re) * x * x
            - 2.0 * rho * c.dc1.im * x * y
            + rho * (2.0 * m - c.dc1.re) * y * y
            + 2.0 * rho * (2.0 * cc.re + c.dc2.re) * x
            - 2.0 * rho * (2.0 * cc.im + c.dc2.im) * y
            + self.sigma0.eval_real(t, "sigma0")?)
    }

    fn layout_values(&self, layout: Layout, t: f64, x: f64, y: f64) -> Result<Vec<f64>> {
        let k = self.kinematics(t, x, y)?;
        Ok(match layout {
            Layout::Full => vec![self.sigma(t, x, y)?, k.theta, k.u, k.v],
            Layout::Subsystem => vec![k.theta_x, k.theta_y, k.u, k.v],
            Layout::Reduced => vec![k.theta, k.theta_x, k.theta_y, k.u, k.v],
            Layout::Velocity => vec![k.u, k.v],
            Layout::Theta => vec![k.theta],
        })
    }
}

/// `θ = ½ atan2(Re H′, Im H′)` in `(−π/2, π/2]`; `π/4` where `H′ = 0`.
fn angle(h1: Complex64) -> f64 {
    if h1.norm() == 0.0 {
        return FRAC_PI_4;
    }
    let mut two = h1.re.atan2(h1.im);
    if two <= -PI {
        two += 2.0 * PI;
    }
    0.5 * two
}

fn general_h(c: &Coeffs, r: Complex64) -> Result<HValue> {
    let w = c.c2 + c.c1 * r;
    for branch in [1.0, -1.0] {
        if (w - branch).norm() < BRANCH_GUARD {
            return Err(Error::Singularity(format!("c2 + c1 r = {w} is at a branch point of erf^-1")));
        }
    }
    let z = inverse_erf_c(w, None)?;
    let e = erfi_c(z)?;
    let z2 = z * z;
    let (o, c1) = (c.omega, c.c1);
    let sqrt_pi = PI.sqrt();
    let e2 = (2.0 * z2).exp();
    Ok(HValue {
        h: -(2.0 * PI * c1 / o) * e + c.c3,
        h1: -(2.0 * PI * c1 * c1 / o) * e2,
        h2: -(4.0 * PI * sqrt_pi * c1 * c1 * c1 / o) * z * (3.0 * z2).exp(),
        h3: -(2.0 * PI * PI * c1 * c1 * c1 * c1 / o) * (1.0 + 6.0 * z2) * (4.0 * z2).exp(),
        ht: -2.0 * PI * (c.dc1 / o - c1 * c.domega / (o * o)) * e - (2.0 * PI * c1 / o) * e2 * (c.dc2 + c.dc1 * r)
            + c.dc3,
    })
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

pub fn h_eval(params: &PlasticityParams, t: f64, r: Complex64) -> Result<HValue> {
    Plasticity::new(params)?.h(t, r)
}

pub fn plasticity_fields(params: &PlasticityParams, t: f64, x: f64, y: f64) -> Result<FieldSample> {
    Plasticity::new(params)?.sample(t, x, y)
}

/// Fields from `u = h + h̄`, `v = i(h − h̄)` and `θ` from `h′`, bypassing the explicit case displays.
pub fn plasticity_fields_from_h(params: &PlasticityParams, t: f64, x: f64, y: f64) -> Result<FieldSample> {
    Plasticity::with_source(params, Source::FromH)?.sample(t, x, y)
}

pub fn sigma_quadrature(params: &PlasticityParams, t: f64, x: f64, y: f64) -> Result<f64> {
    Plasticity::new(params)?.sigma(t, x, y)
}

/// The separation constant `Ω(t)` as given, for any family.
pub fn omega_value(params: &PlasticityParams, t: f64) -> Result<f64> {
    CoeffFn::new(&params.omega, "Omega")?.eval_real(t, "Omega")
}

pub fn case_i_sigma_closed_form(params: &PlasticityParams, t: f64, x: f64, y: f64) -> Result<f64> {
    Plasticity::new(params)?.case_i_sigma(t, x, y)
}

/// Whether general-family parameters stay clear of the `erf⁻¹` branch points and the
/// angle branch cut on `[0,1] × [−1,1]²` enlarged by 5%.
pub fn admissible_on_default_grid(params: &PlasticityParams) -> Result<bool> {
    if params.family != Family::General {
        return Ok(true);
    }
    let model = Plasticity::new(params)?;
    let edge = 1.05;
    let n = 17;
    for k in 0..5 {
        let t = k as f64 / 4.0;
        let c = match model.coeffs(t) {
            Ok(c) => c,
            Err(Error::Domain(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        for (x, y) in [(edge, edge), (edge, -edge), (-edge, edge), (-edge, -edge)] {
            if (c.c2 + c.c1 * Complex64::new(x, y)).norm() > 0.7 {
                return Ok(false);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let x = -edge + 2.0 * edge * i as f64 / (n - 1) as f64;
                let y = -edge + 2.0 * edge * j as f64 / (n - 1) as f64;
                let h1 = model.h(t, Complex64::new(x, y))?.h1;
                if h1.norm() == 0.0 || (h1.arg() + PI / 2.0).abs() < 0.3 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// A plasticity solution laid out for a particular system.
pub struct PlasticityField {
    pub model: Plasticity,
    pub layout: Layout,
}

impl PlasticityField {
    pub fn new(params: &PlasticityParams, layout: Layout) -> Result<Self> {
        Ok(Self { model: Plasticity::new(params)?, layout })
    }
}

impl Field for PlasticityField {
    fn components(&self) -> usize {
        self.layout.components()
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        self.model.layout_values(self.layout, point[0], point[1], point[2])
    }

    fn masked(&self, point: [f64; 3]) -> bool {
        self.model.is_masked(point[0], point[1], point[2])
    }

    /// θ enters the equations only through its derivatives and 2θ.
    fn period(&self, component: usize) -> Option<f64> {
        let theta = match self.layout {
            Layout::Full => Some(1),
            Layout::Reduced | Layout::Theta => Some(0),
            Layout::Subsystem | Layout::Velocity => None,
        };
        (theta == Some(component)).then_some(std::f64::consts::PI)
    }
}

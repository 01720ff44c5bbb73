//! Grid residuals of candidate solutions.
//!
//! Derivatives are fourth-order central differences with step
//! `1e-4·max(1, |coord|)`; second derivatives use ten times that step.
//! Points are evaluated in parallel and folded in grid order, so reports do not
//! depend on scheduling.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::ComplexMatrix;
use crate::solutions::{omega_value, Field, Plasticity, PlasticityParams};
use crate::systems::SystemSpec;
use crate::{Error, Result};

/// Relative differencing step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Determinants below this modulus are flagged as a gradient catastrophe.
pub const CATASTROPHE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Central2,
    Central4,
}

/// Uniform tensor grid over `(t, x, y)`. An axis with one point sits at the
/// lower end of its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_range: [f64; 2],
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Grid {
    /// 9×9 spatial points on `[−1,1]²` at 3 times in `[0,1]`.
    fn default() -> Self {
        Self { t_range: [0.0, 1.0], x_range: [-1.0, 1.0], y_range: [-1.0, 1.0], nt: 3, nx: 9, ny: 9 }
    }
}

impl Grid {
    pub fn new(t_range: [f64; 2], x_range: [f64; 2], y_range: [f64; 2], nt: usize, nx: usize, ny: usize) -> Result<Self> {
        let g = Self { t_range, x_range, y_range, nt, nx, ny };
        g.validate()?;
        Ok(g)
    }

    /// Spatial grid at `t = 0`.
    pub fn spatial(x_range: [f64; 2], y_range: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Self::new([0.0, 0.0], x_range, y_range, 1, nx, ny)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, range, n) in [("t", self.t_range, self.nt), ("x", self.x_range, self.nx), ("y", self.y_range, self.ny)] {
            if !(range[0].is_finite() && range[1].is_finite()) || range[1] < range[0] {
                return Err(Error::Input(format!("bad {name} range {range:?}")));
            }
            if n == 0 || n == 2 {
                return Err(Error::Input(format!("{name} needs 1 or at least 3 points, got {n}")));
            }
            if n > 1 {
                let spacing = (range[1] - range[0]) / (n - 1) as f64;
                let step = DEFAULT_STEP * range[0].abs().max(range[1].abs()).max(1.0);
                if spacing <= 10.0 * step {
                    return Err(Error::Input(format!("{name} spacing {spacing} is not above ten differencing steps")));
                }
            }
        }
        Ok(())
    }

    fn axis(range: [f64; 2], n: usize, k: usize) -> f64 {
        if n == 1 {
            range[0]
        } else {
            range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64
        }
    }

    /// Points in `t`-major, then `x`, then `y` order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.nt * self.nx * self.ny);
        for a in 0..self.nt {
            for b in 0..self.nx {
                for c in 0..self.ny {
                    out.push([
                        Self::axis(self.t_range, self.nt, a),
                        Self::axis(self.x_range, self.nx, b),
                        Self::axis(self.y_range, self.ny, c),
                    ]);
                }
            }
        }
        out
    }

    /// The wave–particle grid: 17×17 on `[0.5,2]×[−1,1]`.
    pub fn wave_particle() -> Self {
        Self { t_range: [0.0, 1.0], x_range: [0.5, 2.0], y_range: [-1.0, 1.0], nt: 1, nx: 17, ny: 17 }
    }
}

fn parse_range(v: &str) -> Result<[f64; 2]> {
    let (a, b) = v.split_once(':').ok_or_else(|| Error::Input(format!("range `{v}` must look like a:b")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad number `{s}` in range")));
    Ok([num(a)?, num(b)?])
}

impl FromStr for Grid {
    type Err = Error;

    /// `default`, or comma-separated overrides of the default such as
    /// `x=0.5:2,y=-1:1,nx=17,ny=17,nt=1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut g = Grid::default();
        let s = s.trim();
        if s.is_empty() || s == "default" {
            return Ok(g);
        }
        for item in s.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("grid item `{item}` must be key=value")))?;
            let count = || v.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad count `{v}`")));
            match k.trim() {
                "t" => g.t_range = parse_range(v)?,
                "x" => g.x_range = parse_range(v)?,
                "y" => g.y_range = parse_range(v)?,
                "nt" => g.nt = count()?,
                "nx" => g.nx = count()?,
                "ny" => g.ny = count()?,
                other => return Err(Error::Input(format!("unknown grid key `{other}`"))),
            }
        }
        g.validate()?;
        Ok(g)
    }
}

/// Outcome of differencing a field at one point.
#[derive(Clone, Debug, PartialEq)]
pub enum Jacobian {
    /// `jacobian[α][k]` is `∂f^α/∂(axis k)`; `value` is the field at the point.
    Value { value: Vec<f64>, jacobian: Vec<Vec<f64>> },
    Masked(String),
}

fn step_at(coord: f64, step: f64) -> f64 {
    step * coord.abs().max(1.0)
}

fn shifted(point: [f64; 3], axis: usize, d: f64) -> [f64; 3] {
    let mut p = point;
    p[axis] += d;
    p
}

/// Symmetric stencil pairs `(offset, weight)`: `f′ ≈ Σ w (f(x+oh) − f(x−oh)) / h`.
fn weights(scheme: Scheme) -> &'static [(f64, f64)] {
    match scheme {
        Scheme::Central2 => &[(1.0, 0.5)],
        Scheme::Central4 => &[(1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)],
    }
}

/// `d` reduced into `[−period/2, period/2]` when a period is given.
fn wrapped(d: f64, period: Option<f64>) -> f64 {
    match period {
        Some(p) => d - p * (d / p).round(),
        None => d,
    }
}

fn eval_checked(field: &dyn Field, p: [f64; 3]) -> std::result::Result<Vec<f64>, String> {
    match field.eval(p) {
        Ok(v) if v.len() != field.components() => {
            Err(format!("field returned {} values, expected {}", v.len(), field.components()))
        }
        Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(v),
        Ok(_) => Err(format!("non-finite value at {p:?}")),
        Err(e) => Err(e.to_string()),
    }
}

/// First partials along `axes` (indices into `(t, x, y)`).
pub fn numeric_jacobian(field: &dyn Field, point: [f64; 3], axes: &[usize], scheme: Scheme, step: f64) -> Jacobian {
    let value = match eval_checked(field, point) {
        Ok(v) => v,
        Err(e) => return Jacobian::Masked(e),
    };
    let mut jac = vec![vec![0.0; axes.len()]; value.len()];
    for (k, &axis) in axes.iter().enumerate() {
        let h = step_at(point[axis], step);
        for &(offset, w) in weights(scheme) {
            let plus = eval_checked(field, shifted(point, axis, offset * h));
            let minus = eval_checked(field, shifted(point, axis, -offset * h));
            let (plus, minus) = match (plus, minus) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return Jacobian::Masked(e),
            };
            for (alpha, (row, (a, b))) in jac.iter_mut().zip(plus.iter().zip(&minus)).enumerate() {
                row[k] += w * wrapped(a - b, field.period(alpha)) / h;
            }
        }
    }
    Jacobian::Value { value, jacobian: jac }
}

/// Value, gradient and Hessian in `(x, y)` of one component, fourth order.
struct Second {
    f: f64,
    fx: f64,
    fy: f64,
    fxx: f64,
    fxy: f64,
    fyy: f64,
}

fn second_derivatives(field: &dyn Field, component: usize, p: [f64; 3]) -> std::result::Result<Second, String> {
    let f = eval_checked(field, p)?[component];
    let period = field.period(component);
    let at = |q: [f64; 3]| eval_checked(field, q).map(|v| f + wrapped(v[component] - f, period));
    let hx = step_at(p[1], 10.0 * DEFAULT_STEP);
    let hy = step_at(p[2], 10.0 * DEFAULT_STEP);
    let x = |o: f64| at(shifted(p, 1, o * hx));
    let y = |o: f64| at(shifted(p, 2, o * hy));
    let (x1, x_1, x2, x_2) = (x(1.0)?, x(-1.0)?, x(2.0)?, x(-2.0)?);
    let (y1, y_1, y2, y_2) = (y(1.0)?, y(-1.0)?, y(2.0)?, y(-2.0)?);
    let fx = (8.0 * (x1 - x_1) - (x2 - x_2)) / (12.0 * hx);
    let fy = (8.0 * (y1 - y_1) - (y2 - y_2)) / (12.0 * hy);
    let fxx = ((16.0 * (x1 + x_1) - (x2 + x_2)) - 30.0 * f) / (12.0 * hx * hx);
    let fyy = ((16.0 * (y1 + y_1) - (y2 + y_2)) - 30.0 * f) / (12.0 * hy * hy);
    let mut fxy = 0.0;
    for (o, w) in [(1.0, 8.0), (2.0, -1.0)] {
        for (o2, w2) in [(1.0, 8.0), (2.0, -1.0)] {
            let c = |sx: f64, sy: f64| at(shifted(shifted(p, 1, sx * o * hx), 2, sy * o2 * hy));
            fxy += w * w2 * ((c(1.0, 1.0)? - c(1.0, -1.0)?) - (c(-1.0, 1.0)? - c(-1.0, -1.0)?));
        }
    }
    fxy /= 144.0 * hx * hy;
    Ok(Second { f, fx, fy, fxx, fxy, fyy })
}

/// Per-equation statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub name: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub argmax: [f64; 3],
    /// Bound this equation is held to.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equations: Vec<EquationResidual>,
    pub tolerance: f64,
    pub pass: bool,
    /// Points excluded by the field's mask predicate.
    pub masked: usize,
    /// Unmasked points where the field or its stencil could not be evaluated.
    #[serde(default)]
    pub unresolved: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ResidualReport {
    pub fn max_abs(&self) -> f64 {
        self.equations.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }

    pub fn equation(&self, name: &str) -> Option<&EquationResidual> {
        self.equations.iter().find(|e| e.name == name)
    }

    /// Joins reports over disjoint equation sets.
    pub fn merge(mut self, other: ResidualReport) -> ResidualReport {
        self.equations.extend(other.equations);
        self.pass &= other.pass;
        self.masked = self.masked.max(other.masked);
        self.unresolved += other.unresolved;
        self.notes.extend(other.notes);
        self
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.equations {
            let ok = if e.max_abs <= e.tolerance { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<24} max {:.3e}  mean {:.3e}  at ({:.4}, {:.4}, {:.4})  tol {:.1e}  {ok}",
                e.name, e.max_abs, e.mean_abs, e.argmax[0], e.argmax[1], e.argmax[2], e.tolerance
            )?;
        }
        write!(f, "masked {}  unresolved {}  pass {}", self.masked, self.unresolved, self.pass)
    }
}

enum PointOutcome {
    Masked,
    Unresolved(String),
    Residuals(Vec<f64>),
}

/// Evaluates `residual` at every grid point and aggregates per equation.
fn sweep<F>(names: Vec<String>, tolerances: Vec<f64>, tol: f64, grid: &Grid, field: &dyn Field, residual: F) -> Result<ResidualReport>
where
    F: Fn([f64; 3]) -> std::result::Result<Vec<f64>, String> + Sync,
{
    grid.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let points = grid.points();
    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .map(|&p| {
            if field.masked(p) {
                return PointOutcome::Masked;
            }
            match residual(p) {
                Ok(r) => PointOutcome::Residuals(r),
                Err(e) => PointOutcome::Unresolved(format!("at {p:?}: {e}")),
            }
        })
        .collect();
    let mut max = vec![0.0f64; names.len()];
    let mut sum = vec![0.0f64; names.len()];
    let mut argmax = vec![[f64::NAN; 3]; names.len()];
    let (mut masked, mut unresolved, mut count) = (0, 0, 0usize);
    let mut notes = Vec::new();
    for (p, o) in points.iter().zip(outcomes) {
        match o {
            PointOutcome::Masked => masked += 1,
            PointOutcome::Unresolved(msg) => {
                unresolved += 1;
                if notes.len() < 5 {
                    notes.push(msg);
                }
            }
            PointOutcome::Residuals(r) => {
                count += 1;
                for (k, v) in r.iter().enumerate() {
                    let a = if v.is_nan() { f64::INFINITY } else { v.abs() };
                    sum[k] += a;
                    if argmax[k][0].is_nan() || a > max[k] {
                        max[k] = a;
                        argmax[k] = *p;
                    }
                }
            }
        }
    }
    if count == 0 {
        notes.push("no unmasked point could be evaluated".into());
    }
    let equations: Vec<EquationResidual> = names
        .into_iter()
        .enumerate()
        .map(|(k, name)| EquationResidual {
            name,
            max_abs: max[k],
            mean_abs: if count > 0 { sum[k] / count as f64 } else { 0.0 },
            argmax: argmax[k],
            tolerance: tolerances[k],
        })
        .collect();
    let pass = count > 0 && unresolved == 0 && equations.iter().all(|e| e.max_abs <= e.tolerance);
    Ok(ResidualReport { equations, tolerance: tol, pass, masked, unresolved, notes })
}

/// Maps the system's coordinate names onto indices of `(t, x, y)`.
pub fn coordinate_axes(sys: &SystemSpec) -> Result<Vec<usize>> {
    sys.coords
        .iter()
        .map(|c| match c.as_str() {
            "t" => Ok(0),
            "x" => Ok(1),
            "y" => Ok(2),
            other => Err(Error::Unsupported(format!("grid verification needs coordinates among t, x, y; found `{other}`"))),
        })
        .collect()
}

/// `A^i(u) u_i − b(u)` on the grid, one tolerance for all equations.
pub fn pde_residuals(sys: &SystemSpec, solution: &dyn Field, grid: &Grid, tol: f64) -> Result<ResidualReport> {
    pde_residuals_with(sys, solution, grid, tol, &vec![tol; sys.m])
}

/// As [`pde_residuals`] with a bound per equation.
pub fn pde_residuals_with(
    sys: &SystemSpec,
    solution: &dyn Field,
    grid: &Grid,
    tol: f64,
    tolerances: &[f64],
) -> Result<ResidualReport> {
    if solution.components() != sys.q {
        return Err(Error::Shape(format!(
            "solution has {} components, system `{}` has {} unknowns",
            solution.components(),
            sys.name,
            sys.q
        )));
    }
    if tolerances.len() != sys.m {
        return Err(Error::Shape(format!("{} tolerances for {} equations", tolerances.len(), sys.m)));
    }
    let axes = coordinate_axes(sys)?;
    // Axes whose matrix vanishes identically need no differencing.
    let active: Vec<usize> = (0..sys.p).filter(|&i| (0..sys.q).any(|a| !sys.column_is_zero(i, a))).collect();
    let active_axes: Vec<usize> = active.iter().map(|&i| axes[i]).collect();
    let residual = |p: [f64; 3]| -> std::result::Result<Vec<f64>, String> {
        let (value, jac) = match numeric_jacobian(solution, p, &active_axes, Scheme::Central4, DEFAULT_STEP) {
            Jacobian::Value { value, jacobian } => (value, jacobian),
            Jacobian::Masked(e) => return Err(e),
        };
        let u: Vec<Complex64> = value.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coords: Vec<f64> = axes.iter().map(|&a| p[a]).collect();
        let (a, b) = sys.eval_at(&u, &coords).map_err(|e| e.to_string())?;
        Ok((0..sys.m)
            .map(|mu| {
                let mut s = -b[mu];
                for (k, &i) in active.iter().enumerate() {
                    for alpha in 0..sys.q {
                        s += a[i][(mu, alpha)] * jac[alpha][k];
                    }
                }
                s.norm()
            })
            .collect())
    };
    sweep(sys.equations.clone(), tolerances.to_vec(), tol, grid, solution, residual)
}

/// Mixed-derivative compatibility of the angle field:
/// `2(θ_x² − θ_xy − θ_y²) cos 2θ + (θ_xx + 4θ_xθ_y − θ_yy) sin 2θ`.
pub fn compatibility_residual(theta: &dyn Field, grid: &Grid, tol: f64) -> Result<ResidualReport> {
    if theta.components() != 1 {
        return Err(Error::Shape(format!("angle field must be scalar, has {} components", theta.components())));
    }
    let residual = |p: [f64; 3]| {
        let d = second_derivatives(theta, 0, p)?;
        let (s, c) = (2.0 * d.f).sin_cos();
        Ok(vec![2.0 * (d.fx * d.fx - d.fxy - d.fy * d.fy) * c + (d.fxx + 4.0 * d.fx * d.fy - d.fyy) * s])
    };
    sweep(vec!["compatibility".into()], vec![tol], tol, grid, theta, residual)
}

/// `u_xx + u_yy − a² e^u` for component `component` of `field`.
pub fn liouville_residual(field: &dyn Field, component: usize, a: f64, grid: &Grid, tol: f64) -> Result<ResidualReport> {
    if component >= field.components() {
        return Err(Error::Shape(format!("component {component} out of range")));
    }
    let residual = |p: [f64; 3]| {
        let d = second_derivatives(field, component, p)?;
        Ok(vec![d.fxx + d.fyy - a * a * d.f.exp()])
    };
    sweep(vec!["liouville".into()], vec![tol], tol, grid, field, residual)
}

/// `max |g g″ − (3/2) g′² + (Ω/2) g³|` over `r_samples` with `g = h′ + perturbation`.
///
/// `Ω` is read from the parameters for every family, so a linear `h` yields `|Ω/2|·|c₁|³`.
pub fn ode_residual_417(params: &PlasticityParams, t: f64, r_samples: &[Complex64], perturbation: f64) -> Result<f64> {
    if r_samples.is_empty() {
        return Err(Error::Input("no sample points".into()));
    }
    let model = Plasticity::new(params)?;
    let omega = omega_value(params, t)?;
    let mut worst = 0.0f64;
    for &r in r_samples {
        let hv = model.h(t, r)?;
        let g = hv.h1 + perturbation;
        let res = g * hv.h3 - 1.5 * hv.h2 * hv.h2 + 0.5 * omega * g * g * g;
        worst = worst.max(res.norm());
    }
    if !worst.is_finite() {
        return Err(Error::Eval("non-finite ODE residual".into()));
    }
    Ok(worst)
}

/// Default ODE sample set: 20 points on two circles inside `|r| ≤ 0.5`.
pub fn ode_samples() -> Vec<Complex64> {
    (0..20)
        .map(|k| {
            let radius = if k % 2 == 0 { 0.5 } else { 0.25 };
            Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / 20.0)
        })
        .collect()
}

/// `Λ^H (Λ Λ^H)^{-1}`.
pub fn right_inverse(lambda: &ComplexMatrix) -> Result<ComplexMatrix> {
    let h = lambda.transpose().conj();
    let gram = lambda.mul(&h)?;
    h.mul(&gram.inverse().map_err(|_| Error::Degenerate("wave vectors are linearly dependent".into()))?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetSample {
    pub point: [f64; 3],
    pub det_re: f64,
    pub det_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetPhiReport {
    pub samples: Vec<DetSample>,
    pub flagged: Vec<[f64; 3]>,
    pub max_dev_from_one: f64,
    pub max_abs_im: f64,
    pub masked: usize,
}

/// `det Φ` with `Φ = I − Σ_a (∂f/∂r^a) ⊗ (∂r^a/∂u)` on the grid.
///
/// `lambda` holds one invariant per row (conjugates included) over the spatial
/// axes `(x, y)`, or `(t, x, y)` when it has three columns. `d[a]` is the
/// `q × p` matrix `∂λ^a_i/∂u_β`; pass zeros for constant wave vectors.
pub fn det_phi_scan(solution: &dyn Field, lambda: &ComplexMatrix, d: &[ComplexMatrix], grid: &Grid) -> Result<DetPhiReport> {
    grid.validate()?;
    let q = solution.components();
    let k = lambda.rows();
    let p = lambda.cols();
    let axes: Vec<usize> = match p {
        2 => vec![1, 2],
        3 => vec![0, 1, 2],
        _ => return Err(Error::Shape(format!("wave vectors need 2 or 3 components, got {p}"))),
    };
    if d.len() != k || d.iter().any(|m| m.rows() != q || m.cols() != p) {
        return Err(Error::Shape(format!("expected {k} derivative matrices of shape {q}×{p}")));
    }
    let constant = d.iter().all(|m| m.max_abs() == 0.0);
    let right = right_inverse(lambda)?;
    let points = grid.points();
    let one = Complex64::new(1.0, 0.0);
    let dets: Vec<Option<Result<Complex64>>> = points
        .par_iter()
        .map(|&pt| {
            if solution.masked(pt) {
                return None;
            }
            if constant {
                return Some(Ok(one));
            }
            Some((|| {
                let jac = match numeric_jacobian(solution, pt, &axes, Scheme::Central4, DEFAULT_STEP) {
                    Jacobian::Value { jacobian, .. } => jacobian,
                    Jacobian::Masked(e) => return Err(Error::Eval(e)),
                };
                let j = ComplexMatrix::new(q, p, jac.iter().flatten().map(|&v| Complex64::new(v, 0.0)).collect())?;
                let u = j.mul(&right)?;
                let xs: Vec<Complex64> = axes.iter().map(|&a| Complex64::new(pt[a], 0.0)).collect();
                let mut phi = ComplexMatrix::identity(q);
                for (a, da) in d.iter().enumerate() {
                    let dr = da.mul_vec(&xs)?;
                    let col = u.column(a);
                    let outer: Vec<Complex64> = col.iter().flat_map(|&c| dr.iter().map(move |&v| c * v)).collect();
                    phi = phi.sub(&ComplexMatrix::new(q, q, outer)?)?;
                }
                phi.determinant()
            })())
        })
        .collect();
    let mut report = DetPhiReport { samples: Vec::new(), flagged: Vec::new(), max_dev_from_one: 0.0, max_abs_im: 0.0, masked: 0 };
    for (pt, det) in points.into_iter().zip(dets) {
        let Some(det) = det else {
            report.masked += 1;
            continue;
        };
        let det = det?;
        report.max_dev_from_one = report.max_dev_from_one.max((det - one).norm());
        report.max_abs_im = report.max_abs_im.max(det.im.abs());
        if det.norm() < CATASTROPHE_TOL {
            report.flagged.push(pt);
        }
        report.samples.push(DetSample { point: pt, det_re: det.re, det_im: det.im });
    }
    Ok(report)
}

/// Per-equation bounds for a plasticity system: the two momentum rows use `10·tol`
/// because σ itself comes from quadrature.
pub fn plasticity_tolerances(sys: &SystemSpec, tol: f64) -> Vec<f64> {
    sys.equations.iter().map(|n| if n.starts_with("sigma-") { 10.0 * tol } else { tol }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::FnField;
    use crate::systems::builtin_system;

    #[test]
    fn test_jacobian_polynomial() {
        let f = FnField::new(2, |p| Ok(vec![p[1] * p[1], p[2]]));
        let Jacobian::Value { jacobian, .. } = numeric_jacobian(&f, [0.0, 1.0, 1.0], &[1, 2], Scheme::Central4, DEFAULT_STEP)
        else {
            panic!("masked")
        };
        let want = [[2.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((jacobian[i][j] - want[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn test_jacobian_masks_failures() {
        let f = FnField::new(1, |p| if p[1] > 0.99995 { Err(Error::Domain("wall".into())) } else { Ok(vec![p[1]]) });
        assert!(matches!(numeric_jacobian(&f, [0.0, 0.9999, 0.0], &[1], Scheme::Central4, DEFAULT_STEP), Jacobian::Masked(_)));
        let nan = FnField::new(1, |_| Ok(vec![f64::NAN]));
        assert!(matches!(numeric_jacobian(&nan, [0.0; 3], &[1], Scheme::Central2, DEFAULT_STEP), Jacobian::Masked(_)));
    }

    #[test]
    fn test_grid_parsing() {
        let g: Grid = "default".parse().unwrap();
        assert_eq!(g, Grid::default());
        assert_eq!(g.points().len(), 243);
        let g: Grid = "x=0.5:2,y=-1:1,nx=17,ny=17,nt=1".parse().unwrap();
        assert_eq!(g, Grid::wave_particle());
        assert!("nx=2".parse::<Grid>().is_err());
        assert!("z=1:2".parse::<Grid>().is_err());
        assert!("x=0:0.0001,nx=9".parse::<Grid>().is_err());
    }

    #[test]
    fn test_zero_solution_homogeneous() {
        let sys = builtin_system("plasticity-subsystem").unwrap();
        let f = FnField::new(4, |_| Ok(vec![0.0; 4]));
        let r = pde_residuals(&sys, &f, &Grid::default(), 1e-12).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn test_compatibility_controls() {
        let constant = FnField::new(1, |_| Ok(vec![0.3]));
        let r = compatibility_residual(&constant, &Grid::default(), 1e-12).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        let bad = FnField::new(1, |p| Ok(vec![p[1]]));
        let r = compatibility_residual(&bad, &Grid::default(), 1e-4).unwrap();
        assert!(!r.pass);
        let e = &r.equations[0];
        let x = e.argmax[1];
        assert!((e.max_abs - 2.0 * (2.0 * x).cos().abs()).abs() < 1e-6);
    }

    #[test]
    fn test_liouville_closed_form() {
        let a = 1.3;
        let f = FnField::new(1, move |p| Ok(vec![2.0 * (2f64.sqrt() / (a * p[1])).ln()]));
        let r = liouville_residual(&f, 0, a, &Grid::wave_particle(), 1e-8).unwrap();
        assert!(r.pass, "{r}");
        let zero = FnField::new(1, |_| Ok(vec![0.0]));
        assert_eq!(liouville_residual(&zero, 0, 0.0, &Grid::wave_particle(), 1e-8).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn test_pass_is_monotone_in_tol() {
        let bad = FnField::new(1, |p| Ok(vec![p[1]]));
        let mut passed = false;
        for tol in [1e-6, 1e-3, 1.0, 3.0] {
            let r = compatibility_residual(&bad, &Grid::default(), tol).unwrap();
            assert!(!passed || r.pass);
            passed |= r.pass;
        }
        assert!(passed);
    }

    #[test]
    fn test_det_phi_synthetic() {
        let f = FnField::new(2, |p| Ok(vec![p[1], 0.0]));
        let lambda = ComplexMatrix::from_real_rows(&[&[1.0, 0.0]]).unwrap();
        let d = vec![ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap()];
        let grid = Grid::spatial([0.0, 2.0], [-1.0, 1.0], 21, 5).unwrap();
        let rep = det_phi_scan(&f, &lambda, &d, &grid).unwrap();
        assert_eq!(rep.flagged.len(), 5);
        assert!(rep.flagged.iter().all(|p| p[1] == 1.0));
        for s in &rep.samples {
            assert!((s.det_re - (1.0 - s.point[1])).abs() < 1e-9);
        }
    }

    #[test]
    fn test_det_phi_constant_lambda() {
        let f = FnField::new(2, |p| Ok(vec![p[1].sin(), p[2]]));
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let lambda = ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]]).unwrap();
        let d = vec![ComplexMatrix::zeros(2, 2); 2];
        let rep = det_phi_scan(&f, &lambda, &d, &Grid::default()).unwrap();
        assert_eq!(rep.max_dev_from_one, 0.0);
        assert!(rep.flagged.is_empty());
    }
}

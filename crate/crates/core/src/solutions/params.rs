//! Parameters of the plasticity solution families.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::systems::{parse_expression_in, Compiled, Expr};
use crate::{Error, Result};

/// A complex coefficient as a function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Coeff {
    /// `a e^{-s t} + i b e^{-q t}`.
    Damped { a: f64, s: f64, b: f64, q: f64 },
    /// An expression in `t`.
    Expr(String),
    /// A constant `[re, im]`.
    Const([f64; 2]),
}

impl Coeff {
    pub fn constant(re: f64, im: f64) -> Self {
        Coeff::Const([re, im])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    General,
    #[serde(rename = "case-i")]
    CaseI,
    #[serde(rename = "case-ii")]
    CaseII,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "general" => Ok(Family::General),
            "case-i" => Ok(Family::CaseI),
            "case-ii" => Ok(Family::CaseII),
            other => Err(Error::Input(format!("unknown family `{other}`; expected general, case-i or case-ii"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::General => "general",
            Family::CaseI => "case-i",
            Family::CaseII => "case-ii",
        }
    }
}

fn default_c1() -> Coeff {
    Coeff::constant(1.0, 0.0)
}

fn default_zero() -> Coeff {
    Coeff::constant(0.0, 0.0)
}

fn default_rho() -> f64 {
    1.0
}

fn default_potential() -> String {
    "0".into()
}

fn default_mask_radius() -> f64 {
    0.1
}

/// JSON form of the plasticity parameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticityParams {
    #[serde(default)]
    pub family: Family,
    #[serde(default = "default_c1")]
    pub c1: Coeff,
    #[serde(default = "default_zero")]
    pub c2: Coeff,
    #[serde(default = "default_zero")]
    pub c3: Coeff,
    /// Separation constant; only read by the general family.
    #[serde(rename = "Omega", default = "default_c1")]
    pub omega: Coeff,
    #[serde(default = "default_zero")]
    pub sigma0: Coeff,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(rename = "V", default = "default_potential")]
    pub potential: String,
    /// Lower ends of the σ quadrature paths.
    #[serde(default)]
    pub x_ref: f64,
    #[serde(default)]
    pub y_ref: f64,
    /// Points with `|r + c₂| <` this radius are masked for case ii.
    #[serde(default = "default_mask_radius")]
    pub mask_radius: f64,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl PlasticityParams {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Evaluable form of [`Coeff`].
#[derive(Clone, Debug)]
pub(crate) enum CoeffFn {
    Damped { a: f64, s: f64, b: f64, q: f64 },
    Expr { value: Compiled, derivative: Option<Compiled> },
    Const(Complex64),
}

/// Step for differencing expression coefficients that have no symbolic derivative.
const TIME_STEP: f64 = 1e-6;

impl CoeffFn {
    pub(crate) fn new(c: &Coeff, what: &str) -> Result<Self> {
        Ok(match c {
            Coeff::Damped { a, s, b, q } => {
                if ![a, s, b, q].iter().all(|v| v.is_finite()) {
                    return Err(Error::Config(format!("{what}: damped coefficients must be finite")));
                }
                CoeffFn::Damped { a: *a, s: *s, b: *b, q: *q }
            }
            Coeff::Expr(text) => {
                let e: Expr = parse_expression_in(text, &["t"]).map_err(|err| Error::Config(format!("{what}: {err}")))?;
                let derivative = e.derivative("t").ok().map(|d| d.compile(&["t"])).transpose()?;
                CoeffFn::Expr { value: e.compile(&["t"])?, derivative }
            }
            Coeff::Const([re, im]) => CoeffFn::Const(Complex64::new(*re, *im)),
        })
    }

    pub(crate) fn eval(&self, t: f64) -> Result<Complex64> {
        match self {
            CoeffFn::Damped { a, s, b, q } => Ok(Complex64::new(a * (-s * t).exp(), b * (-q * t).exp())),
            CoeffFn::Expr { value, .. } => value.eval(&[Complex64::new(t, 0.0)]),
            CoeffFn::Const(z) => Ok(*z),
        }
    }

    pub(crate) fn derivative(&self, t: f64) -> Result<Complex64> {
        match self {
            CoeffFn::Damped { a, s, b, q } => {
                Ok(Complex64::new(-s * a * (-s * t).exp(), -q * b * (-q * t).exp()))
            }
            CoeffFn::Expr { derivative: Some(d), .. } => d.eval(&[Complex64::new(t, 0.0)]),
            CoeffFn::Expr { value, derivative: None } => {
                let f = |tt: f64| value.eval(&[Complex64::new(tt, 0.0)]);
                Ok((f(t + TIME_STEP)? - f(t - TIME_STEP)?) / (2.0 * TIME_STEP))
            }
            CoeffFn::Const(_) => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    /// Real-valued reading with an imaginary-part guard.
    pub(crate) fn eval_real(&self, t: f64, what: &str) -> Result<f64> {
        let z = self.eval(t)?;
        if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
            return Err(Error::Input(format!("{what} must be real, got {z} at t = {t}")));
        }
        Ok(z.re)
    }
}

/// Draws damped general-family parameters that are well inside the domain of
/// `erf⁻¹` and keep the angle field away from its branch cut on the default
/// grid `[0,1] × [−1,1]²`.
///
/// The draw is deterministic in `seed`. Acceptance is decided by
/// [`super::plasticity::admissible_on_default_grid`].
pub fn random_damped_params(seed: u64, potential: &str) -> Result<PlasticityParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let damped = |amp: f64, rng: &mut ChaCha8Rng| Coeff::Damped {
            a: rng.random_range(-amp..amp),
            s: rng.random_range(0.2..1.5),
            b: rng.random_range(-amp..amp),
            q: rng.random_range(0.2..1.5),
        };
        let c1 = damped(0.3, &mut rng);
        let c2 = damped(0.2, &mut rng);
        let c3 = damped(1.0, &mut rng);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let omega = Coeff::Damped { a: sign * rng.random_range(0.5..2.0), s: rng.random_range(0.2..1.5), b: 0.0, q: 1.0 };
        let sigma0 = Coeff::Damped { a: rng.random_range(-1.0..1.0), s: rng.random_range(0.2..1.5), b: 0.0, q: 1.0 };
        let params = PlasticityParams {
            family: Family::General,
            c1,
            c2,
            c3,
            omega,
            sigma0,
            potential: potential.to_string(),
            ..PlasticityParams::default()
        };
        if super::plasticity::admissible_on_default_grid(&params)? {
            return Ok(params);
        }
    }
    Err(Error::Convergence { iterations: 10_000, last: Complex64::new(f64::NAN, f64::NAN) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_json_defaults_and_forms() {
        let p = PlasticityParams::from_json(r#"{"family":"case-i","c1":{"const":[1,0]}}"#).unwrap();
        assert_eq!(p.family, Family::CaseI);
        assert_eq!(p.c1, Coeff::Const([1.0, 0.0]));
        assert_eq!(p.rho, 1.0);
        assert_eq!(p.potential, "0");
        let p = PlasticityParams::from_json(
            r#"{"c1":{"damped":{"a":0.2,"s":0.5,"b":-0.1,"q":1.0}},"c2":{"expr":"0.1*sin(t)"},"Omega":{"const":[2,0]},"V":"x*y*exp(-t)"}"#,
        )
        .unwrap();
        assert_eq!(p.family, Family::General);
        assert!(matches!(p.c2, Coeff::Expr(_)));
        assert!(PlasticityParams::from_json(r#"{"c9":1}"#).is_err());
        for f in [Family::General, Family::CaseI, Family::CaseII] {
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{}\"", f.name()));
            assert_eq!(PlasticityParams::from_json(&format!(r#"{{"family":"{}"}}"#, f.name())).unwrap().family, f);
        }
    }

    #[test]
    fn test_damped_derivative_analytic() {
        let f = CoeffFn::new(&Coeff::Damped { a: 0.7, s: 0.4, b: -0.3, q: 1.3 }, "c").unwrap();
        let t = 0.6;
        let h = 1e-5;
        let fd = (f.eval(t + h).unwrap() - f.eval(t - h).unwrap()) / (2.0 * h);
        assert!((fd - f.derivative(t).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn test_expression_coefficient() {
        let f = CoeffFn::new(&Coeff::Expr("exp(-t) + 2i*t".into()), "c").unwrap();
        let d = f.derivative(0.5).unwrap();
        assert!((d - Complex64::new(-(-0.5f64).exp(), 2.0)).norm() < 1e-14);
        let g = CoeffFn::new(&Coeff::Expr("abs(t)".into()), "c").unwrap();
        assert!((g.derivative(0.5).unwrap() - 1.0).norm() < 1e-8);
        assert!(CoeffFn::new(&Coeff::Expr("x".into()), "c").is_err());
    }

    #[test]
    fn test_random_params_deterministic() {
        let a = random_damped_params(1, "0").unwrap();
        let b = random_damped_params(1, "0").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_damped_params(2, "0").unwrap());
    }
}

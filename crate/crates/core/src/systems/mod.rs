//! Quasilinear systems `A^i(u) u_i = b(u)` with expression-valued entries.

mod expr;

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::ComplexMatrix;
use crate::{Error, Result};

pub use expr::{parse_expression, parse_expression_in, BinOp, Compiled, Expr, Func};

/// A first-order quasilinear system.
///
/// Row `μ` of the system reads `Σ_i Σ_α A^i[μ][α](u, x) ∂u^α/∂x^i = b[μ](u, x)`.
/// Entries may reference the unknowns and the independent coordinates.
/// Named parameters are substituted as numbers when the system is built.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub coords: Vec<String>,
    pub vars: Vec<String>,
    pub equations: Vec<String>,
    a: Vec<Vec<Vec<Expr>>>,
    b: Vec<Expr>,
    a_compiled: Vec<Vec<Vec<Compiled>>>,
    b_compiled: Vec<Compiled>,
}

/// JSON shape of a user-supplied system.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub vars: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<String>>>,
    pub b: Vec<String>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub coords: Option<Vec<String>>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub equations: Option<Vec<String>>,
}

impl SystemSpec {
    /// Validates shapes, substitutes parameters and compiles every entry.
    pub fn new(
        name: &str,
        coords: Vec<String>,
        vars: Vec<String>,
        a: Vec<Vec<Vec<Expr>>>,
        b: Vec<Expr>,
        params: &BTreeMap<String, f64>,
        equations: Option<Vec<String>>,
    ) -> Result<Self> {
        let p = a.len();
        if p == 0 {
            return Err(Error::Shape("system needs at least one coefficient matrix".into()));
        }
        if coords.len() != p {
            return Err(Error::Shape(format!("{} coordinate names for p = {p}", coords.len())));
        }
        let m = a[0].len();
        let q = vars.len();
        if m == 0 || q == 0 {
            return Err(Error::Shape("system must have at least one equation and one unknown".into()));
        }
        for (i, mat) in a.iter().enumerate() {
            let cols = mat.first().map_or(0, Vec::len);
            if mat.len() != m || mat.iter().any(|row| row.len() != cols) || cols != q {
                let shape = format!("{}x{}", mat.len(), cols);
                return Err(Error::Shape(format!("A[{i}] has shape {shape}, expected {m}x{q}")));
            }
        }
        if b.len() != m {
            return Err(Error::Shape(format!("b has length {}, expected {m}", b.len())));
        }
        let mut names: Vec<&str> = vars.iter().map(String::as_str).collect();
        names.extend(coords.iter().map(String::as_str));
        for (k, n) in names.iter().enumerate() {
            if names[..k].contains(n) {
                return Err(Error::Input(format!("name `{n}` is declared twice")));
            }
        }
        let bind = |e: &Expr| {
            params
                .iter()
                .fold(e.clone(), |acc, (n, v)| acc.substitute(n, &Expr::num(*v)))
        };
        let a: Vec<Vec<Vec<Expr>>> =
            a.iter().map(|mat| mat.iter().map(|row| row.iter().map(bind).collect()).collect()).collect();
        let b: Vec<Expr> = b.iter().map(bind).collect();
        let mut a_compiled = Vec::with_capacity(p);
        for (i, mat) in a.iter().enumerate() {
            let mut cm = Vec::with_capacity(m);
            for (r, row) in mat.iter().enumerate() {
                let mut cr = Vec::with_capacity(q);
                for (c, e) in row.iter().enumerate() {
                    cr.push(e.compile(&names).map_err(|err| locate(err, &format!("A[{i}][{r}][{c}]")))?);
                }
                cm.push(cr);
            }
            a_compiled.push(cm);
        }
        let b_compiled = b
            .iter()
            .enumerate()
            .map(|(r, e)| e.compile(&names).map_err(|err| locate(err, &format!("b[{r}]"))))
            .collect::<Result<Vec<_>>>()?;
        let equations = match equations {
            Some(eq) if eq.len() == m => eq,
            Some(eq) => return Err(Error::Shape(format!("{} equation names for m = {m}", eq.len()))),
            None => (0..m).map(|k| format!("eq{k}")).collect(),
        };
        Ok(Self { name: name.to_string(), p, q, m, coords, vars, equations, a, b, a_compiled, b_compiled })
    }

    pub fn a_expr(&self, i: usize, row: usize, col: usize) -> &Expr {
        &self.a[i][row][col]
    }

    pub fn b_expr(&self, row: usize) -> &Expr {
        &self.b[row]
    }

    /// True when every source entry is a literal zero.
    pub fn is_homogeneous(&self) -> bool {
        self.b.iter().all(Expr::is_zero)
    }

    /// True when column `alpha` of `A^i` is a literal zero for every row.
    pub fn column_is_zero(&self, i: usize, alpha: usize) -> bool {
        self.a_compiled[i].iter().all(|row| row[alpha].is_zero())
    }

    /// Numeric `A^i(u, x)` and `b(u, x)`.
    pub fn eval_at(&self, u: &[Complex64], x: &[f64]) -> Result<(Vec<ComplexMatrix>, Vec<Complex64>)> {
        let slots = self.slots(u, x)?;
        let mut mats = Vec::with_capacity(self.p);
        for (i, mat) in self.a_compiled.iter().enumerate() {
            let mut data = Vec::with_capacity(self.m * self.q);
            for (r, row) in mat.iter().enumerate() {
                for (c, e) in row.iter().enumerate() {
                    data.push(e.eval(&slots).map_err(|err| locate(err, &format!("A[{i}][{r}][{c}]")))?);
                }
            }
            mats.push(ComplexMatrix::new(self.m, self.q, data)?);
        }
        Ok((mats, self.eval_b(&slots)?))
    }

    /// Source vector only.
    pub fn eval_source(&self, u: &[Complex64], x: &[f64]) -> Result<Vec<Complex64>> {
        self.eval_b(&self.slots(u, x)?)
    }

    fn eval_b(&self, slots: &[Complex64]) -> Result<Vec<Complex64>> {
        self.b_compiled
            .iter()
            .enumerate()
            .map(|(r, e)| e.eval(slots).map_err(|err| locate(err, &format!("b[{r}]"))))
            .collect()
    }

    fn slots(&self, u: &[Complex64], x: &[f64]) -> Result<Vec<Complex64>> {
        if u.len() != self.q {
            return Err(Error::Shape(format!("u has length {}, system has q = {}", u.len(), self.q)));
        }
        if x.len() != self.p {
            return Err(Error::Shape(format!("x has length {}, system has p = {}", x.len(), self.p)));
        }
        let mut slots = u.to_vec();
        slots.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        Ok(slots)
    }
}

fn locate(err: Error, at: &str) -> Error {
    match err {
        Error::Eval(msg) => Error::Eval(format!("{at}: {msg}")),
        Error::UnknownIdentifier(n) => Error::Config(format!("{at}: unknown identifier `{n}`")),
        other => other,
    }
}

/// `A^i(u)` and `b(u)` with coordinates fixed at the origin.
pub fn eval_system(sys: &SystemSpec, u: &[Complex64]) -> Result<(Vec<ComplexMatrix>, Vec<Complex64>)> {
    sys.eval_at(u, &vec![0.0; sys.p])
}

/// Builds a system from a JSON document.
pub fn parse_system_config(document: &str) -> Result<SystemSpec> {
    let doc: SystemDocument = serde_json::from_str(document)?;
    system_from_document(&doc)
}

pub fn system_from_document(doc: &SystemDocument) -> Result<SystemSpec> {
    if doc.vars.len() != doc.q {
        return Err(Error::Config(format!("{} names in vars but q = {}", doc.vars.len(), doc.q)));
    }
    if doc.a.len() != doc.p {
        return Err(Error::Shape(format!("{} matrices in A but p = {}", doc.a.len(), doc.p)));
    }
    for (i, mat) in doc.a.iter().enumerate() {
        let cols = mat.first().map_or(0, Vec::len);
        if mat.len() != doc.m || cols != doc.q || mat.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "A[{i}] has shape {}x{cols}, expected {}x{}",
                mat.len(),
                doc.m,
                doc.q
            )));
        }
    }
    let coords = doc
        .coords
        .clone()
        .unwrap_or_else(|| if doc.p == 2 { vec!["x".into(), "y".into()] } else { (1..=doc.p).map(|k| format!("x{k}")).collect() });
    let mut allowed: Vec<&str> = doc.vars.iter().map(String::as_str).collect();
    allowed.extend(coords.iter().map(String::as_str));
    allowed.extend(doc.params.keys().map(String::as_str));
    let parse = |text: &str, at: String| {
        parse_expression_in(text, &allowed).map_err(|err| match err {
            Error::Syntax { offset, message } => Error::Syntax { offset, message: format!("{at}: {message}") },
            Error::UnknownIdentifier(n) => Error::Config(format!("{at}: unknown identifier `{n}`")),
            Error::UnknownFunction(n) => Error::Config(format!("{at}: unknown function `{n}`")),
            other => other,
        })
    };
    let mut a = Vec::with_capacity(doc.p);
    for (i, mat) in doc.a.iter().enumerate() {
        let mut rows = Vec::with_capacity(doc.m);
        for (r, row) in mat.iter().enumerate() {
            rows.push(
                row.iter()
                    .enumerate()
                    .map(|(c, t)| parse(t, format!("A[{i}][{r}][{c}]")))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        a.push(rows);
    }
    let b = doc.b.iter().enumerate().map(|(r, t)| parse(t, format!("b[{r}]"))).collect::<Result<Vec<_>>>()?;
    let name = if doc.name.is_empty() { "custom" } else { doc.name.as_str() };
    SystemSpec::new(name, coords, doc.vars.clone(), a, b, &doc.params, doc.equations.clone())
}

/// Resolves `builtin:NAME` or a path to a JSON document.
pub fn load_system(spec: &str, params: &BuiltinParams) -> Result<SystemSpec> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return builtin_system_with(name, params);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read system file {}: {e}", path.display())))?;
    parse_system_config(&text)
}

pub const BUILTIN_NAMES: [&str; 4] = ["plasticity-full", "plasticity-reduced", "plasticity-subsystem", "wave-particle"];

/// Parameters consumed by the builtin systems.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltinParams {
    /// Density in the momentum equations of `plasticity-full`.
    pub rho: f64,
    /// Work-function potential `V(t, x, y)` for `plasticity-full`.
    pub potential: Expr,
    /// Coupling constant of `wave-particle`.
    pub a: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self { rho: 1.0, potential: Expr::num(0.0), a: 1.0 }
    }
}

/// A builtin system with default parameters (ρ = 1, V = 0, a = 1).
pub fn builtin_system(name: &str) -> Result<SystemSpec> {
    builtin_system_with(name, &BuiltinParams::default())
}

pub fn builtin_system_with(name: &str, params: &BuiltinParams) -> Result<SystemSpec> {
    match name {
        "plasticity-full" => plasticity_full(params),
        "plasticity-reduced" => plasticity_reduced(),
        "plasticity-subsystem" => plasticity_subsystem(),
        "wave-particle" => wave_particle(params.a),
        other => Err(Error::Input(format!(
            "unknown builtin system `{other}`; available: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn e(text: &str) -> Expr {
    parse_expression(text).expect("builtin expression")
}

fn rows(table: &[&[&str]]) -> Vec<Vec<Expr>> {
    table.iter().map(|row| row.iter().map(|t| e(t)).collect()).collect()
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn plasticity_subsystem() -> Result<SystemSpec> {
    let a1 = rows(&[&["0", "-1", "0", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "-1"]]);
    let a2 = rows(&[&["1", "0", "0", "0"], &["0", "0", "0", "1"], &["0", "0", "1", "0"]]);
    SystemSpec::new(
        "plasticity-subsystem",
        strings(&["x", "y"]),
        strings(&["phi", "psi", "u", "v"]),
        vec![a1, a2],
        vec![Expr::num(0.0); 3],
        &BTreeMap::new(),
        Some(strings(&["curl-free-gradient", "incompressibility", "irrotationality"])),
    )
}

fn wave_particle(a: f64) -> Result<SystemSpec> {
    let a1 = rows(&[&["1", "0"], &["0", "-1"]]);
    let a2 = rows(&[&["0", "1"], &["1", "0"]]);
    let b = vec![e("sqrt(2)*a*exp(u/2)*sin(phi/2)"), e("-sqrt(2)*a*exp(u/2)*cos(phi/2)")];
    let params = BTreeMap::from([("a".to_string(), a)]);
    SystemSpec::new(
        "wave-particle",
        strings(&["x", "y"]),
        strings(&["u", "phi"]),
        vec![a1, a2],
        b,
        &params,
        Some(strings(&["wave-particle-1", "wave-particle-2"])),
    )
}

/// Partial derivative of the potential, analytic when possible.
fn potential_derivative(v: &Expr, coord: &str) -> Expr {
    if let Ok(d) = v.derivative(coord) {
        return d;
    }
    // Fourth-order central difference built by substitution.
    let h = 1e-3;
    let shifted = |k: f64| {
        v.substitute(coord, &Expr::bin(BinOp::Add, Expr::var(coord), Expr::num(k * h)))
    };
    let num = Expr::bin(
        BinOp::Add,
        Expr::bin(BinOp::Sub, shifted(-2.0), shifted(2.0)),
        Expr::bin(BinOp::Mul, Expr::num(8.0), Expr::bin(BinOp::Sub, shifted(1.0), shifted(-1.0))),
    );
    Expr::bin(BinOp::Div, num, Expr::num(12.0 * h))
}

fn plasticity_full(params: &BuiltinParams) -> Result<SystemSpec> {
    if !(params.rho > 0.0 && params.rho.is_finite()) {
        return Err(Error::Input(format!("density must be positive, got {}", params.rho)));
    }
    for n in params.potential.free_vars() {
        if !["t", "x", "y"].contains(&n.as_str()) {
            return Err(Error::Config(format!("potential may only depend on t, x, y; found `{n}`")));
        }
    }
    let at = rows(&[
        &["0", "0", "-rho", "0"],
        &["0", "0", "0", "-rho"],
        &["0", "0", "0", "0"],
        &["0", "0", "0", "0"],
        &["0", "0", "0", "0"],
    ]);
    let ax = rows(&[
        &["1", "-cos(2*theta)", "-rho*u", "0"],
        &["0", "-sin(2*theta)", "0", "-rho*u"],
        &["0", "0", "cos(2*theta)", "sin(2*theta)"],
        &["0", "0", "1", "0"],
        &["0", "0", "0", "-1"],
    ]);
    let ay = rows(&[
        &["0", "-sin(2*theta)", "-rho*v", "0"],
        &["1", "cos(2*theta)", "0", "-rho*v"],
        &["0", "0", "sin(2*theta)", "-cos(2*theta)"],
        &["0", "0", "0", "1"],
        &["0", "0", "1", "0"],
    ]);
    let force = |coord: &str| {
        Expr::Neg(Box::new(Expr::bin(BinOp::Mul, Expr::var("rho"), potential_derivative(&params.potential, coord))))
    };
    let b = vec![force("x"), force("y"), Expr::num(0.0), Expr::num(0.0), Expr::num(0.0)];
    let p = BTreeMap::from([("rho".to_string(), params.rho)]);
    SystemSpec::new(
        "plasticity-full",
        strings(&["t", "x", "y"]),
        strings(&["sigma", "theta", "u", "v"]),
        vec![at, ax, ay],
        b,
        &p,
        Some(strings(&["sigma-x-momentum", "sigma-y-momentum", "saint-venant", "incompressibility", "irrotationality"])),
    )
}

/// First-order quasilinear form of the reduced plasticity problem.
///
/// Unknowns are θ and its gradient (φ, ψ) = (θ_x, θ_y) plus the velocities.
/// The compatibility equation for σ becomes linear in (φ_x, φ_y, ψ_y).
fn plasticity_reduced() -> Result<SystemSpec> {
    let ax = rows(&[
        &["1", "0", "0", "0", "0"],
        &["0", "0", "0", "0", "0"],
        &["0", "0", "-1", "0", "0"],
        &["0", "sin(2*theta)", "0", "0", "0"],
        &["0", "0", "0", "cos(2*theta)", "sin(2*theta)"],
        &["0", "0", "0", "1", "0"],
        &["0", "0", "0", "0", "-1"],
    ]);
    let ay = rows(&[
        &["0", "0", "0", "0", "0"],
        &["1", "0", "0", "0", "0"],
        &["0", "1", "0", "0", "0"],
        &["0", "-2*cos(2*theta)", "-sin(2*theta)", "0", "0"],
        &["0", "0", "0", "sin(2*theta)", "-cos(2*theta)"],
        &["0", "0", "0", "0", "1"],
        &["0", "0", "0", "1", "0"],
    ]);
    let b = vec![
        e("phi"),
        e("psi"),
        Expr::num(0.0),
        e("-2*(phi^2 - psi^2)*cos(2*theta) - 4*phi*psi*sin(2*theta)"),
        Expr::num(0.0),
        Expr::num(0.0),
        Expr::num(0.0),
    ];
    SystemSpec::new(
        "plasticity-reduced",
        strings(&["x", "y"]),
        strings(&["theta", "phi", "psi", "u", "v"]),
        vec![ax, ay],
        b,
        &BTreeMap::new(),
        Some(strings(&[
            "theta-x",
            "theta-y",
            "curl-free-gradient",
            "compatibility",
            "saint-venant",
            "incompressibility",
            "irrotationality",
        ])),
    )
}

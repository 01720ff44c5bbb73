//! A small complex-valued expression language.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary `-`, `^` (right associative).
//! So `-x^2` is `-(x^2)` and `2^-1` is `0.5`. Numbers accept a trailing `i`
//! (`2i`, `0.5i`); `pi` and `i` are predefined constants.

use std::fmt;

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Arctan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Re,
    Im,
    Conj,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Arctan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Re,
        Func::Im,
        Func::Conj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Re => "re",
            Func::Im => "im",
            Func::Conj => "conj",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// True when the function is complex-differentiable away from its singular points.
    pub fn is_holomorphic(self) -> bool {
        !matches!(self, Func::Abs | Func::Re | Func::Im | Func::Conj)
    }

    fn apply(self, z: Complex64) -> Result<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let out = match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => {
                let c = z.cos();
                if c == zero {
                    return Err(Error::Eval(format!("tan pole at {z}")));
                }
                z.sin() / c
            }
            Func::Arctan => {
                if z.re == 0.0 && z.im.abs() == 1.0 {
                    return Err(Error::Eval(format!("arctan branch point at {z}")));
                }
                z.atan()
            }
            Func::Exp => z.exp(),
            Func::Ln => {
                if z == zero {
                    return Err(Error::Eval("ln(0)".into()));
                }
                z.ln()
            }
            Func::Sqrt => z.sqrt(),
            Func::Abs => Complex64::new(z.norm(), 0.0),
            Func::Re => Complex64::new(z.re, 0.0),
            Func::Im => Complex64::new(z.im, 0.0),
            Func::Conj => z.conj(),
        };
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Complex64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

fn binary(op: BinOp, a: Complex64, b: Complex64) -> Result<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let out = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == zero {
                return Err(Error::Eval("division by zero".into()));
            }
            a / b
        }
        BinOp::Pow => power(a, b)?,
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Eval(format!("non-finite result of {a} {op:?} {b}")))
    }
}

/// Negation as `0 - z`, so a negated real literal keeps a `+0` imaginary part
/// and sits on the same side of branch cuts as the literal it prints as.
fn negate(z: Complex64) -> Complex64 {
    Complex64::new(0.0, 0.0) - z
}

fn power(a: Complex64, b: Complex64) -> Result<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
        let n = b.re as i32;
        if a == zero && n < 0 {
            return Err(Error::Eval("zero raised to a negative power".into()));
        }
        return Ok(a.powi(n));
    }
    if a == zero {
        return if b.re > 0.0 { Ok(zero) } else { Err(Error::Eval("0^w with Re w <= 0".into())) };
    }
    Ok((b * a.ln()).exp())
}

impl Expr {
    pub fn num(re: f64) -> Expr {
        Expr::Num(Complex64::new(re, 0.0))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Evaluates with variables looked up by name.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<Complex64>) -> Result<Complex64> {
        match self {
            Expr::Num(z) => Ok(*z),
            Expr::Var(name) => lookup(name).ok_or_else(|| Error::UnknownIdentifier(name.clone())),
            Expr::Neg(a) => Ok(negate(a.eval_with(lookup)?)),
            Expr::Bin(op, a, b) => binary(*op, a.eval_with(lookup)?, b.eval_with(lookup)?),
            Expr::Call(f, a) => f.apply(a.eval_with(lookup)?),
        }
    }

    pub fn eval(&self, bindings: &[(&str, Complex64)]) -> Result<Complex64> {
        self.eval_with(&|name| bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
    }

    pub fn eval_real(&self, bindings: &[(&str, f64)]) -> Result<Complex64> {
        self.eval_with(&|name| {
            bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| Complex64::new(*v, 0.0))
        })
    }

    /// Free variable names in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                Expr::Neg(a) | Expr::Call(_, a) => walk(a, out),
                Expr::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(n) => n == name,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(name),
            Expr::Bin(_, a, b) => a.depends_on(name) || b.depends_on(name),
        }
    }

    /// True when the expression is a literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(z) if *z == Complex64::new(0.0, 0.0))
    }

    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(n) if n == name => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(name, with))),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(name, with)),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(name, with), b.substitute(name, with)),
        }
    }

    /// Symbolic derivative with respect to `name`.
    ///
    /// Valid for holomorphic expressions; `abs`, `re`, `im` and `conj` of
    /// anything depending on `name` are rejected as unsupported.
    pub fn derivative(&self, name: &str) -> Result<Expr> {
        use BinOp::*;
        if !self.depends_on(name) {
            return Ok(Expr::num(0.0));
        }
        let d = match self {
            Expr::Num(_) => Expr::num(0.0),
            Expr::Var(_) => Expr::num(1.0),
            Expr::Neg(a) => neg(a.derivative(name)?),
            Expr::Bin(Add, a, b) => add(a.derivative(name)?, b.derivative(name)?),
            Expr::Bin(Sub, a, b) => sub(a.derivative(name)?, b.derivative(name)?),
            Expr::Bin(Mul, a, b) => add(
                mul(a.derivative(name)?, (**b).clone()),
                mul((**a).clone(), b.derivative(name)?),
            ),
            Expr::Bin(Div, a, b) => {
                let num = sub(
                    mul(a.derivative(name)?, (**b).clone()),
                    mul((**a).clone(), b.derivative(name)?),
                );
                Expr::bin(Div, num, Expr::bin(Pow, (**b).clone(), Expr::num(2.0)))
            }
            Expr::Bin(Pow, a, b) if !b.depends_on(name) => {
                // d(a^c) = c a^(c-1) a'
                let lowered = Expr::bin(Pow, (**a).clone(), sub((**b).clone(), Expr::num(1.0)));
                mul(mul((**b).clone(), lowered), a.derivative(name)?)
            }
            Expr::Bin(Pow, a, b) => {
                // a^b = exp(b ln a)
                let inner = mul((**b).clone(), Expr::call(Func::Ln, (**a).clone()));
                mul(self.clone(), inner.derivative(name)?)
            }
            Expr::Call(f, a) => {
                let inner = a.derivative(name)?;
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => neg(Expr::call(Func::Sin, a)),
                    Func::Tan => Expr::bin(Div, Expr::num(1.0), Expr::bin(Pow, Expr::call(Func::Cos, a), Expr::num(2.0))),
                    Func::Arctan => Expr::bin(Div, Expr::num(1.0), add(Expr::num(1.0), Expr::bin(Pow, a, Expr::num(2.0)))),
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Ln => Expr::bin(Div, Expr::num(1.0), a),
                    Func::Sqrt => Expr::bin(Div, Expr::num(0.5), Expr::call(Func::Sqrt, a)),
                    Func::Abs | Func::Re | Func::Im | Func::Conj => {
                        return Err(Error::Unsupported(format!(
                            "`{}` is not complex-differentiable",
                            f.name()
                        )))
                    }
                };
                mul(outer, inner)
            }
        };
        Ok(d)
    }

    /// Resolves variables to slot indices for fast repeated evaluation.
    pub fn compile(&self, slots: &[&str]) -> Result<Compiled> {
        let node = match self {
            Expr::Num(z) => Compiled::Num(*z),
            Expr::Var(n) => match slots.iter().position(|s| s == n) {
                Some(k) => Compiled::Slot(k),
                None => return Err(Error::UnknownIdentifier(n.clone())),
            },
            Expr::Neg(a) => Compiled::Neg(Box::new(a.compile(slots)?)),
            Expr::Bin(op, a, b) => Compiled::Bin(*op, Box::new(a.compile(slots)?), Box::new(b.compile(slots)?)),
            Expr::Call(f, a) => Compiled::Call(*f, Box::new(a.compile(slots)?)),
        };
        Ok(node)
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(z) if *z == Complex64::new(v, 0.0))
}

fn neg(a: Expr) -> Expr {
    if a.is_zero() {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::bin(BinOp::Add, a, b)
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        a
    } else if a.is_zero() {
        neg(b)
    } else {
        Expr::bin(BinOp::Sub, a, b)
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        Expr::num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::bin(BinOp::Mul, a, b)
    }
}

fn fmt_real(x: f64) -> String {
    let s = format!("{x:?}");
    if x < 0.0 || s.starts_with('-') {
        format!("({s})")
    } else {
        s
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised output that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(z) if z.im == 0.0 => write!(f, "{}", fmt_real(z.re)),
            Expr::Num(z) => write!(f, "({} + {}*i)", fmt_real(z.re), fmt_real(z.im)),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Expression tree with variables resolved to positions in a value slice.
#[derive(Clone, Debug, PartialEq)]
pub enum Compiled {
    Num(Complex64),
    Slot(usize),
    Neg(Box<Compiled>),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
    Call(Func, Box<Compiled>),
}

impl Compiled {
    pub fn eval(&self, slots: &[Complex64]) -> Result<Complex64> {
        match self {
            Compiled::Num(z) => Ok(*z),
            Compiled::Slot(k) => slots
                .get(*k)
                .copied()
                .ok_or_else(|| Error::Eval(format!("slot {k} unbound"))),
            Compiled::Neg(a) => Ok(negate(a.eval(slots)?)),
            Compiled::Bin(op, a, b) => binary(*op, a.eval(slots)?, b.eval(slots)?),
            Compiled::Call(f, a) => f.apply(a.eval(slots)?),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Compiled::Num(z) if *z == Complex64::new(0.0, 0.0))
    }
}

/// Parses `text`, leaving every identifier other than `pi` and `i` free.
pub fn parse_expression(text: &str) -> Result<Expr> {
    Parser::new(text, None).parse()
}

/// Parses `text` and rejects identifiers outside `allowed`.
pub fn parse_expression_in(text: &str, allowed: &[&str]) -> Result<Expr> {
    Parser::new(text, Some(allowed)).parse()
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    allowed: Option<&'a [&'a str]>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, allowed: Option<&'a [&'a str]>) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0, allowed }
    }

    fn error<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { offset, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Expr> {
        if self.src.trim().is_empty() {
            return self.error(0, "empty expression");
        }
        let e = self.expr()?;
        if let Some(c) = self.peek() {
            return self.error(self.pos, format!("unexpected `{}`", c as char));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right-associative; the exponent may carry its own sign.
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            None => return self.error(self.pos, "unexpected end of input"),
            Some(_) => self.pos,
        };
        let c = self.bytes[start];
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            return match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    Ok(inner)
                }
                _ => self.error(self.pos, "expected `)`"),
            };
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < self.bytes.len() && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_') {
                end += 1;
            }
            let name = &self.src[start..end];
            self.pos = end;
            if self.peek() == Some(b'(') {
                let Some(func) = Func::from_name(name) else {
                    return Err(Error::UnknownFunction(name.to_string()));
                };
                self.pos += 1;
                let arg = self.expr()?;
                return match self.peek() {
                    Some(b')') => {
                        self.pos += 1;
                        Ok(Expr::call(func, arg))
                    }
                    _ => self.error(self.pos, "expected `)`"),
                };
            }
            return match name {
                "pi" => Ok(Expr::num(std::f64::consts::PI)),
                "i" => Ok(Expr::Num(Complex64::new(0.0, 1.0))),
                _ => {
                    if let Some(allowed) = self.allowed {
                        if !allowed.contains(&name) {
                            return Err(Error::UnknownIdentifier(name.to_string()));
                        }
                    }
                    Ok(Expr::var(name))
                }
            };
        }
        self.error(start, format!("unexpected `{}`", c as char))
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let b = self.bytes;
        let mut end = start;
        while end < b.len() && b[end].is_ascii_digit() {
            end += 1;
        }
        if end < b.len() && b[end] == b'.' {
            end += 1;
            while end < b.len() && b[end].is_ascii_digit() {
                end += 1;
            }
        }
        if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
            let mut k = end + 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            if k < b.len() && b[k].is_ascii_digit() {
                while k < b.len() && b[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = &self.src[start..end];
        let Ok(value) = text.parse::<f64>() else {
            return self.error(start, format!("malformed number `{text}`"));
        };
        self.pos = end;
        let imaginary_suffix = end < b.len()
            && b[end] == b'i'
            && !(end + 1 < b.len() && (b[end + 1].is_ascii_alphanumeric() || b[end + 1] == b'_'));
        if imaginary_suffix {
            self.pos += 1;
            return Ok(Expr::Num(Complex64::new(0.0, value)));
        }
        Ok(Expr::num(value))
    }
}

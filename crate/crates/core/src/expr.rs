//! Expression language for graphing functions, and the built-in models.
//!
//! Grammar (left associative, tightest last):
//! `sum := prod (('+'|'-') prod)*`, `prod := unary (('*'|'/') unary)*`,
//! `unary := '-' unary | pow`, `pow := atom ('^' int)*`,
//! `atom := number | name | name '(' sum ')' | '(' sum ')'`,
//! `int := ['-'|'+'] digits | '(' ['-'|'+'] digits ')'`.

use std::fmt;

use rug::{Integer, Rational};

use crate::analytic::{self, Func};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::space::VarSpace;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Rational),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Variable names in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(v) => {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => walk(a, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(q) if !printable_literal(q) => 2,
            _ => 5,
        }
    }
}

/// Literals the parser can produce: non-negative terminating decimals.
fn printable_literal(q: &Rational) -> bool {
    if *q < 0 {
        return false;
    }
    let mut d = q.denom().clone();
    for p in [2u32, 5] {
        while d.is_divisible_u(p) {
            d /= p;
        }
    }
    d == 1
}

fn literal_text(q: &Rational) -> String {
    if q.denom() == &1 {
        return q.numer().to_string();
    }
    if !printable_literal(q) {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let mut scale = 0u32;
    let mut v = q.clone();
    while v.denom() != &1 {
        v *= 10;
        scale += 1;
    }
    let digits = v.numer().to_string();
    let width = scale as usize + 1;
    let padded = format!("{digits:0>width$}");
    let (int, frac) = padded.split_at(padded.len() - scale as usize);
    format!("{int}.{frac}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |e: &Expr, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(q) => {
                if *q < 0 {
                    write!(f, "-{}", literal_text(&Rational::from(-q)))
                } else {
                    write!(f, "{}", literal_text(q))
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(a, 3, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                wrap(a, 1, f)?;
                write!(f, "{}", if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                wrap(b, 2, f)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                wrap(a, 2, f)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                wrap(b, 3, f)
            }
            Expr::Pow(a, n) => {
                wrap(a, 4, f)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Call(func, a) => write!(f, "{func}({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Sym(char),
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lit = &text[start..i];
            let q = parse_decimal(lit).ok_or_else(|| Error::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(q), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(c);
            return Err(Error::Syntax {
                offset: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

fn parse_decimal(lit: &str) -> Option<Rational> {
    let (int, frac) = match lit.split_once('.') {
        Some((a, b)) => (a, b),
        None => (lit, ""),
    };
    if int.is_empty() && frac.is_empty() || frac.contains('.') {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n = Integer::from_str_radix(&digits, 10).ok()?;
    let d = Integer::from(Integer::u_pow_u(10, frac.len() as u32));
    Some(Rational::from((n, d)))
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: &str) -> Error {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(q) => format!("number {q}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
        };
        Error::Syntax {
            offset: self.offset(),
            message: format!("{message}, found {found}"),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Sym('^') {
            self.bump();
            let n = self.exponent()?;
            base = Expr::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64> {
        let paren = *self.peek() == Tok::Sym('(');
        if paren {
            self.bump();
        }
        let mut sign = 1i64;
        match self.peek() {
            Tok::Sym('-') => {
                sign = -1;
                self.bump();
            }
            Tok::Sym('+') => {
                self.bump();
            }
            _ => {}
        }
        let at = self.offset();
        let n = match self.bump() {
            Tok::Num(q) if q.denom() == &1 => q.numer().to_i64().ok_or(Error::Syntax {
                offset: at,
                message: "exponent too large".into(),
            })?,
            _ => {
                return Err(Error::Syntax {
                    offset: at,
                    message: "exponent must be an integer literal".into(),
                })
            }
        };
        if paren {
            self.expect(')')?;
        }
        Ok(sign * n)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Expr::Num(q))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    let func: Func = name
                        .parse()
                        .map_err(|_| Error::UnknownFunction { name: name.clone(), offset: at })?;
                    self.bump();
                    let arg = self.sum()?;
                    self.expect(')')?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(self.err("expected a number, variable, function or `(`")),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Jet of `e` at `base` (one coordinate per name in `vars`), to order `order`.
pub fn eval_jet<S: Scalar>(e: &Expr, vars: &[String], base: &[S], order: u32, ctx: &S::Ctx) -> Result<Jet<S>> {
    if vars.len() != base.len() {
        return Err(Error::Invalid(format!(
            "{} variables but {} base coordinates",
            vars.len(),
            base.len()
        )));
    }
    let space = VarSpace::new(vars, order);
    eval_on(e, &space, base, order, ctx)
}

fn eval_on<S: Scalar>(e: &Expr, space: &std::sync::Arc<VarSpace>, base: &[S], order: u32, ctx: &S::Ctx) -> Result<Jet<S>> {
    let rec = |a: &Expr| eval_on(a, space, base, order, ctx);
    Ok(match e {
        Expr::Num(q) => Jet::constant(space.clone(), order, base.to_vec(), S::from_rational(ctx, q)),
        Expr::Var(v) => Jet::variable(space.clone(), order, base.to_vec(), v, ctx.clone())?,
        Expr::Neg(a) => -rec(a)?,
        Expr::Add(a, b) => rec(a)?.try_add(&rec(b)?)?,
        Expr::Sub(a, b) => rec(a)?.try_sub(&rec(b)?)?,
        Expr::Mul(a, b) => rec(a)?.try_mul(&rec(b)?)?,
        Expr::Div(a, b) => rec(a)?.try_div(&rec(b)?)?,
        Expr::Pow(a, n) => analytic::pow_int(&rec(a)?, *n)?,
        Expr::Call(f, a) => analytic::lift(*f, &rec(a)?)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact,
    Float,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Float => "float",
        }
    }
}

/// What a built-in model is expected to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelCheck {
    /// Curve whose tube is spherical; `parabola` also asks for Halphen = 0.
    SphericalCurve { parabola: bool },
    /// Curve on a nondegenerate conic (Monge = 0).
    Conic,
    /// Rank-one Hessian surface with every flatness invariant zero.
    FlatModel,
    /// Definite Hessian (signature (n,0) or (0,n)).
    Definite,
}

impl ModelCheck {
    pub fn name(self) -> &'static str {
        match self {
            ModelCheck::SphericalCurve { parabola: true } => "spherical-parabola",
            ModelCheck::SphericalCurve { parabola: false } => "spherical-curve",
            ModelCheck::Conic => "conic",
            ModelCheck::FlatModel => "flat-model",
            ModelCheck::Definite => "definite",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelEntry {
    pub name: String,
    pub expr: String,
    pub vars: Vec<String>,
    pub base: Vec<Rational>,
    pub backend: Backend,
    pub check: ModelCheck,
    pub note: String,
}

impl ModelEntry {
    pub fn parsed(&self) -> Expr {
        parse(&self.expr).expect("built-in model parses")
    }

    pub fn base_as<S: Scalar>(&self, ctx: &S::Ctx) -> Vec<S> {
        self.base.iter().map(|q| S::from_rational(ctx, q)).collect()
    }

    pub fn jet<S: Scalar>(&self, order: u32, ctx: &S::Ctx) -> Result<Jet<S>> {
        eval_jet(&self.parsed(), &self.vars, &self.base_as::<S>(ctx), order, ctx)
    }
}

fn entry(name: &str, expr: String, vars: Vec<String>, base: Vec<i64>, backend: Backend, check: ModelCheck, note: &str) -> ModelEntry {
    ModelEntry {
        name: name.to_string(),
        expr,
        vars,
        base: base.into_iter().map(Rational::from).collect(),
        backend,
        check,
        note: note.to_string(),
    }
}

/// Every built-in model, in listing order.
pub fn models() -> Vec<ModelEntry> {
    use Backend::*;
    use ModelCheck::*;
    let x = || vec!["x".to_string()];
    let xy = || vec!["x".to_string(), "y".to_string()];
    let mut out = vec![
        entry("parabola", "x^2".into(), x(), vec![0], Exact, SphericalCurve { parabola: true },
            "spherical tube base; the affine model curve"),
        entry("exp", "exp(x)".into(), x(), vec![0], Exact, SphericalCurve { parabola: false },
            "spherical tube base, not affinely a parabola"),
        entry("arcsin_exp", "arcsin(exp(x))".into(), x(), vec![-1], Float, SphericalCurve { parabola: false },
            "spherical tube base, evaluated at x = -1"),
        entry("arcsinh_exp", "arcsinh(exp(x))".into(), x(), vec![0], Float, SphericalCurve { parabola: false },
            "spherical tube base, evaluated at x = 0"),
        entry("lc_tube", "x^2/(1-y)".into(), xy(), vec![0, 0], Exact, FlatModel,
            "rank-one Hessian model surface; tube over it is the flat 2-nondegenerate model"),
        entry("hyperbola_conic", "x^2/(1-x)".into(), x(), vec![0], Exact, Conic,
            "graph lies on the conic x^2 + u x - u = 0"),
    ];
    for n in 1..=3usize {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        for nu in 0..=n {
            let terms: Vec<String> = names
                .iter()
                .enumerate()
                .map(|(i, v)| if i < nu { format!("exp({v})") } else { format!("{v}^2") })
                .collect();
            out.push(entry(
                &format!("dy_a_n{n}_nu{nu}"),
                terms.join("+"),
                names.clone(),
                vec![0; n],
                Exact,
                Definite,
                "definite affinely homogeneous tube base: exponentials then squares",
            ));
        }
    }
    for n in 1..=2usize {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let sum = names.iter().map(|v| format!("exp({v})")).collect::<Vec<_>>().join("+");
        out.push(entry(
            &format!("dy_b_n{n}"),
            format!("arcsin({sum})"),
            names.clone(),
            vec![-1; n],
            Float,
            Definite,
            "definite tube base arcsin of a sum of exponentials, at x_i = -1",
        ));
        out.push(entry(
            &format!("dy_c_n{n}"),
            format!("log(1-({sum}))"),
            names.clone(),
            vec![-1; n],
            Float,
            Definite,
            "definite tube base log(1 - sum of exponentials), at x_i = -1",
        ));
    }
    out
}

pub fn model(name: &str) -> Option<ModelEntry> {
    models().into_iter().find(|m| m.name == name)
}

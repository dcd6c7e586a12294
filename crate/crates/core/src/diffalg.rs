//! Differential polynomials in the jet coordinates `u_{j,k} = d^j_x d^k_y u`,
//! Laurent in one pivot coordinate (always `u_xx` here).
//!
//! This is the symbolic side of the crate: total derivatives `D_x`, `D_y`,
//! solved-form equation systems with their normal forms, and evaluation of the
//! resulting expressions either at numbers or at jets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rug::Rational;

use crate::error::{Error, Result};
use crate::jet::{multi_factorial, Jet};
use crate::space::VarSpace;
use crate::scalar::Scalar;

/// Jet coordinate `u_{j,k}`: `j` derivatives in `x`, `k` in `y`.
pub type DVar = (u8, u8);

pub const PIVOT: DVar = (2, 0);

/// `u_xx^pivot * prod v^e`, with the pivot never listed in `vars`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub pivot: i32,
    pub vars: Vec<(DVar, u32)>,
}

impl Mono {
    fn one() -> Self {
        Mono {
            pivot: 0,
            vars: Vec::new(),
        }
    }

    fn mul(&self, o: &Mono) -> Mono {
        let mut vars = self.vars.clone();
        for &(v, e) in &o.vars {
            match vars.binary_search_by(|p| p.0.cmp(&v)) {
                Ok(i) => vars[i].1 += e,
                Err(i) => vars.insert(i, (v, e)),
            }
        }
        Mono {
            pivot: self.pivot + o.pivot,
            vars,
        }
    }

    /// Weighted derivative order, `sum e * (j + k)` counting the pivot as 2.
    pub fn weight(&self) -> i64 {
        2 * self.pivot as i64
            + self
                .vars
                .iter()
                .map(|&((j, k), e)| (j as i64 + k as i64) * e as i64)
                .sum::<i64>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DPoly {
    terms: BTreeMap<Mono, Rational>,
}

fn shift(v: DVar, dir: usize) -> DVar {
    if dir == 0 {
        (v.0 + 1, v.1)
    } else {
        (v.0, v.1 + 1)
    }
}

impl DPoly {
    pub fn zero() -> Self {
        DPoly::default()
    }

    pub fn constant(q: Rational) -> Self {
        let mut p = DPoly::zero();
        p.add_term(Mono::one(), q);
        p
    }

    pub fn int(n: i64) -> Self {
        Self::constant(Rational::from(n))
    }

    pub fn var(v: DVar) -> Self {
        let m = if v == PIVOT {
            Mono {
                pivot: 1,
                vars: Vec::new(),
            }
        } else {
            Mono {
                pivot: 0,
                vars: vec![(v, 1)],
            }
        };
        let mut p = DPoly::zero();
        p.add_term(m, Rational::from(1));
        p
    }

    /// `u_xx^e` for any integer `e`.
    pub fn pivot_pow(e: i32) -> Self {
        let mut p = DPoly::zero();
        p.add_term(
            Mono {
                pivot: e,
                vars: Vec::new(),
            },
            Rational::from(1),
        );
        p
    }

    fn add_term(&mut self, m: Mono, c: Rational) {
        if c == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0 {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rational)> {
        self.terms.iter()
    }

    pub fn add(&self, o: &DPoly) -> DPoly {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &DPoly) -> DPoly {
        self.add(&o.scale(&Rational::from(-1)))
    }

    pub fn scale(&self, q: &Rational) -> DPoly {
        if *q == 0 {
            return DPoly::zero();
        }
        DPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), Rational::from(c * q)))
                .collect(),
        }
    }

    pub fn mul(&self, o: &DPoly) -> DPoly {
        let mut out = DPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                out.add_term(ma.mul(mb), Rational::from(ca * cb));
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> DPoly {
        let mut out = DPoly::int(1);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Total derivative `D_x` (`dir = 0`) or `D_y` (`dir = 1`).
    pub fn total_derivative(&self, dir: usize) -> DPoly {
        let mut out = DPoly::zero();
        for (m, c) in &self.terms {
            if m.pivot != 0 {
                let mut rest = m.clone();
                rest.pivot -= 1;
                let d = DPoly::var(shift(PIVOT, dir));
                let t = DPoly {
                    terms: [(rest, Rational::from(c * m.pivot))].into_iter().collect(),
                };
                out = out.add(&t.mul(&d));
            }
            for (i, &(v, e)) in m.vars.iter().enumerate() {
                let mut rest = m.clone();
                if e == 1 {
                    rest.vars.remove(i);
                } else {
                    rest.vars[i].1 -= 1;
                }
                let d = DPoly::var(shift(v, dir));
                let t = DPoly {
                    terms: [(rest, Rational::from(c * e))].into_iter().collect(),
                };
                out = out.add(&t.mul(&d));
            }
        }
        out
    }

    /// Largest `j + k` over the coordinates that occur.
    pub fn max_order(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| {
                let p = if m.pivot != 0 { 2 } else { 0 };
                m.vars
                    .iter()
                    .map(|&((j, k), _)| (j + k) as u32)
                    .chain(std::iter::once(p))
            })
            .max()
            .unwrap_or(0)
    }

    /// Coordinates occurring in the polynomial (pivot excluded).
    pub fn coordinates(&self) -> Vec<DVar> {
        let mut out: Vec<DVar> = self
            .terms
            .keys()
            .flat_map(|m| m.vars.iter().map(|&(v, _)| v))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Replaces every coordinate `v` for which `rule(v)` is `Some` by that
    /// polynomial. Replacements are not themselves reduced again.
    pub fn substitute(&self, rule: &dyn Fn(DVar) -> Option<DPoly>) -> DPoly {
        let mut cache: HashMap<(DVar, u32), DPoly> = HashMap::new();
        let mut out = DPoly::zero();
        for (m, c) in &self.terms {
            let mut kept = Mono {
                pivot: m.pivot,
                vars: Vec::new(),
            };
            let mut factor = DPoly::int(1);
            for &(v, e) in &m.vars {
                match rule(v) {
                    Some(r) => {
                        let p = cache.entry((v, e)).or_insert_with(|| r.pow(e)).clone();
                        factor = factor.mul(&p);
                    }
                    None => kept.vars.push((v, e)),
                }
            }
            let head = DPoly {
                terms: [(kept, c.clone())].into_iter().collect(),
            };
            out = out.add(&head.mul(&factor));
        }
        out
    }

    /// Evaluates with `value(v)` for each coordinate and `inv_pivot = 1/u_xx`.
    pub fn eval<T: Algebra>(&self, value: &dyn Fn(DVar) -> T, pivot: &T, inv_pivot: &T, one: &T) -> T {
        let mut cache: HashMap<(DVar, u32), T> = HashMap::new();
        let mut acc: Option<T> = None;
        for (m, c) in &self.terms {
            let mut t = one.scale(c);
            let (base, e) = if m.pivot >= 0 {
                (pivot, m.pivot as u32)
            } else {
                (inv_pivot, (-m.pivot) as u32)
            };
            if e > 0 {
                t = t.mul(&base.pow(e));
            }
            for &(v, e) in &m.vars {
                let p = cache.entry((v, e)).or_insert_with(|| value(v).pow(e));
                t = t.mul(p);
            }
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t),
            });
        }
        acc.unwrap_or_else(|| one.scale(&Rational::new()))
    }

    /// Evaluates on a jet `f` in `(x)` or `(x, y)`: `u_{j,k}` becomes the jet
    /// of `d^j_x d^k_y f`. The result has order `N - max_order`.
    pub fn eval_on_jet<S: Scalar>(&self, f: &Jet<S>) -> Result<Jet<S>> {
        let need = self.max_order().max(2);
        if f.order() < need {
            return Err(Error::OrderTooLow {
                what: "differential polynomial".into(),
                needed: need,
                got: f.order(),
            });
        }
        let mut partials: HashMap<DVar, Jet<S>> = HashMap::new();
        let nv = f.nvars();
        let mut get = |v: DVar| -> Result<Jet<S>> {
            if let Some(j) = partials.get(&v) {
                return Ok(j.clone());
            }
            if nv == 1 && v.1 > 0 {
                return Ok(f.zero_like());
            }
            let m: Vec<u32> = if nv == 1 {
                vec![v.0 as u32]
            } else {
                vec![v.0 as u32, v.1 as u32]
            };
            let j = f.partial(&m)?;
            partials.insert(v, j.clone());
            Ok(j)
        };
        let pivot = get(PIVOT)?;
        let mut values: HashMap<DVar, Jet<S>> = HashMap::new();
        for v in self.coordinates() {
            values.insert(v, get(v)?);
        }
        let min_order = values
            .values()
            .map(|j| j.order())
            .chain(std::iter::once(pivot.order()))
            .min()
            .unwrap_or(pivot.order());
        let pivot = pivot.truncate(min_order);
        let inv = if self.terms.keys().any(|m| m.pivot < 0) {
            pivot.recip()?
        } else {
            pivot.clone()
        };
        let one = pivot.one_like();
        let value = |v: DVar| values[&v].truncate(min_order);
        Ok(self.eval(&value, &pivot, &inv, &one))
    }

    /// Evaluates at rational coordinate values (`u_xx` must be nonzero when
    /// it occurs with a negative power).
    pub fn eval_rational(&self, value: &dyn Fn(DVar) -> Rational) -> Result<Rational> {
        let p = value(PIVOT);
        let inv = if self.terms.keys().any(|m| m.pivot < 0) {
            if p == 0 {
                return Err(Error::Hypothesis("u_xx vanishes".into()));
            }
            Rational::from(p.recip_ref())
        } else {
            Rational::from(1)
        };
        Ok(self.eval(value, &p, &inv, &Rational::from(1)))
    }
}

/// Minimal ring interface used by [`DPoly::eval`].
pub trait Algebra: Clone {
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, q: &Rational) -> Self;
    fn pow(&self, n: u32) -> Self {
        let mut out = self.scale(&Rational::from(1));
        for _ in 1..n {
            out = out.mul(self);
        }
        if n == 0 {
            // x^0 = 1 is never requested by `eval`; keep the identity honest.
            panic!("zeroth power requested");
        }
        out
    }
}

impl Algebra for Rational {
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn scale(&self, q: &Rational) -> Self {
        Rational::from(self * q)
    }
}

impl<S: Scalar> Algebra for Jet<S> {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, q: &Rational) -> Self {
        self.scale_rational(q)
    }
    fn pow(&self, n: u32) -> Self {
        self.pow_int(n as i64).expect("non-negative power")
    }
}

/// Name of a coordinate, e.g. `F_xxy`.
pub fn coord_name(v: DVar) -> String {
    if v == (0, 0) {
        return "F".into();
    }
    format!("F_{}{}", "x".repeat(v.0 as usize), "y".repeat(v.1 as usize))
}

impl fmt::Display for DPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let mut factors: Vec<String> = Vec::new();
            if m.pivot != 0 {
                factors.push(if m.pivot == 1 {
                    coord_name(PIVOT)
                } else {
                    format!("{}^{}", coord_name(PIVOT), m.pivot)
                });
            }
            for &(v, e) in &m.vars {
                factors.push(if e == 1 {
                    coord_name(v)
                } else {
                    format!("{}^{}", coord_name(v), e)
                });
            }
            let neg = *c < 0;
            let abs = Rational::from(c.abs_ref());
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            if factors.is_empty() {
                write!(f, "{abs}")?;
            } else if abs == 1 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{abs}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// A solved equation `u_lhs = rhs`.
#[derive(Clone, Debug)]
pub struct Equation {
    pub name: &'static str,
    pub lhs: DVar,
    pub rhs: DPoly,
}

fn dominates(v: DVar, l: DVar) -> bool {
    v.0 >= l.0 && v.1 >= l.1
}

/// Solved-form system with normal forms of every principal coordinate.
///
/// A coordinate is principal when it is a derivative of some left-hand side;
/// all others are parametric. The normal form of a principal coordinate is a
/// Laurent polynomial in parametric coordinates only.
pub struct System {
    equations: Vec<Equation>,
    nf: HashMap<DVar, DPoly>,
    in_progress: Vec<DVar>,
}

/// One way of reaching a principal coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Route {
    /// Index of the equation differentiated.
    pub equation: usize,
    /// `None` for the equation itself; otherwise the predecessor and direction.
    pub from: Option<(DVar, usize)>,
}

impl System {
    pub fn new(equations: Vec<Equation>) -> Self {
        System {
            equations,
            nf: HashMap::new(),
            in_progress: Vec::new(),
        }
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn is_principal(&self, v: DVar) -> bool {
        self.equations.iter().any(|e| dominates(v, e.lhs))
    }

    /// The preferred route: first equation (in listed order) whose left-hand
    /// side `v` dominates, stepping back in `x` when possible.
    pub fn default_route(&self, v: DVar) -> Option<Route> {
        let i = self.equations.iter().position(|e| dominates(v, e.lhs))?;
        let lhs = self.equations[i].lhs;
        if v == lhs {
            return Some(Route {
                equation: i,
                from: None,
            });
        }
        let from = if v.0 > lhs.0 {
            ((v.0 - 1, v.1), 0)
        } else {
            ((v.0, v.1 - 1), 1)
        };
        Some(Route {
            equation: i,
            from: Some(from),
        })
    }

    /// Every route: the equation itself when `v` is a left-hand side, and
    /// each principal predecessor `v - e_x`, `v - e_y` differentiated once.
    pub fn routes(&self, v: DVar) -> Vec<Route> {
        let mut out = Vec::new();
        if let Some(i) = self.equations.iter().position(|e| e.lhs == v) {
            out.push(Route {
                equation: i,
                from: None,
            });
        }
        let preds = [(v.0.checked_sub(1).map(|j| (j, v.1)), 0), (v.1.checked_sub(1).map(|k| (v.0, k)), 1)];
        for (p, dir) in preds {
            if let Some(p) = p {
                if let Some(i) = self.equations.iter().position(|e| dominates(p, e.lhs)) {
                    out.push(Route {
                        equation: i,
                        from: Some((p, dir)),
                    });
                }
            }
        }
        out
    }

    /// Normal form of any coordinate (parametric ones map to themselves).
    pub fn normal_form(&mut self, v: DVar) -> Result<DPoly> {
        if !self.is_principal(v) {
            return Ok(DPoly::var(v));
        }
        if let Some(p) = self.nf.get(&v) {
            return Ok(p.clone());
        }
        let route = self.default_route(v).expect("principal coordinate");
        let p = self.along(v, route)?;
        self.nf.insert(v, p.clone());
        Ok(p)
    }

    /// Normal form computed along a specific route.
    pub fn along(&mut self, v: DVar, route: Route) -> Result<DPoly> {
        if self.in_progress.contains(&v) && route.from.is_none() {
            // Base equations never recurse into themselves.
        } else if self.in_progress.contains(&v) {
            return Err(Error::Invalid(format!(
                "cyclic reduction at {}",
                coord_name(v)
            )));
        }
        self.in_progress.push(v);
        let raw = match route.from {
            None => self.equations[route.equation].rhs.clone(),
            Some((p, dir)) => self.normal_form(p)?.total_derivative(dir),
        };
        let out = self.reduce(&raw);
        self.in_progress.pop();
        out
    }

    /// Rewrites a polynomial in parametric coordinates only.
    pub fn reduce(&mut self, p: &DPoly) -> Result<DPoly> {
        let mut rules: HashMap<DVar, DPoly> = HashMap::new();
        for v in p.coordinates() {
            if self.is_principal(v) {
                let nf = self.normal_form(v)?;
                rules.insert(v, nf);
            }
        }
        if rules.is_empty() {
            return Ok(p.clone());
        }
        Ok(p.substitute(&|v| rules.get(&v).cloned()))
    }

    /// Jet at the origin over `names` (one or two variables) whose parametric
    /// derivatives come from `parametric`, called once each in graded-lex
    /// order; principal ones follow from their normal forms.
    pub fn solve_jet(
        &mut self,
        names: &[&str],
        order: u32,
        mut parametric: impl FnMut(DVar) -> Rational,
    ) -> Result<Jet<Rational>> {
        let space = VarSpace::new(names, order);
        let mut jet = Jet::zero(space.clone(), order, vec![Rational::new(); names.len()], ());
        let mut known: HashMap<DVar, Rational> = HashMap::new();
        for m in space.monomials(order).to_vec() {
            let v: DVar = (m[0] as u8, m.get(1).copied().unwrap_or(0) as u8);
            let value = if self.is_principal(v) {
                let nf = self.normal_form(v)?;
                nf.eval_rational(&|c| known.get(&c).cloned().unwrap_or_default())?
            } else {
                parametric(v)
            };
            jet.set_coeff(&m, &value / Rational::from(multi_factorial(&m)));
            known.insert(v, value);
        }
        Ok(jet)
    }

    /// Principal coordinates of order `<= n`, in graded order.
    pub fn principal_upto(&self, n: u32) -> Vec<DVar> {
        let mut out = Vec::new();
        for d in 0..=n {
            for k in 0..=d {
                let v = ((d - k) as u8, k as u8);
                if self.is_principal(v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

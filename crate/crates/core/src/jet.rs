//! Dense truncated multivariate Taylor jets.
//!
//! A jet of order `N` stores one coefficient per monomial of degree `<= N` in
//! the powers of `(x_i - base_i)`. Binary operations truncate to the smaller
//! of the two orders; nothing above the common order is ever reported.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{degree, MultiIndex, VarSpace};

#[derive(Clone, Debug)]
pub struct Jet<S: Scalar> {
    space: Arc<VarSpace>,
    order: u32,
    base: Vec<S>,
    coeffs: Vec<S>,
    ctx: S::Ctx,
}

impl<S: Scalar> PartialEq for Jet<S> {
    fn eq(&self, other: &Self) -> bool {
        self.space.names() == other.space.names()
            && self.order == other.order
            && self.base == other.base
            && self.coeffs == other.coeffs
    }
}

fn factorial(n: u32) -> Integer {
    Integer::from(Integer::factorial(n))
}

/// `m!` for a multi-index, i.e. the product of the factorials of its entries.
pub fn multi_factorial(m: &[u32]) -> Integer {
    m.iter().fold(Integer::from(1), |acc, &e| acc * factorial(e))
}

impl<S: Scalar> Jet<S> {
    /// The zero jet. `base` holds one coordinate per variable of `space`.
    pub fn zero(space: Arc<VarSpace>, order: u32, base: Vec<S>, ctx: S::Ctx) -> Self {
        assert_eq!(base.len(), space.nvars(), "base point dimension");
        let space = ensure_capacity(space, order);
        let coeffs = vec![S::zero(&ctx); space.len(order)];
        Jet {
            space,
            order,
            base,
            coeffs,
            ctx,
        }
    }

    /// Builds a fresh variable space and returns the zero jet on it.
    pub fn zero_on<N: AsRef<str>>(names: &[N], base: Vec<S>, order: u32, ctx: S::Ctx) -> Self {
        Self::zero(VarSpace::new(names, order), order, base, ctx)
    }

    pub fn constant(space: Arc<VarSpace>, order: u32, base: Vec<S>, c: S) -> Self {
        let ctx = c.ctx();
        let mut j = Self::zero(space, order, base, ctx);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate function of variable `name`: `base_v + (x_v - base_v)`.
    pub fn variable(space: Arc<VarSpace>, order: u32, base: Vec<S>, name: &str, ctx: S::Ctx) -> Result<Self> {
        let v = space
            .var_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        let mut j = Self::zero(space, order, base, ctx);
        j.coeffs[0] = j.base[v].clone();
        if order >= 1 {
            let mut e = vec![0; j.space.nvars()];
            e[v] = 1;
            let i = j.space.index_of(&e).expect("linear monomial");
            j.coeffs[i] = S::one(&j.ctx);
        }
        Ok(j)
    }

    /// Coefficients in graded-lex order; length must match the order.
    pub fn from_coeffs(space: Arc<VarSpace>, order: u32, base: Vec<S>, coeffs: Vec<S>, ctx: S::Ctx) -> Self {
        let space = ensure_capacity(space, order);
        assert_eq!(coeffs.len(), space.len(order), "coefficient count");
        assert_eq!(base.len(), space.nvars(), "base point dimension");
        Jet {
            space,
            order,
            base,
            coeffs,
            ctx,
        }
    }

    /// Builds a jet by evaluating `f` on every multi-index.
    pub fn from_fn(space: Arc<VarSpace>, order: u32, base: Vec<S>, ctx: S::Ctx, mut f: impl FnMut(&[u32]) -> S) -> Self {
        let space = ensure_capacity(space, order);
        let coeffs = space.monomials(order).iter().map(|m| f(m)).collect();
        Self::from_coeffs(space, order, base, coeffs, ctx)
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        &self.space
    }
    pub fn vars(&self) -> &[String] {
        self.space.names()
    }
    pub fn nvars(&self) -> usize {
        self.space.nvars()
    }
    pub fn order(&self) -> u32 {
        self.order
    }
    pub fn base(&self) -> &[S] {
        &self.base
    }
    pub fn ctx(&self) -> &S::Ctx {
        &self.ctx
    }
    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }
    pub fn constant_term(&self) -> &S {
        &self.coeffs[0]
    }

    /// Coefficient of `m`, zero when `m` lies above the order.
    pub fn coeff(&self, m: &[u32]) -> S {
        if degree(m) > self.order {
            return S::zero(&self.ctx);
        }
        match self.space.index_of(m) {
            Some(i) => self.coeffs[i].clone(),
            None => S::zero(&self.ctx),
        }
    }

    pub fn set_coeff(&mut self, m: &[u32], value: S) {
        assert!(degree(m) <= self.order, "monomial above jet order");
        let i = self.space.index_of(m).expect("monomial in space");
        self.coeffs[i] = value;
    }

    /// Partial derivative `d^m F` at the base point (`m!` times the coefficient).
    pub fn derivative_at_base(&self, m: &[u32]) -> S {
        self.coeff(m)
            .scale_rational(&Rational::from(multi_factorial(m)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Exact zero on the exact backend, all `|c| <= tol` on floats.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.negligible(tol))
    }

    /// First coefficient in graded-lex order that is not negligible.
    pub fn first_nonzero(&self, tol: f64) -> Option<(MultiIndex, S)> {
        self.coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.negligible(tol))
            .map(|(i, c)| (self.space.monomial(i).to_vec(), c.clone()))
    }

    /// Largest `|c|` as f64, for reporting.
    pub fn max_abs_f64(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn truncate(&self, order: u32) -> Self {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            base: self.base.clone(),
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
            ctx: self.ctx.clone(),
        }
    }

    fn like(&self, order: u32, coeffs: Vec<S>) -> Self {
        Jet {
            space: self.space.clone(),
            order,
            base: self.base.clone(),
            coeffs,
            ctx: self.ctx.clone(),
        }
    }

    /// Same variables and base point, different coefficients of the same order.
    pub fn with_coeffs(&self, coeffs: Vec<S>) -> Self {
        assert_eq!(coeffs.len(), self.coeffs.len());
        self.like(self.order, coeffs)
    }

    pub fn map_coeffs(&self, f: impl FnMut(&S) -> S) -> Self {
        self.like(self.order, self.coeffs.iter().map(f).collect())
    }

    /// The constant jet `c` on the same variables, base point and order.
    pub fn const_like(&self, c: S) -> Self {
        let mut coeffs = vec![S::zero(&self.ctx); self.coeffs.len()];
        coeffs[0] = c;
        self.like(self.order, coeffs)
    }

    pub fn zero_like(&self) -> Self {
        self.const_like(S::zero(&self.ctx))
    }

    pub fn one_like(&self) -> Self {
        self.const_like(S::one(&self.ctx))
    }

    /// Common space and order for a binary operation.
    fn align(&self, other: &Self) -> Result<(Arc<VarSpace>, u32)> {
        if !self.space.same_vars(&other.space) {
            return Err(Error::VarMismatch {
                left: self.vars().to_vec(),
                right: other.vars().to_vec(),
            });
        }
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let space = if self.space.capacity() >= other.space.capacity() {
            self.space.clone()
        } else {
            other.space.clone()
        };
        Ok((space, self.order.min(other.order)))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        let (space, order) = self.align(other)?;
        let n = space.len(order);
        let coeffs = self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| f(a, b))
            .collect();
        Ok(Jet {
            space,
            order,
            base: self.base.clone(),
            coeffs,
            ctx: self.ctx.clone(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_coeffs(|c| c.mul(s))
    }

    pub fn scale_rational(&self, q: &Rational) -> Self {
        let s = S::from_rational(&self.ctx, q);
        self.scale(&s)
    }

    pub fn scale_i64(&self, n: i64) -> Self {
        self.scale_rational(&Rational::from(n))
    }

    pub fn add_scalar(&self, s: &S) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0].add(s);
        out
    }

    /// Cauchy product truncated at the common order.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        let (space, order) = self.align(other)?;
        let n = space.len(order);
        let mut coeffs = Vec::with_capacity(n);
        for t in 0..n {
            let mut acc = S::zero(&self.ctx);
            for &(i, j) in space.pairs(t) {
                let a = &self.coeffs[i as usize];
                if a.is_zero() {
                    continue;
                }
                acc.add_mul(a, &other.coeffs[j as usize]);
            }
            coeffs.push(acc);
        }
        Ok(Jet {
            space,
            order,
            base: self.base.clone(),
            coeffs,
            ctx: self.ctx.clone(),
        })
    }

    fn check_unit(&self) -> Result<()> {
        let c = &self.coeffs[0];
        let tol = S::default_tolerance(&self.ctx);
        if c.is_zero() || (!S::EXACT && c.abs_le(tol)) {
            Err(Error::NonUnit)
        } else {
            Ok(())
        }
    }

    /// `self / other`, solved degree by degree; `other` must be a unit.
    pub fn try_div(&self, other: &Self) -> Result<Self> {
        let (space, order) = self.align(other)?;
        other.check_unit()?;
        let inv0 = other.coeffs[0].recip().ok_or(Error::NonUnit)?;
        let n = space.len(order);
        let mut q: Vec<S> = Vec::with_capacity(n);
        for t in 0..n {
            let mut acc = self.coeffs[t].clone();
            for &(i, j) in space.pairs(t) {
                if i == 0 {
                    continue;
                }
                let b = &other.coeffs[i as usize];
                if b.is_zero() {
                    continue;
                }
                acc.add_mul(&b.neg(), &q[j as usize]);
            }
            q.push(acc.mul(&inv0));
        }
        Ok(Jet {
            space,
            order,
            base: self.base.clone(),
            coeffs: q,
            ctx: self.ctx.clone(),
        })
    }

    pub fn recip(&self) -> Result<Self> {
        self.one_like().try_div(self)
    }

    /// Formal partial derivative by variable index; the order drops by one.
    pub fn diff(&self, var: usize) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::OrderTooLow {
                what: format!("d/d{}", self.vars()[var]),
                needed: 1,
                got: 0,
            });
        }
        let order = self.order - 1;
        let n = self.space.len(order);
        let coeffs = (0..n)
            .map(|i| {
                let e = self.space.monomial(i)[var] + 1;
                let src = self.space.up(var, i).expect("within capacity");
                self.coeffs[src].scale_rational(&Rational::from(e))
            })
            .collect();
        Ok(self.like(order, coeffs))
    }

    /// Antiderivative in `var` vanishing on `var = base`; the order rises by one.
    pub fn integrate(&self, var: usize) -> Self {
        let order = self.order + 1;
        let space = ensure_capacity(self.space.clone(), order);
        let mut out = Jet::zero(space, order, self.base.clone(), self.ctx.clone());
        for (i, c) in self.coeffs.iter().enumerate() {
            let src = self.space.monomial(i);
            let e = src[var] + 1;
            let t = out.space.up(var, out.space.index_of(src).expect("monomial")).expect("within capacity");
            out.coeffs[t] = c.scale_rational(&Rational::from((1, e)));
        }
        out
    }

    pub fn diff_by(&self, name: &str) -> Result<Self> {
        let v = self
            .space
            .var_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        self.diff(v)
    }

    /// Mixed partial `d^m`, with `m` one exponent per variable.
    pub fn partial(&self, m: &[u32]) -> Result<Self> {
        let mut out = self.clone();
        for (v, &e) in m.iter().enumerate() {
            for _ in 0..e {
                out = out.diff(v)?;
            }
        }
        Ok(out)
    }

    /// Integer power; negative exponents divide.
    pub fn pow_int(&self, n: i64) -> Result<Self> {
        if n < 0 {
            return self.pow_int(-n)?.recip();
        }
        let mut result = self.one_like();
        let mut base = self.clone();
        let mut k = n as u64;
        while k > 0 {
            if k & 1 == 1 {
                result = result.try_mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.try_mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Substitutes `subs[i]` for variable `i`. Each substitute must have
    /// constant term equal to the matching base coordinate (checked exactly on
    /// the exact backend). The result lives on the substitutes' space, at the
    /// smaller of the two orders.
    pub fn compose(&self, subs: &[Jet<S>]) -> Result<Jet<S>> {
        assert_eq!(subs.len(), self.nvars(), "one substitute per variable");
        if subs.is_empty() {
            return Err(Error::Invalid("composition needs a target space".into()));
        }
        let target = &subs[0];
        for s in subs {
            target.align(s)?;
        }
        let mut hs = Vec::with_capacity(subs.len());
        for (i, s) in subs.iter().enumerate() {
            if S::EXACT && s.coeffs[0] != self.base[i] {
                return Err(Error::Invalid(format!(
                    "substitute for `{}` has constant term {} but the jet is centred at {}",
                    self.vars()[i],
                    s.coeffs[0],
                    self.base[i]
                )));
            }
            let mut h = s.truncate(self.order.min(target.order));
            h.coeffs[0] = S::zero(&self.ctx);
            hs.push(h);
        }
        let order = hs[0].order;
        let zero = hs[0].zero_like();
        let mut prefix = vec![0u32; self.nvars()];
        let out = self.horner(0, self.order, &mut prefix, &hs, &zero)?;
        Ok(out.truncate(order))
    }

    /// Sum over monomials with the given exponent prefix, by nested Horner.
    fn horner(&self, var: usize, left: u32, prefix: &mut Vec<u32>, hs: &[Jet<S>], zero: &Jet<S>) -> Result<Jet<S>> {
        if var == self.nvars() {
            let c = self.coeff(prefix);
            return Ok(zero.const_like(c));
        }
        let mut acc: Option<Jet<S>> = None;
        for e in (0..=left).rev() {
            prefix[var] = e;
            let inner = self.horner(var + 1, left - e, prefix, hs, zero)?;
            acc = Some(match acc {
                None => inner,
                Some(a) => a.try_mul(&hs[var])?.try_add(&inner)?,
            });
        }
        prefix[var] = 0;
        Ok(acc.expect("non-empty range"))
    }

    /// Re-expresses the jet on a different variable list. `map[i]` gives the
    /// position in `space` of this jet's variable `i`; variables of `space`
    /// not hit by the map are absent from the jet.
    pub fn embed(&self, space: Arc<VarSpace>, base: Vec<S>, map: &[usize]) -> Self {
        let space = ensure_capacity(space, self.order);
        let mut out = Jet::zero(space, self.order, base, self.ctx.clone());
        for (i, m) in self.space.monomials(self.order).iter().enumerate() {
            let mut e = vec![0u32; out.nvars()];
            for (v, &k) in m.iter().enumerate() {
                e[map[v]] = k;
            }
            let t = out.space.index_of(&e).expect("embedded monomial");
            out.coeffs[t] = self.coeffs[i].clone();
        }
        out
    }

    /// Splits `G(vars, u)` into the slices `g_k(vars)` of `G = sum g_k (u - u0)^k`.
    /// Each slice is a jet over the remaining variables at the full order, with
    /// zero coefficients above degree `order - k` (exact for products `g_k h^k`
    /// whenever `h` has no constant term).
    pub fn slices(&self, var: usize) -> Vec<Jet<S>> {
        let names: Vec<&str> = self
            .vars()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != var)
            .map(|(_, n)| n.as_str())
            .collect();
        let base: Vec<S> = self
            .base
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != var)
            .map(|(_, b)| b.clone())
            .collect();
        let space = VarSpace::new(&names, self.order);
        (0..=self.order)
            .map(|k| {
                Jet::from_fn(space.clone(), self.order, base.clone(), self.ctx.clone(), |m| {
                    let mut full = Vec::with_capacity(m.len() + 1);
                    full.extend_from_slice(&m[..var]);
                    full.push(k);
                    full.extend_from_slice(&m[var..]);
                    self.coeff(&full)
                })
            })
            .collect()
    }
}

fn ensure_capacity(space: Arc<VarSpace>, order: u32) -> Arc<VarSpace> {
    if space.capacity() >= order {
        space
    } else {
        VarSpace::new(space.names(), order)
    }
}

impl<S: Scalar> fmt::Display for Jet<S> {
    /// Writes the expansion in powers of the shifted variables, e.g.
    /// `1 + x + 1/2*x^2`. Zero coefficients are skipped.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let m = self.space.monomial(i);
            let mono: Vec<String> = m
                .iter()
                .zip(self.vars())
                .filter(|(e, _)| **e > 0)
                .map(|(e, v)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
                .collect();
            if mono.is_empty() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{}", mono.join("*"))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({})", self.order + 1)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $call:ident) => {
        impl<'a, S: Scalar> $trait<&'a Jet<S>> for &'a Jet<S> {
            type Output = Jet<S>;
            fn $method(self, rhs: &'a Jet<S>) -> Jet<S> {
                self.$call(rhs).expect(concat!("jet ", stringify!($method)))
            }
        }
        impl<S: Scalar> $trait<Jet<S>> for Jet<S> {
            type Output = Jet<S>;
            fn $method(self, rhs: Jet<S>) -> Jet<S> {
                (&self).$call(&rhs).expect(concat!("jet ", stringify!($method)))
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl<S: Scalar> Neg for &Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.map_coeffs(|c| c.neg())
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::from((n, d))
    }

    fn space2(order: u32) -> Arc<VarSpace> {
        VarSpace::new(&["x", "y"], order)
    }

    fn var(space: &Arc<VarSpace>, order: u32, name: &str) -> Jet<Q> {
        Jet::variable(space.clone(), order, vec![Q::new(), Q::new()], name, ()).unwrap()
    }

    fn one(space: &Arc<VarSpace>, order: u32) -> Jet<Q> {
        Jet::constant(space.clone(), order, vec![Q::new(), Q::new()], Q::from(1))
    }

    fn random_jet(space: &Arc<VarSpace>, order: u32, vals: &[i64]) -> Jet<Q> {
        let mut k = 0;
        Jet::from_fn(space.clone(), order, vec![Q::new(), Q::new()], (), |_| {
            let v = vals[k % vals.len()];
            k += 1;
            q(v, 1 + (k as i64 % 3))
        })
    }

    #[test]
    fn cancellation_and_identity() {
        let s = space2(3);
        let x = var(&s, 3, "x");
        let sum = &(&one(&s, 3) + &x) + &(&one(&s, 3) - &x);
        assert_eq!(sum, one(&s, 3).scale_i64(2));
        let zero = x.zero_like();
        assert_eq!(&x + &zero, x);
    }

    #[test]
    fn small_products() {
        let s = space2(2);
        let x = var(&s, 2, "x");
        let p = &(&one(&s, 2) + &x) * &(&one(&s, 2) - &x);
        assert_eq!(p, &one(&s, 2) - &(&x * &x));
        assert_eq!((&x * &x).coeff(&[2, 0]), 1);
    }

    #[test]
    fn geometric_series() {
        let s = VarSpace::new(&["y"], 4);
        let y = Jet::<Q>::variable(s.clone(), 4, vec![Q::new()], "y", ()).unwrap();
        let g = y.one_like().try_div(&(&y.one_like() - &y)).unwrap();
        assert!(g.coeffs().iter().all(|c| *c == 1));
        assert!(matches!(g.try_div(&y), Err(Error::NonUnit)));
    }

    #[test]
    fn derivatives() {
        let s = space2(3);
        let x = var(&s, 3, "x");
        assert!(one(&s, 3).diff_by("y").unwrap().is_zero());
        let d = (&x * &x).diff_by("x").unwrap();
        assert_eq!(d, x.truncate(2).scale_i64(2));
        assert!(matches!(x.diff_by("z"), Err(Error::UnknownVariable(_))));
        assert!(matches!(x.truncate(0).diff(0), Err(Error::OrderTooLow { .. })));
    }

    #[test]
    fn mismatched_vars_are_rejected() {
        let a = var(&space2(2), 2, "x");
        let other = VarSpace::new(&["x", "z"], 2);
        let b = Jet::<Q>::variable(other, 2, vec![Q::new(), Q::new()], "x", ()).unwrap();
        assert!(matches!(a.try_add(&b), Err(Error::VarMismatch { .. })));
    }

    #[test]
    fn composition_matches_direct_products() {
        // f(x, y) = x^2 y, with x <- x + y, y <- 2x, both vanishing at 0.
        let s = space2(5);
        let x = var(&s, 5, "x");
        let y = var(&s, 5, "y");
        let f = &(&x * &x) * &y;
        let subs = [&x + &y, x.scale_i64(2)];
        let got = f.compose(&subs).unwrap();
        let want = &(&subs[0] * &subs[0]) * &subs[1];
        assert_eq!(got, want);
    }

    #[test]
    fn slices_recover_polynomial_in_u() {
        let s = VarSpace::new(&["x", "u"], 3);
        let base = vec![Q::new(), Q::new()];
        let x = Jet::<Q>::variable(s.clone(), 3, base.clone(), "x", ()).unwrap();
        let u = Jet::<Q>::variable(s.clone(), 3, base, "u", ()).unwrap();
        let g = &(&u * &x) + &(&u * &u);
        let parts = g.slices(1);
        assert!(parts[0].is_zero());
        assert_eq!(parts[1].coeff(&[1]), 1);
        assert_eq!(parts[2].coeff(&[0]), 1);
        assert_eq!(parts[1].order(), 3);
    }

    fn brute_mul(a: &Jet<Q>, b: &Jet<Q>) -> Jet<Q> {
        let s = a.space().clone();
        let order = a.order();
        let mut out = a.zero_like();
        for ma in s.monomials(order) {
            for mb in s.monomials(order) {
                let sum: Vec<u32> = ma.iter().zip(mb).map(|(p, q)| p + q).collect();
                if degree(&sum) <= order {
                    let c = out.coeff(&sum) + Q::from(&a.coeff(ma) * &b.coeff(mb));
                    out.set_coeff(&sum, c);
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn coefficientwise_sum(va in prop::collection::vec(-9i64..9, 1..12),
                               vb in prop::collection::vec(-9i64..9, 1..12)) {
            let s = space2(4);
            let (a, b) = (random_jet(&s, 4, &va), random_jet(&s, 4, &vb));
            let sum = &a + &b;
            for m in s.monomials(4) {
                prop_assert_eq!(sum.coeff(m), Q::from(&a.coeff(m) + &b.coeff(m)));
            }
            prop_assert_eq!(&a + &b, &b + &a);
        }

        #[test]
        fn product_matches_brute_force(va in prop::collection::vec(-9i64..9, 1..12),
                                       vb in prop::collection::vec(-9i64..9, 1..12)) {
            let s = space2(5);
            let (a, b) = (random_jet(&s, 5, &va), random_jet(&s, 5, &vb));
            prop_assert_eq!(&a * &b, brute_mul(&a, &b));
        }

        #[test]
        fn ring_axioms(va in prop::collection::vec(-9i64..9, 1..12),
                       vb in prop::collection::vec(-9i64..9, 1..12),
                       vc in prop::collection::vec(-9i64..9, 1..12)) {
            let s = space2(8);
            let (a, b, c) = (random_jet(&s, 8, &va), random_jet(&s, 8, &vb), random_jet(&s, 8, &vc));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&a * &one(&s, 8), a.clone());
        }

        #[test]
        fn division_multiplies_back(va in prop::collection::vec(-9i64..9, 1..12),
                                    vb in prop::collection::vec(-9i64..9, 1..12)) {
            let s = space2(6);
            let a = random_jet(&s, 6, &va);
            let mut b = random_jet(&s, 6, &vb);
            b.set_coeff(&[0, 0], q(3, 2));
            let quo = a.try_div(&b).unwrap();
            prop_assert_eq!(&quo * &b, a.clone());
            prop_assert_eq!(b.try_div(&b).unwrap(), one(&s, 6));
        }

        #[test]
        fn schwarz_and_leibniz(va in prop::collection::vec(-9i64..9, 1..12),
                               vb in prop::collection::vec(-9i64..9, 1..12)) {
            let s = space2(6);
            let (a, b) = (random_jet(&s, 6, &va), random_jet(&s, 6, &vb));
            let xy = a.diff(0).unwrap().diff(1).unwrap();
            let yx = a.diff(1).unwrap().diff(0).unwrap();
            prop_assert_eq!(xy, yx);
            let lhs = (&a * &b).diff(0).unwrap();
            let rhs = &(&a.diff(0).unwrap() * &b) + &(&a * &b.diff(0).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn truncation_coherence(va in prop::collection::vec(-9i64..9, 1..12),
                                vb in prop::collection::vec(-9i64..9, 1..12),
                                m in 0u32..6) {
            let s = space2(6);
            let (a, b) = (random_jet(&s, 6, &va), random_jet(&s, 6, &vb));
            prop_assert_eq!((&a * &b).truncate(m), &a.truncate(m) * &b.truncate(m));
            let mut u = b.clone();
            u.set_coeff(&[0, 0], Q::from(2));
            prop_assert_eq!(a.try_div(&u).unwrap().truncate(m),
                            a.truncate(m).try_div(&u.truncate(m)).unwrap());
        }
    }
}

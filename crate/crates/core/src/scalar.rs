//! Coefficient fields for jets.
//!
//! Two backends implement [`Scalar`]: exact rationals (`rug::Rational`) and
//! MPFR floats of a fixed precision (`rug::Float`). Complexified quantities are
//! carried as pairs of real jets (see [`crate::complex`]), so the scalar layer
//! is real only.
//!
//! The exact backend refuses to approximate. Elementary functions succeed only
//! where the value is rational (`exp(0)`, `log(1)`, `sqrt` of a rational
//! square, ...), and report [`Error::NeedsFloat`] otherwise.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Smallest precision accepted for the float backend.
pub const MIN_FLOAT_PRECISION: u32 = 128;

pub trait Scalar: Clone + Debug + Display + PartialEq + Send + Sync + 'static {
    /// Construction context (float precision; nothing for rationals).
    type Ctx: Clone + Debug + PartialEq + Eq + Send + Sync + 'static;

    const EXACT: bool;
    const BACKEND: &'static str;

    fn ctx(&self) -> Self::Ctx;
    fn from_rational(ctx: &Self::Ctx, q: &Rational) -> Self;
    fn parse(ctx: &Self::Ctx, text: &str) -> Result<Self>;

    fn from_i64(ctx: &Self::Ctx, n: i64) -> Self {
        Self::from_rational(ctx, &Rational::from(n))
    }
    fn zero(ctx: &Self::Ctx) -> Self {
        Self::from_i64(ctx, 0)
    }
    fn one(ctx: &Self::Ctx) -> Self {
        Self::from_i64(ctx, 1)
    }

    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// `self += a * b`
    fn add_mul(&mut self, a: &Self, b: &Self);
    fn add_assign(&mut self, other: &Self);
    fn sub_assign(&mut self, other: &Self);
    /// `None` when `self` is exactly zero.
    fn recip(&self) -> Option<Self>;

    fn div(&self, other: &Self) -> Option<Self> {
        other.recip().map(|r| self.mul(&r))
    }
    fn scale_rational(&self, q: &Rational) -> Self {
        self.mul(&Self::from_rational(&self.ctx(), q))
    }

    /// Sign compared to zero.
    fn sign(&self) -> Ordering;
    fn abs_cmp(&self, other: &Self) -> Ordering;
    /// `|self| <= bound`.
    fn abs_le(&self, bound: f64) -> bool;
    fn to_f64(&self) -> f64;

    /// Default comparison tolerance: 0 for exact, `2^(-precision/2)` for floats.
    fn default_tolerance(ctx: &Self::Ctx) -> f64;

    /// Zero for exact values, `|self| <= tol` for floats.
    fn negligible(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.abs_le(tol)
        }
    }

    fn sqrt(&self) -> Result<Self>;
    fn exp(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
    fn sin(&self) -> Result<Self>;
    fn cos(&self) -> Result<Self>;
    fn asin(&self) -> Result<Self>;
    fn asinh(&self) -> Result<Self>;
}

fn domain(func: &str, value: &impl Display) -> Error {
    Error::Domain {
        func: func.to_string(),
        value: value.to_string(),
    }
}

fn needs_float(func: &str, value: &impl Display) -> Error {
    Error::NeedsFloat {
        func: func.to_string(),
        value: value.to_string(),
    }
}

/// Parses `"3"`, `"-7/4"`, `"0.125"` or `"1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Invalid(format!("not a rational number: `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains('/') {
        return s.parse::<Rational>().map_err(|_| bad());
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let numer: Integer = all.parse().map_err(|_| bad())?;
    let shift = exponent - frac_part.len() as i32;
    let mut q = Rational::from(numer);
    if shift >= 0 {
        q *= Rational::from(Integer::from(Integer::u_pow_u(10, shift as u32)));
    } else {
        q /= Rational::from(Integer::from(Integer::u_pow_u(10, (-shift) as u32)));
    }
    if negative {
        q = -q;
    }
    Ok(q)
}

/// Exact square root of a rational square.
fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.cmp0() == Ordering::Less {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    if n.is_perfect_square() && d.is_perfect_square() {
        Some(Rational::from((n.clone().sqrt(), d.clone().sqrt())))
    } else {
        None
    }
}

impl Scalar for Rational {
    type Ctx = ();
    const EXACT: bool = true;
    const BACKEND: &'static str = "exact";

    fn ctx(&self) -> Self::Ctx {}

    fn from_rational(_: &(), q: &Rational) -> Self {
        q.clone()
    }

    fn parse(_: &(), text: &str) -> Result<Self> {
        parse_rational(text)
    }

    fn is_zero(&self) -> bool {
        self.cmp0() == Ordering::Equal
    }
    fn add(&self, other: &Self) -> Self {
        Rational::from(self + other)
    }
    fn sub(&self, other: &Self) -> Self {
        Rational::from(self - other)
    }
    fn mul(&self, other: &Self) -> Self {
        Rational::from(self * other)
    }
    fn neg(&self) -> Self {
        Rational::from(-self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        if a.cmp0() == Ordering::Equal || b.cmp0() == Ordering::Equal {
            return;
        }
        *self += Rational::from(a * b);
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
    fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rational::from(self.recip_ref()))
        }
    }
    fn sign(&self) -> Ordering {
        self.cmp0()
    }
    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.cmp_abs(other)
    }
    fn abs_le(&self, bound: f64) -> bool {
        match Rational::from_f64(bound) {
            Some(b) => self.cmp_abs(&b) != Ordering::Greater,
            None => false,
        }
    }
    fn to_f64(&self) -> f64 {
        Rational::to_f64(self)
    }
    fn default_tolerance(_: &()) -> f64 {
        0.0
    }

    fn sqrt(&self) -> Result<Self> {
        if self.cmp0() != Ordering::Greater {
            return Err(domain("sqrt", self));
        }
        rational_sqrt(self).ok_or_else(|| needs_float("sqrt", self))
    }
    fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Rational::from(1))
        } else {
            Err(needs_float("exp", self))
        }
    }
    fn ln(&self) -> Result<Self> {
        if self.cmp0() != Ordering::Greater {
            return Err(domain("log", self));
        }
        if *self == 1 {
            Ok(Rational::new())
        } else {
            Err(needs_float("log", self))
        }
    }
    fn sin(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Rational::new())
        } else {
            Err(needs_float("sin", self))
        }
    }
    fn cos(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Rational::from(1))
        } else {
            Err(needs_float("cos", self))
        }
    }
    fn asin(&self) -> Result<Self> {
        if self.cmp_abs(&Rational::from(1)) != Ordering::Less {
            return Err(domain("arcsin", self));
        }
        if self.is_zero() {
            Ok(Rational::new())
        } else {
            Err(needs_float("arcsin", self))
        }
    }
    fn asinh(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Rational::new())
        } else {
            Err(needs_float("arcsinh", self))
        }
    }
}

/// Precision (in bits) of a float backend.
pub type Precision = u32;

impl Scalar for Float {
    type Ctx = Precision;
    const EXACT: bool = false;
    const BACKEND: &'static str = "float";

    fn ctx(&self) -> Precision {
        self.prec()
    }

    fn from_rational(prec: &Precision, q: &Rational) -> Self {
        Float::with_val(*prec, q)
    }

    fn parse(prec: &Precision, text: &str) -> Result<Self> {
        // Rational literals ("1/3") are rounded once, at full precision.
        if let Ok(q) = parse_rational(text) {
            return Ok(Float::with_val(*prec, &q));
        }
        Float::parse(text.trim())
            .map(|p| Float::with_val(*prec, p))
            .map_err(|_| Error::Invalid(format!("not a number: `{text}`")))
    }

    fn is_zero(&self) -> bool {
        Float::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        Float::with_val(self.prec(), self + other)
    }
    fn sub(&self, other: &Self) -> Self {
        Float::with_val(self.prec(), self - other)
    }
    fn mul(&self, other: &Self) -> Self {
        Float::with_val(self.prec(), self * other)
    }
    fn neg(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
    fn recip(&self) -> Option<Self> {
        if Float::is_zero(self) {
            None
        } else {
            Some(Float::with_val(self.prec(), self.recip_ref()))
        }
    }
    fn sign(&self) -> Ordering {
        self.cmp0().unwrap_or(Ordering::Equal)
    }
    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.cmp_abs(other).unwrap_or(Ordering::Equal)
    }
    fn abs_le(&self, bound: f64) -> bool {
        Float::with_val(self.prec(), self.abs_ref()) <= bound
    }
    fn to_f64(&self) -> f64 {
        Float::to_f64(self)
    }
    fn default_tolerance(prec: &Precision) -> f64 {
        2f64.powi(-(*prec as i32) / 2)
    }

    fn sqrt(&self) -> Result<Self> {
        if self.sign() != Ordering::Greater {
            return Err(domain("sqrt", self));
        }
        Ok(Float::with_val(self.prec(), self.sqrt_ref()))
    }
    fn exp(&self) -> Result<Self> {
        Ok(Float::with_val(self.prec(), self.exp_ref()))
    }
    fn ln(&self) -> Result<Self> {
        if self.sign() != Ordering::Greater {
            return Err(domain("log", self));
        }
        Ok(Float::with_val(self.prec(), self.ln_ref()))
    }
    fn sin(&self) -> Result<Self> {
        Ok(Float::with_val(self.prec(), self.sin_ref()))
    }
    fn cos(&self) -> Result<Self> {
        Ok(Float::with_val(self.prec(), self.cos_ref()))
    }
    fn asin(&self) -> Result<Self> {
        if self.cmp_abs(&Float::with_val(self.prec(), 1)) != Some(Ordering::Less) {
            return Err(domain("arcsin", self));
        }
        Ok(Float::with_val(self.prec(), self.asin_ref()))
    }
    fn asinh(&self) -> Result<Self> {
        Ok(Float::with_val(self.prec(), self.asinh_ref()))
    }
}

/// Validates a user-supplied float precision.
pub fn check_precision(prec: u32) -> Result<Precision> {
    if prec < MIN_FLOAT_PRECISION {
        Err(Error::Invalid(format!(
            "float precision must be at least {MIN_FLOAT_PRECISION} bits, got {prec}"
        )))
    } else {
        Ok(prec)
    }
}

/// Decimal rendering used in reports. Exact values keep their `p/q` form.
pub fn render<S: Scalar>(s: &S) -> String {
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn parses_rational_literals() {
        assert_eq!(q("3"), Rational::from(3));
        assert_eq!(q("-7/4"), Rational::from((-7, 4)));
        assert_eq!(q("0.125"), Rational::from((1, 8)));
        assert_eq!(q("-1.5e-3"), Rational::from((-3, 2000)));
        assert_eq!(q(".5"), Rational::from((1, 2)));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1..2").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn exact_elementary_values() {
        assert_eq!(Rational::new().exp().unwrap(), 1);
        assert_eq!(Rational::from(1).ln().unwrap(), 0);
        assert_eq!(q("9/4").sqrt().unwrap(), q("3/2"));
        assert!(matches!(Rational::from(2).sqrt(), Err(Error::NeedsFloat { .. })));
        assert!(matches!(Rational::from(1).exp(), Err(Error::NeedsFloat { .. })));
        assert!(matches!(Rational::new().ln(), Err(Error::Domain { .. })));
        assert!(matches!(Rational::from(1).asin(), Err(Error::Domain { .. })));
        assert!(matches!(q("-1/4").sqrt(), Err(Error::Domain { .. })));
    }

    #[test]
    fn float_tolerance_tracks_precision() {
        let t = <Float as Scalar>::default_tolerance(&256);
        assert_eq!(t, 2f64.powi(-128));
        let x = Float::with_val(256, -1);
        let a = Scalar::asin(&Scalar::exp(&x).unwrap()).unwrap();
        assert!((a.to_f64() - 0.376_727_508_058_575).abs() < 1e-14);
        assert!(Scalar::asin(&Float::with_val(256, 2)).is_err());
        assert!(check_precision(64).is_err());
    }

    #[test]
    fn float_parse_accepts_fractions() {
        let third = <Float as Scalar>::parse(&256, "1/3").unwrap();
        let back = Scalar::mul(&third, &Float::with_val(256, 3));
        assert!(Scalar::sub(&back, &Float::with_val(256, 1)).abs_le(1e-70));
    }
}

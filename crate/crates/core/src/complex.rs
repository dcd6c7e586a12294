//! Complexified jets, stored as a real part and an imaginary part.
//!
//! Every quantity on the CR side is a function of real coordinates with
//! complex values, so a pair of real jets over the same variables suffices and
//! the exact backend stays usable (`i` is exact).

use std::ops::{Add, Mul, Neg, Sub};

use rug::Rational;

use crate::error::Result;
use crate::jet::Jet;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CJet<S: Scalar> {
    pub re: Jet<S>,
    pub im: Jet<S>,
}

impl<S: Scalar> CJet<S> {
    pub fn new(re: Jet<S>, im: Jet<S>) -> Self {
        CJet { re, im }
    }

    pub fn real(re: Jet<S>) -> Self {
        let im = re.zero_like();
        CJet { re, im }
    }

    pub fn imag(im: Jet<S>) -> Self {
        let re = im.zero_like();
        CJet { re, im }
    }

    pub fn order(&self) -> u32 {
        self.re.order().min(self.im.order())
    }

    pub fn conj(&self) -> Self {
        CJet {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    /// Multiplication by `i`.
    pub fn times_i(&self) -> Self {
        CJet {
            re: -&self.im,
            im: self.re.clone(),
        }
    }

    pub fn scale_rational(&self, q: &Rational) -> Self {
        CJet {
            re: self.re.scale_rational(q),
            im: self.im.scale_rational(q),
        }
    }

    pub fn zero_like(&self) -> Self {
        CJet::real(self.re.zero_like())
    }

    pub fn one_like(&self) -> Self {
        CJet::real(self.re.one_like())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.re.is_negligible(tol) && self.im.is_negligible(tol)
    }

    pub fn truncate(&self, order: u32) -> Self {
        CJet {
            re: self.re.truncate(order),
            im: self.im.truncate(order),
        }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        Ok(CJet {
            re: self.re.try_add(&o.re)?,
            im: self.im.try_add(&o.im)?,
        })
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self> {
        Ok(CJet {
            re: self.re.try_sub(&o.re)?,
            im: self.im.try_sub(&o.im)?,
        })
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self> {
        let re = self.re.try_mul(&o.re)?.try_sub(&self.im.try_mul(&o.im)?)?;
        let im = self.re.try_mul(&o.im)?.try_add(&self.im.try_mul(&o.re)?)?;
        Ok(CJet { re, im })
    }

    /// `self / o` through `o_conj / |o|^2`; `|o|^2` must be a unit.
    pub fn try_div(&self, o: &Self) -> Result<Self> {
        let norm = o.re.try_mul(&o.re)?.try_add(&o.im.try_mul(&o.im)?)?;
        let num = self.try_mul(&o.conj())?;
        Ok(CJet {
            re: num.re.try_div(&norm)?,
            im: num.im.try_div(&norm)?,
        })
    }

    pub fn mul_real(&self, r: &Jet<S>) -> Result<Self> {
        Ok(CJet {
            re: self.re.try_mul(r)?,
            im: self.im.try_mul(r)?,
        })
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut out = self.one_like();
        for _ in 0..n {
            out = out.try_mul(self)?;
        }
        Ok(out)
    }
}

macro_rules! cbinop {
    ($trait:ident, $method:ident, $call:ident) => {
        impl<'a, S: Scalar> $trait<&'a CJet<S>> for &'a CJet<S> {
            type Output = CJet<S>;
            fn $method(self, rhs: &'a CJet<S>) -> CJet<S> {
                self.$call(rhs).expect(concat!("complex jet ", stringify!($method)))
            }
        }
    };
}

cbinop!(Add, add, try_add);
cbinop!(Sub, sub, try_sub);
cbinop!(Mul, mul, try_mul);

impl<S: Scalar> Neg for &CJet<S> {
    type Output = CJet<S>;
    fn neg(self) -> CJet<S> {
        CJet {
            re: -&self.re,
            im: -&self.im,
        }
    }
}

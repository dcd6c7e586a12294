//! Elementary functions of jets and the implicit-function solver.
//!
//! `f(a)` is formed by substituting `h = a - a0` (no constant term, so
//! `h^(N+1) = 0`) into the Taylor series of `f` at `a0`. The series is built
//! from the value of `f` at `a0`, which the scalar backend may refuse to
//! produce exactly.

use std::fmt;
use std::str::FromStr;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::space::VarSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Arcsin,
    Arcsinh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Arcsin,
        Func::Arcsinh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Arcsin => "arcsin",
            Func::Arcsinh => "arcsinh",
            Func::Sqrt => "sqrt",
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Func {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Func::ALL.into_iter().find(|f| f.name() == s).ok_or(())
    }
}

/// `sum_k c[k] h^k` by Horner; `h` must have no constant term.
fn series_at<S: Scalar>(c: &[S], h: &Jet<S>) -> Result<Jet<S>> {
    let mut acc = h.const_like(c[c.len() - 1].clone());
    for ck in c[..c.len() - 1].iter().rev() {
        acc = acc.try_mul(h)?.add_scalar(ck);
    }
    Ok(acc)
}

/// `(1 + e)^alpha` for `e` without constant term.
fn unit_power<S: Scalar>(e: &Jet<S>, alpha: &Rational, order: u32) -> Result<Jet<S>> {
    let ctx = e.ctx().clone();
    let mut c = Vec::with_capacity(order as usize + 1);
    let mut binom = Rational::from(1);
    for k in 0..=order {
        c.push(S::from_rational(&ctx, &binom));
        binom *= alpha - Rational::from(k);
        binom /= Rational::from(k + 1);
    }
    series_at(&c, e)
}

/// Taylor coefficients of `(1 -+ (a0 + t)^2)^(-1/2)` at `t = 0`, used for the
/// derivatives of arcsin (`sign = -1`) and arcsinh (`sign = +1`).
fn inv_sqrt_quadratic<S: Scalar>(a0: &S, sign: i64, order: u32) -> Result<Vec<S>> {
    let ctx = a0.ctx();
    let space = VarSpace::new(&["t"], order);
    let t = Jet::variable(space, order, vec![S::zero(&ctx)], "t", ctx.clone())?;
    let shifted = t.add_scalar(a0);
    let w = (&shifted * &shifted).scale_i64(sign).add_scalar(&S::one(&ctx));
    let w0 = w.constant_term().clone();
    let inv_w0 = w0.recip().ok_or_else(|| Error::Domain {
        func: if sign < 0 { "arcsin" } else { "arcsinh" }.into(),
        value: a0.to_string(),
    })?;
    let e = w.add_scalar(&w0.neg()).scale(&inv_w0);
    let root = unit_power(&e, &Rational::from((-1, 2)), order)?;
    let scale = w0.sqrt()?.recip().expect("positive root");
    Ok(root.scale(&scale).coeffs().to_vec())
}

fn taylor_coeffs<S: Scalar>(f: Func, a0: &S, order: u32) -> Result<Vec<S>> {
    let ctx = a0.ctx();
    let n = order as usize;
    let fact = |k: usize| -> Rational { Rational::from(rug::Integer::factorial(k as u32)) };
    let mut c = Vec::with_capacity(n + 1);
    match f {
        Func::Exp => {
            let e = a0.exp()?;
            for k in 0..=n {
                c.push(e.scale_rational(&Rational::from(fact(k).recip_ref())));
            }
        }
        Func::Log => {
            c.push(a0.ln()?);
            let inv = a0.recip().expect("positive argument");
            let mut p = S::one(&ctx);
            for k in 1..=n {
                p = p.mul(&inv);
                let sgn = if k % 2 == 1 { 1 } else { -1 };
                c.push(p.scale_rational(&Rational::from((sgn, k as i64))));
            }
        }
        Func::Sin | Func::Cos => {
            let (s, co) = (a0.sin()?, a0.cos()?);
            let cycle = if f == Func::Sin {
                [s.clone(), co.clone(), s.neg(), co.neg()]
            } else {
                [co.clone(), s.neg(), co.neg(), s.clone()]
            };
            for k in 0..=n {
                c.push(cycle[k % 4].scale_rational(&Rational::from(fact(k).recip_ref())));
            }
        }
        Func::Sqrt => {
            let r = a0.sqrt()?;
            let inv = a0.recip().expect("positive argument");
            let half = Rational::from((1, 2));
            let mut binom = Rational::from(1);
            let mut p = r;
            for k in 0..=n {
                c.push(p.scale_rational(&binom));
                binom *= &half - Rational::from(k as u32);
                binom /= Rational::from(k as u32 + 1);
                p = p.mul(&inv);
            }
        }
        Func::Arcsin | Func::Arcsinh => {
            let c0 = if f == Func::Arcsin { a0.asin()? } else { a0.asinh()? };
            c.push(c0);
            if n > 0 {
                let sign = if f == Func::Arcsin { -1 } else { 1 };
                let g = inv_sqrt_quadratic(a0, sign, order - 1)?;
                for k in 1..=n {
                    c.push(g[k - 1].scale_rational(&Rational::from((1, k as i64))));
                }
            }
        }
    }
    Ok(c)
}

/// Jet of `f o a`, truncated at the order of `a`.
pub fn lift<S: Scalar>(f: Func, a: &Jet<S>) -> Result<Jet<S>> {
    let a0 = a.constant_term().clone();
    let c = taylor_coeffs(f, &a0, a.order())?;
    let h = a.add_scalar(&a0.neg());
    series_at(&c, &h)
}

/// Integer power, the remaining member of the lift family.
pub fn pow_int<S: Scalar>(a: &Jet<S>, n: i64) -> Result<Jet<S>> {
    a.pow_int(n)
}

/// Solves `G(vars, u) = 0` for `u(vars)` near the base point of `G`.
///
/// `G(base) = 0` and `dG/du(base) != 0` are required. Each pass of the
/// fixed-point map `h <- h - G(vars, u0 + h) / G_u(base)` fixes one more
/// degree, so `order + 1` passes reach the full jet.
pub fn implicit_solve<S: Scalar>(g: &Jet<S>, u: &str) -> Result<Jet<S>> {
    let ui = g
        .space()
        .var_index(u)
        .ok_or_else(|| Error::UnknownVariable(u.to_string()))?;
    let tol = S::default_tolerance(g.ctx());
    if !g.constant_term().negligible(tol) {
        return Err(Error::ImplicitNotZero(g.constant_term().to_string()));
    }
    let mut e = vec![0u32; g.nvars()];
    e[ui] = 1;
    let gu = g.coeff(&e);
    if gu.negligible(tol) {
        return Err(Error::ImplicitDegenerate(u.to_string()));
    }
    let inv = gu.recip().ok_or_else(|| Error::ImplicitDegenerate(u.to_string()))?;
    let slices = g.slices(ui);
    let mut h = slices[0].zero_like();
    for _ in 0..=g.order() {
        let r = series_at_jets(&slices, &h)?;
        if r.is_zero() {
            break;
        }
        h = &h - &r.scale(&inv);
    }
    let u0 = g.base()[ui].clone();
    Ok(h.add_scalar(&u0))
}

/// Horner over jet-valued coefficients, `sum_k g_k h^k`.
fn series_at_jets<S: Scalar>(g: &[Jet<S>], h: &Jet<S>) -> Result<Jet<S>> {
    let mut acc = g[g.len() - 1].clone();
    for gk in g[..g.len() - 1].iter().rev() {
        acc = acc.try_mul(h)?.try_add(gk)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::VarSpace;
    use rug::Float;

    type Q = Rational;

    fn xjet(order: u32) -> Jet<Q> {
        Jet::variable(VarSpace::new(&["x"], order), order, vec![Q::new()], "x", ()).unwrap()
    }

    #[test]
    fn exp_and_log_series() {
        let x = xjet(3);
        let e = lift(Func::Exp, &x).unwrap();
        let want = [Q::from(1), Q::from(1), Q::from((1, 2)), Q::from((1, 6))];
        assert_eq!(e.coeffs(), &want);
        let l = lift(Func::Log, &x.add_scalar(&Q::from(1))).unwrap();
        let want = [Q::new(), Q::from(1), Q::from((-1, 2)), Q::from((1, 3))];
        assert_eq!(l.coeffs(), &want);
    }

    #[test]
    fn exact_backend_refuses_irrational_bases() {
        let x = xjet(3).add_scalar(&Q::from(1));
        assert!(matches!(lift(Func::Exp, &x), Err(Error::NeedsFloat { .. })));
        let neg = xjet(3).add_scalar(&Q::from(-1));
        assert!(matches!(lift(Func::Log, &neg), Err(Error::Domain { .. })));
        assert!(matches!(lift(Func::Arcsin, &neg), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_pairs_compose_to_identity() {
        let x = xjet(8);
        let s = lift(Func::Sin, &x).unwrap();
        assert_eq!(lift(Func::Arcsin, &s).unwrap(), x);
        let sh = lift(Func::Sqrt, &x.add_scalar(&Q::from(4))).unwrap();
        assert_eq!(&sh * &sh, x.add_scalar(&Q::from(4)));
        let e = lift(Func::Exp, &x).unwrap();
        assert_eq!(lift(Func::Log, &e).unwrap(), x);
    }

    #[test]
    fn chain_rule_for_each_function() {
        let x = xjet(7);
        let a = (&x + &(&x * &x).scale_rational(&Q::from((1, 3)))).add_scalar(&Q::new());
        for f in [Func::Exp, Func::Sin, Func::Cos, Func::Arcsin, Func::Arcsinh] {
            let fa = lift(f, &a).unwrap();
            let lhs = fa.diff(0).unwrap();
            let da = a.diff(0).unwrap();
            let fprime = match f {
                Func::Exp => fa.clone(),
                Func::Sin => lift(Func::Cos, &a).unwrap(),
                Func::Cos => -lift(Func::Sin, &a).unwrap(),
                Func::Arcsin => lift(Func::Sqrt, &(&a.one_like() - &(&a * &a))).unwrap().recip().unwrap(),
                Func::Arcsinh => lift(Func::Sqrt, &(&a.one_like() + &(&a * &a))).unwrap().recip().unwrap(),
                _ => unreachable!(),
            };
            assert_eq!(lhs, &fprime.truncate(6) * &da, "{f}");
        }
    }

    /// Central finite differences of `asin(exp(x))` at -1, from the closed form
    /// derivative `e^x / sqrt(1 - e^{2x})` and its own differences.
    #[test]
    fn arcsin_exp_matches_finite_differences() {
        let prec = 256;
        let space = VarSpace::new(&["x"], 6);
        let base = Float::with_val(prec, -1);
        let x = Jet::variable(space, 6, vec![base.clone()], "x", prec).unwrap();
        let j = lift(Func::Arcsin, &lift(Func::Exp, &x).unwrap()).unwrap();
        let f = |t: &Float| Float::with_val(prec, t.exp_ref()).asin();
        let h = Float::with_val(prec, 1e-12);
        let plus = f(&Float::with_val(prec, &base + &h));
        let minus = f(&Float::with_val(prec, &base - &h));
        let d1 = Float::with_val(prec, &plus - &minus) / Float::with_val(prec, 2 * &h);
        let c1 = j.coeffs()[1].clone();
        assert!((d1 - c1).abs() < 1e-20);
        let mid = f(&base);
        let d2 = (plus + minus - Float::with_val(prec, 2 * &mid)) / Float::with_val(prec, &h * &h);
        let c2 = Float::with_val(prec, &j.coeffs()[2] * 2);
        assert!((d2 - c2).abs() < 1e-20);
    }

    #[test]
    fn implicit_examples() {
        let s = VarSpace::new(&["x", "y", "u"], 6);
        let b = vec![Q::new(), Q::new(), Q::new()];
        let v = |n: &str| Jet::<Q>::variable(s.clone(), 6, b.clone(), n, ()).unwrap();
        let (x, y, u) = (v("x"), v("y"), v("u"));
        let g = &(&u * &(&u.one_like() - &y)) - &(&x * &x);
        let sol = implicit_solve(&g, "u").unwrap();
        let xy = VarSpace::new(&["x", "y"], 6);
        let b2 = vec![Q::new(), Q::new()];
        let x2 = Jet::<Q>::variable(xy.clone(), 6, b2.clone(), "x", ()).unwrap();
        let y2 = Jet::<Q>::variable(xy, 6, b2, "y", ()).unwrap();
        assert_eq!(&sol * &(&y2.one_like() - &y2), &x2 * &x2);
        let bad = g.add_scalar(&Q::from(1));
        assert!(matches!(implicit_solve(&bad, "u"), Err(Error::ImplicitNotZero(_))));
        let flat = &(&u * &u) - &(&x * &x);
        assert!(matches!(implicit_solve(&flat, "u"), Err(Error::ImplicitDegenerate(_))));
    }

    #[test]
    fn implicit_residual_vanishes() {
        // G = u + x*u^2 - y + x^3*u, solved, then substituted back.
        let s = VarSpace::new(&["x", "y", "u"], 7);
        let b = vec![Q::new(), Q::new(), Q::new()];
        let v = |n: &str| Jet::<Q>::variable(s.clone(), 7, b.clone(), n, ()).unwrap();
        let (x, y, u) = (v("x"), v("y"), v("u"));
        let g = &(&(&u + &(&x * &(&u * &u))) - &y) + &(&(&x * &x) * &(&x * &u));
        let sol = implicit_solve(&g, "u").unwrap();
        let xs = Jet::<Q>::variable(sol.space().clone(), 7, sol.base().to_vec(), "x", ()).unwrap();
        let ys = Jet::<Q>::variable(sol.space().clone(), 7, sol.base().to_vec(), "y", ()).unwrap();
        let back = g.compose(&[xs, ys, sol]).unwrap();
        assert!(back.is_zero());
    }
}

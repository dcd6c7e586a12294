//! Real affine relative invariants of graphed curves `u = F(x)` and surfaces
//! `u = F(x, y)`, returned as jets so that identical vanishing up to the
//! truncation order is a finite coefficient check.

use std::collections::BTreeMap;

use rug::Rational;
use serde::Serialize;

use crate::cr::{self, Frame, KernelFrame};
use crate::diffalg::{coord_name, DPoly, DVar, Equation, System};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::space::VarSpace;

/// Float vanishing threshold for invariant verdicts.
pub const DEFAULT_VANISHING_TOLERANCE: f64 = 1e-40;

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ExactZero,
    BelowTolerance,
    Nonzero,
    PreconditionFailed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ExactZero => "exact-zero",
            Verdict::BelowTolerance => "below-tolerance",
            Verdict::Nonzero => "nonzero",
            Verdict::PreconditionFailed => "precondition-failed",
        }
    }

    pub fn vanishes(self) -> bool {
        matches!(self, Verdict::ExactZero | Verdict::BelowTolerance)
    }
}

/// `exact-zero` only on the exact backend; floats compare every coefficient
/// against `tol`.
pub fn verdict<S: Scalar>(j: &Jet<S>, tol: f64) -> Verdict {
    if S::EXACT {
        if j.is_zero() {
            Verdict::ExactZero
        } else {
            Verdict::Nonzero
        }
    } else if j.is_negligible(tol) {
        Verdict::BelowTolerance
    } else {
        Verdict::Nonzero
    }
}

// ---------------------------------------------------------------------------
// Preconditions and partials

fn require_dim<S: Scalar>(f: &Jet<S>, dim: usize, what: &str) -> Result<()> {
    if f.nvars() != dim {
        return Err(Error::Invalid(format!(
            "{what} needs a graph over {dim} variable(s), got {}",
            f.nvars()
        )));
    }
    Ok(())
}

fn require_order<S: Scalar>(f: &Jet<S>, needed: u32, what: &str) -> Result<()> {
    if f.order() < needed {
        return Err(Error::OrderTooLow {
            what: what.into(),
            needed,
            got: f.order(),
        });
    }
    Ok(())
}

fn at_base_zero<S: Scalar>(j: &Jet<S>) -> bool {
    j.constant_term().negligible(S::default_tolerance(j.ctx()))
}

/// `F_xx(base) != 0`.
pub fn require_fxx<S: Scalar>(f: &Jet<S>) -> Result<()> {
    if at_base_zero(&dx(f, 2, 0)?) {
        return Err(Error::Hypothesis("F_xx vanishes at the base point".into()));
    }
    Ok(())
}

/// `d^j_x d^k_y F`; curves accept `k = 0` only.
pub fn dx<S: Scalar>(f: &Jet<S>, j: u32, k: u32) -> Result<Jet<S>> {
    match f.nvars() {
        1 if k == 0 => f.partial(&[j]),
        1 => Ok(f.truncate(f.order().saturating_sub(j + k)).zero_like()),
        _ => {
            let mut m = vec![0; f.nvars()];
            m[0] = j;
            m[1] = k;
            f.partial(&m)
        }
    }
}

// ---------------------------------------------------------------------------
// Hessians

/// Determinant of the Hessian of `rho` bordered by its gradient.
pub fn bordered_hessian<S: Scalar>(rho: &Jet<S>) -> Result<Jet<S>> {
    require_order(rho, 2, "bordered Hessian")?;
    let n = rho.nvars();
    let top = rho.order() - 2;
    let grad: Vec<Jet<S>> = (0..n).map(|i| rho.diff(i).map(|d| d.truncate(top))).collect::<Result<_>>()?;
    let mut m = Vec::with_capacity(n + 1);
    let mut first = vec![grad[0].zero_like()];
    first.extend(grad.iter().cloned());
    m.push(first);
    for i in 0..n {
        let mut row = vec![grad[i].clone()];
        for j in 0..n {
            let mut e = vec![0; n];
            e[i] += 1;
            e[j] += 1;
            row.push(rho.partial(&e)?);
        }
        m.push(row);
    }
    Ok(cr::det(&m))
}

pub fn hessian_matrix<S: Scalar>(f: &Jet<S>) -> Result<Vec<Vec<Jet<S>>>> {
    require_order(f, 2, "Hessian")?;
    let n = f.nvars();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut e = vec![0; n];
                    e[i] += 1;
                    e[j] += 1;
                    f.partial(&e)
                })
                .collect()
        })
        .collect()
}

/// `det(F_{x_i x_j})`; for surfaces `F_xx F_yy - F_xy^2`.
pub fn hessian_det<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    Ok(cr::det(&hessian_matrix(f)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Signature {
    pub fn is_definite(&self) -> bool {
        self.zero == 0 && (self.positive == 0 || self.negative == 0)
    }
}

/// Signature of a symmetric matrix by congruent elimination. Zero pivots are
/// avoided by adding a row/column with a nonzero off-diagonal entry.
pub fn symmetric_signature<S: Scalar>(mut m: Vec<Vec<S>>, tol: f64) -> Signature {
    let mut sig = Signature {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    let small = |s: &S| s.negligible(tol);
    while !m.is_empty() {
        let n = m.len();
        let mut pivot: Option<usize> = None;
        for i in 0..n {
            if !small(&m[i][i]) && pivot.is_none_or(|p| m[i][i].abs_cmp(&m[p][p]) == std::cmp::Ordering::Greater) {
                pivot = Some(i);
            }
        }
        let p = match pivot {
            Some(p) => p,
            None => {
                let off = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| i != j && !small(&m[i][j]));
                match off {
                    None => {
                        sig.zero += n;
                        break;
                    }
                    Some((i, j)) => {
                        // Row and column i += row and column j.
                        for c in 0..n {
                            let add = m[j][c].clone();
                            m[i][c].add_assign(&add);
                        }
                        for r in 0..n {
                            let add = m[r][j].clone();
                            m[r][i].add_assign(&add);
                        }
                        continue;
                    }
                }
            }
        };
        let d = m[p][p].clone();
        match d.sign() {
            std::cmp::Ordering::Greater => sig.positive += 1,
            _ => sig.negative += 1,
        }
        let inv = d.recip().expect("nonzero pivot");
        let mut next = Vec::with_capacity(n - 1);
        for r in (0..n).filter(|&r| r != p) {
            let f = m[r][p].mul(&inv);
            let row = (0..n)
                .filter(|&c| c != p)
                .map(|c| m[r][c].sub(&f.mul(&m[p][c])))
                .collect();
            next.push(row);
        }
        m = next;
    }
    sig
}

/// Signature of the Hessian at the base point.
pub fn hessian_signature<S: Scalar>(f: &Jet<S>) -> Result<Signature> {
    let h = hessian_matrix(f)?;
    let vals = h.iter().map(|row| row.iter().map(|j| j.constant_term().clone()).collect()).collect();
    Ok(symmetric_signature(vals, S::default_tolerance(f.ctx())))
}

// ---------------------------------------------------------------------------
// Curves

/// `3 F_xx F_xxxx - 5 F_xxx^2`.
pub fn halphen<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 1, "Halphen invariant")?;
    require_order(f, 4, "Halphen invariant")?;
    require_fxx(f)?;
    let (f2, f3, f4) = (dx(f, 2, 0)?, dx(f, 3, 0)?, dx(f, 4, 0)?);
    (&f2 * &f4).scale_i64(3).try_sub(&(&f3 * &f3).scale_i64(5))
}

/// `9 F_xx^2 F_xxxxx - 45 F_xx F_xxx F_xxxx + 40 F_xxx^3`, in the first
/// variable (for surfaces this is the third flatness condition).
pub fn monge<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_order(f, 5, "Monge invariant")?;
    require_fxx(f)?;
    let (f2, f3, f4, f5) = (dx(f, 2, 0)?, dx(f, 3, 0)?, dx(f, 4, 0)?, dx(f, 5, 0)?);
    let a = (&(&f2 * &f2) * &f5).scale_i64(9);
    let b = (&(&f2 * &f3) * &f4).scale_i64(45);
    let c = (&(&f3 * &f3) * &f3).scale_i64(40);
    a.try_sub(&b)?.try_add(&c)
}

/// Sphericity invariant of the tube over `u = F(x)`: the universal Cartan
/// formula restricted symbolically to tubes, then evaluated on the jet.
pub fn cartan_tube<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 1, "tube Cartan invariant")?;
    require_order(f, 6, "tube Cartan invariant")?;
    require_fxx(f)?;
    cr::tube_cartan_polynomial().eval_on_jet(f)
}

fn fpoly(j: u8) -> DPoly {
    DPoly::var((j, 0))
}

/// The tube Cartan polynomial exactly as printed in the literature:
/// `1/16 (F2^3 F5 - 7 F2^2 F3 F4 - 4 F2^2 F4^2 + 25 F2 F3^2 F4 - 15 F3^3)`.
pub fn printed_cartan_polynomial() -> DPoly {
    let (f2, f3, f4, f5) = (fpoly(2), fpoly(3), fpoly(4), fpoly(5));
    f2.pow(3)
        .mul(&f5)
        .sub(&f2.pow(2).mul(&f3).mul(&f4).scale(&q(7, 1)))
        .sub(&f2.pow(2).mul(&f4.pow(2)).scale(&q(4, 1)))
        .add(&f2.mul(&f3.pow(2)).mul(&f4).scale(&q(25, 1)))
        .sub(&f3.pow(3).scale(&q(15, 1)))
        .scale(&q(1, 16))
}

/// The printed polynomial with its derivative orders repaired
/// (`F5 -> F6` and `F4 -> F5` in the first two terms, `F3^3 -> F3^4`) and
/// divided by `F2^4`, which makes every term of weight 12.
pub fn reconciled_cartan_polynomial() -> DPoly {
    let (f2, f3, f4, f5, f6) = (fpoly(2), fpoly(3), fpoly(4), fpoly(5), fpoly(6));
    f2.pow(3)
        .mul(&f6)
        .sub(&f2.pow(2).mul(&f3).mul(&f5).scale(&q(7, 1)))
        .sub(&f2.pow(2).mul(&f4.pow(2)).scale(&q(4, 1)))
        .add(&f2.mul(&f3.pow(2)).mul(&f4).scale(&q(25, 1)))
        .sub(&f3.pow(4).scale(&q(15, 1)))
        .scale(&q(1, 16))
        .mul(&DPoly::pivot_pow(-4))
}

pub fn printed_cartan<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 1, "printed Cartan polynomial")?;
    require_order(f, 5, "printed Cartan polynomial")?;
    printed_cartan_polynomial().eval_on_jet(f)
}

pub fn reconciled_cartan<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 1, "reconciled Cartan polynomial")?;
    require_order(f, 6, "reconciled Cartan polynomial")?;
    require_fxx(f)?;
    reconciled_cartan_polynomial().eval_on_jet(f)
}

/// One-variable jet at 0 with `3 F'' F'''' = 5 F'''^2` imposed coefficientwise;
/// `init` holds `F(0), F'(0), F''(0), F'''(0)`.
pub fn halphen_constrained_jet(init: [Rational; 4], order: u32) -> Result<Jet<Rational>> {
    if init[2] == 0 {
        return Err(Error::Hypothesis("F_xx(0) must be nonzero".into()));
    }
    let mut sys = System::new(vec![Equation {
        name: "halphen",
        lhs: (4, 0),
        rhs: fpoly(3).pow(2).mul(&DPoly::pivot_pow(-1)).scale(&q(5, 3)),
    }]);
    sys.solve_jet(&["x"], order, |v| init[v.0 as usize].clone())
}

// ---------------------------------------------------------------------------
// Surfaces

/// `F_xx F_xxy - F_xy F_xxx`.
pub fn s_aff_numerator<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 2, "S_aff")?;
    require_order(f, 3, "S_aff")?;
    let (f20, f21, f11, f30) = (dx(f, 2, 0)?, dx(f, 2, 1)?, dx(f, 1, 1)?, dx(f, 3, 0)?);
    (&f20 * &f21).try_sub(&(&f11 * &f30))
}

/// `(F_xx F_xxy - F_xy F_xxx) / F_xx^2`.
pub fn s_aff<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_fxx(f)?;
    let f20 = dx(f, 2, 0)?;
    s_aff_numerator(f)?.try_div(&(&f20 * &f20))
}

fn require_s_num<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    let s = s_aff_numerator(f)?;
    if at_base_zero(&s) {
        return Err(Error::Hypothesis(
            "F_xx F_xxy - F_xy F_xxx vanishes at the base point (not 2-nondegenerate)".into(),
        ));
    }
    Ok(s)
}

/// `F_xx^2 F_xxxy - F_xx F_xy F_xxxx + 2 F_xy F_xxx^2 - 2 F_xx F_xxx F_xxy`.
pub fn w_aff_numerator<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_dim(f, 2, "W_aff numerator")?;
    require_order(f, 4, "W_aff numerator")?;
    let (f20, f31, f11, f40, f30, f21) = (dx(f, 2, 0)?, dx(f, 3, 1)?, dx(f, 1, 1)?, dx(f, 4, 0)?, dx(f, 3, 0)?, dx(f, 2, 1)?);
    let a = &(&f20 * &f20) * &f31;
    let b = &(&f20 * &f11) * &f40;
    let c = (&(&f11 * &f30) * &f30).scale_i64(2);
    let d = (&(&f20 * &f30) * &f21).scale_i64(2);
    a.try_sub(&b)?.try_add(&c)?.try_sub(&d)
}

/// Reduced closed form of `W_aff` on rank-one Hessian surfaces:
/// numerator `/ (F_xx (F_xx F_xxy - F_xy F_xxx))`.
pub fn w_aff_reduced<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_fxx(f)?;
    let s = require_s_num(f)?;
    let num = w_aff_numerator(f)?;
    num.try_div(&(&dx(f, 2, 0)? * &s))
}

/// The literature quotient: numerator `/ (F_xx (F_xx F_xxy - F_xy F_xxx)^2)`.
pub fn w_aff_printed<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_fxx(f)?;
    let s = require_s_num(f)?;
    let num = w_aff_numerator(f)?;
    num.try_div(&(&dx(f, 2, 0)? * &(&s * &s)))
}

/// Real tube frame of `u = F(x, y)`: `ℒ_1 = ℒ̄_1 = 1/2 d/dx`,
/// `𝒦 = 1/2 (k d/dx + d/dy)` with `k = -F_xy/F_xx`, `P = F_xxx/(2 F_xx)`,
/// and `𝒯(k) = 0`.
pub struct TubeSurfaceFrame<S: Scalar> {
    pub k: Jet<S>,
    pub p: Jet<S>,
}

impl<S: Scalar> TubeSurfaceFrame<S> {
    pub fn new(f: &Jet<S>) -> Result<Self> {
        require_dim(f, 2, "tube frame")?;
        require_order(f, 3, "tube frame")?;
        require_fxx(f)?;
        require_s_num(f)?;
        let f20 = dx(f, 2, 0)?;
        let k = -&dx(f, 1, 1)?.try_div(&f20)?;
        let p = dx(f, 3, 0)?.try_div(&f20)?.scale_rational(&q(1, 2));
        Ok(TubeSurfaceFrame { k, p })
    }
}

impl<S: Scalar> Frame for TubeSurfaceFrame<S> {
    type V = Jet<S>;
    fn l1(&self, f: &Jet<S>) -> Result<Jet<S>> {
        Ok(f.diff(0)?.scale_rational(&q(1, 2)))
    }
    fn l1bar(&self, f: &Jet<S>) -> Result<Jet<S>> {
        self.l1(f)
    }
    fn p(&self) -> Jet<S> {
        self.p.clone()
    }
    fn conj(&self, f: &Jet<S>) -> Jet<S> {
        f.clone()
    }
    fn add(&self, a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>> {
        a.try_add(b)
    }
    fn mul(&self, a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>> {
        a.try_mul(b)
    }
    fn div(&self, a: &Jet<S>, b: &Jet<S>) -> Result<Jet<S>> {
        a.try_div(b)
    }
    fn scale(&self, a: &Jet<S>, c: &Rational) -> Jet<S> {
        a.scale_rational(c)
    }
    fn times_i(&self, a: &Jet<S>) -> Jet<S> {
        // Only ever applied to 𝒯(k) / ℒ̄_1(k), which vanishes on tubes.
        assert!(a.is_zero(), "imaginary term on a real tube frame");
        a.clone()
    }
}

impl<S: Scalar> KernelFrame for TubeSurfaceFrame<S> {
    fn k(&self) -> Jet<S> {
        self.k.clone()
    }
    fn kernel(&self, f: &Jet<S>) -> Result<Jet<S>> {
        let fx = f.diff(0)?;
        let fy = f.diff(1)?;
        (&self.k * &fx).try_add(&fy).map(|j| j.scale_rational(&q(1, 2)))
    }
    fn t_of_k(&self) -> Result<Jet<S>> {
        Ok(self.k.truncate(self.k.order().saturating_sub(1)).zero_like())
    }
}

/// `W_aff`: the universal `W_0` formula on the real tube frame.
pub fn w_aff<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_order(f, 5, "W_aff")?;
    cr::w0_formula(&TubeSurfaceFrame::new(f)?)
}

/// `J_aff`: the universal `J_0` formula on the real tube frame.
pub fn j_aff<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_order(f, 6, "J_aff")?;
    cr::j0_formula(&TubeSurfaceFrame::new(f)?)
}

/// The tube translation of `J_0` exactly as printed, including its three
/// misprints (`L1L1k/L1k^3` without cube, `(L1L1k)^2/L1k` without square,
/// `L1L1k` for `L1L1P`). Kept to document the discrepancy.
pub fn j_aff_printed_translation<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_order(f, 6, "J_aff")?;
    let fr = TubeSurfaceFrame::new(f)?;
    let p = fr.p();
    let s = fr.l1(&fr.k)?;
    let s2 = fr.l1(&s)?;
    let s3 = fr.l1(&s2)?;
    let s4 = fr.l1(&s3)?;
    let lp = fr.l1(&p)?;
    let terms: Vec<Jet<S>> = vec![
        s4.try_div(&s)?.scale_rational(&q(1, 6)),
        (&s3 * &s2).try_div(&(&s * &s))?.scale_rational(&q(-5, 6)),
        (&s3 * &p).try_div(&s)?.scale_rational(&q(-1, 6)),
        s2.try_div(&(&(&s * &s) * &s))?.scale_rational(&q(20, 27)),
        (&(&s2 * &s2) * &p).try_div(&s)?.scale_rational(&q(5, 18)),
        (&s2 * &lp).try_div(&s)?.scale_rational(&q(1, 6)),
        (&(&s2 * &p) * &p).try_div(&s)?.scale_rational(&q(-1, 9)),
        s2.scale_rational(&q(-1, 6)),
        (&lp * &p).scale_rational(&q(1, 3)),
        (&(&p * &p) * &p).scale_rational(&q(-2, 27)),
    ];
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = acc.try_add(t)?;
    }
    Ok(acc)
}

/// `J_aff mod W_aff` in closed form: `-(1/432) monge_x(F) / F_xx^3`.
pub fn j_tilde<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_fxx(f)?;
    let f20 = dx(f, 2, 0)?;
    monge(f)?.try_div(&(&(&f20 * &f20) * &f20)).map(|j| j.scale_rational(&q(-1, 432)))
}

/// `-1/6 L1L1P + 1/3 L1(P) P - 2/27 P^3` with `L1 = 1/2 d/dx`, `P = F_xxx/(2F_xx)`.
pub fn j_tilde_derivation<S: Scalar>(f: &Jet<S>) -> Result<Jet<S>> {
    require_order(f, 5, "J tilde")?;
    require_fxx(f)?;
    let f20 = dx(f, 2, 0)?;
    let half = q(1, 2);
    let p = dx(f, 3, 0)?.try_div(&f20)?.scale_rational(&half);
    let lp = p.diff(0)?.scale_rational(&half);
    let llp = lp.diff(0)?.scale_rational(&half);
    llp.scale_rational(&q(-1, 6))
        .try_add(&(&lp * &p).scale_rational(&q(1, 3)))?
        .try_add(&(&(&p * &p) * &p).scale_rational(&q(-2, 27)))
}

// ---------------------------------------------------------------------------
// Rank-one Hessian surfaces

#[derive(Clone, Debug)]
pub struct ClosureEntry<S: Scalar> {
    pub coord: DVar,
    pub name: String,
    /// Normal form in `F_{x^j}`, `F_{x^j y}` with powers of `1/F_xx`.
    pub formula: DPoly,
    pub value: Jet<S>,
}

/// Mixed derivatives with two or more `y`'s, of order `<= upto`, rewritten
/// through `F_yy = F_xy^2 / F_xx` and its prolongations, evaluated on `F`.
pub fn constraint_closure<S: Scalar>(f: &Jet<S>, upto: u32) -> Result<Vec<ClosureEntry<S>>> {
    require_dim(f, 2, "constraint closure")?;
    require_fxx(f)?;
    if upto > f.order() {
        return Err(Error::OrderTooLow {
            what: format!("closure up to order {upto}"),
            needed: upto,
            got: f.order(),
        });
    }
    let h = hessian_det(f)?;
    if !h.is_negligible(S::default_tolerance(f.ctx())) {
        let (m, c) = h.first_nonzero(S::default_tolerance(f.ctx())).expect("nonzero Hessian");
        return Err(Error::Hypothesis(format!(
            "Hessian is not identically zero (coefficient {m:?} = {c})"
        )));
    }
    let mut sys = System::new(vec![cr::hessian_equation()]);
    let mut out = Vec::new();
    for v in sys.principal_upto(upto) {
        let formula = sys.normal_form(v)?;
        let value = formula.eval_on_jet(f)?;
        out.push(ClosureEntry {
            coord: v,
            name: coord_name(v),
            formula,
            value,
        });
    }
    Ok(out)
}

/// Jet at the origin of the rank-one Hessian surface with
/// `F(x, 0) = sum f0[i] x^i` and `F_y(x, 0) = sum f1[i] x^i`, obtained by
/// integrating `F_yy = F_xy^2 / F_xx` twice in `y`, one order per pass.
pub fn rank_one_jet<S: Scalar>(f0: &[S], f1: &[S], order: u32, ctx: &S::Ctx) -> Result<Jet<S>> {
    let space = VarSpace::new(&["x", "y"], order);
    let base = vec![S::zero(ctx), S::zero(ctx)];
    let mut seed = Jet::zero(space, order, base, ctx.clone());
    for (i, c) in f0.iter().enumerate().take(order as usize + 1) {
        seed.set_coeff(&[i as u32, 0], c.clone());
    }
    for (i, c) in f1.iter().enumerate().take(order as usize) {
        seed.set_coeff(&[i as u32, 1], c.clone());
    }
    require_fxx(&seed)?;
    let mut f = seed.clone();
    for _ in 0..order {
        let fxy = f.partial(&[1, 1])?;
        let rhs = (&fxy * &fxy).try_div(&f.partial(&[2, 0])?)?;
        f = seed.try_add(&rhs.integrate(1).integrate(1))?;
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug)]
pub struct InvariantEntry<S: Scalar> {
    pub name: String,
    pub value: Option<Jet<S>>,
    pub verdict: Verdict,
    pub message: Option<String>,
}

#[derive(Clone, Debug)]
pub struct InvariantReport<S: Scalar> {
    pub entries: Vec<InvariantEntry<S>>,
    pub signature: Option<Signature>,
    pub tolerance: f64,
}

impl<S: Scalar> InvariantReport<S> {
    pub fn get(&self, name: &str) -> Option<&InvariantEntry<S>> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn verdicts(&self) -> BTreeMap<String, Verdict> {
        self.entries.iter().map(|e| (e.name.clone(), e.verdict)).collect()
    }
}

fn entry<S: Scalar>(name: &str, r: Result<Jet<S>>, tol: f64) -> InvariantEntry<S> {
    match r {
        Ok(j) => InvariantEntry {
            name: name.into(),
            verdict: verdict(&j, tol),
            value: Some(j),
            message: None,
        },
        Err(e) => InvariantEntry {
            name: name.into(),
            value: None,
            verdict: Verdict::PreconditionFailed,
            message: Some(e.to_string()),
        },
    }
}

/// Every invariant applicable to the graph's dimension.
pub fn report<S: Scalar>(f: &Jet<S>, tol: f64) -> InvariantReport<S> {
    let mut entries = Vec::new();
    match f.nvars() {
        1 => {
            entries.push(entry("halphen", halphen(f), tol));
            entries.push(entry("monge", monge(f), tol));
            entries.push(entry("cartan_tube", cartan_tube(f), tol));
        }
        2 => {
            entries.push(entry("hessian_det", hessian_det(f), tol));
            entries.push(entry("s_aff_numerator", s_aff_numerator(f), tol));
            entries.push(entry("w_aff_numerator", w_aff_numerator(f), tol));
            entries.push(entry("w_aff", w_aff(f), tol));
            entries.push(entry("j_aff", j_aff(f), tol));
            entries.push(entry("j_tilde", j_tilde(f), tol));
        }
        _ => {
            entries.push(entry("hessian_det", hessian_det(f), tol));
        }
    }
    InvariantReport {
        entries,
        signature: hessian_signature(f).ok(),
        tolerance: tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_jet, parse};
    use proptest::prelude::*;
    use rug::Float;

    type Q = Rational;

    fn j1(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into()], &[Q::new()], order, &()).unwrap()
    }

    fn j2(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into(), "y".into()], &[Q::new(), Q::new()], order, &()).unwrap()
    }

    fn jn(text: &str, vars: &[&str], order: u32) -> Jet<Q> {
        let names: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        eval_jet(&parse(text).unwrap(), &names, &vec![Q::new(); names.len()], order, &()).unwrap()
    }

    #[test]
    fn bordered_hessian_examples() {
        let h = bordered_hessian(&jn("u-x^2", &["x", "u"], 4)).unwrap();
        assert_eq!(h, h.const_like(Q::from(2)));
        assert!(bordered_hessian(&jn("3*x-u+2", &["x", "u"], 4)).unwrap().is_zero());
        assert!(bordered_hessian(&jn("u-x^2/(1-y)", &["x", "y", "u"], 6)).unwrap().is_zero());
    }

    #[test]
    fn hessian_examples() {
        let d = hessian_det(&j2("x^2+y^2", 4)).unwrap();
        assert_eq!(d, d.const_like(Q::from(4)));
        let s = hessian_signature(&j2("x^2+y^2", 4)).unwrap();
        assert_eq!((s.positive, s.negative, s.zero), (2, 0, 0));
        let s = hessian_signature(&j2("x^2-y^2", 4)).unwrap();
        assert_eq!((s.positive, s.negative), (1, 1));
        let s = hessian_signature(&j2("x*y", 4)).unwrap();
        assert_eq!((s.positive, s.negative, s.zero), (1, 1, 0));
        let s = hessian_signature(&j2("x^2", 4)).unwrap();
        assert_eq!((s.positive, s.zero), (1, 1));
        assert!(hessian_det(&j2("x^2/(1-y)", 10)).unwrap().is_zero());
    }

    #[test]
    fn halphen_and_monge_examples() {
        assert!(halphen(&j1("x^2", 6)).unwrap().is_zero());
        assert!(halphen(&j1("3*x^2-2*x+7", 6)).unwrap().is_zero());
        assert_eq!(halphen(&j1("exp(x)", 8)).unwrap(), j1("-2*exp(2*x)", 4));
        assert!(monge(&j1("x^2", 6)).unwrap().is_zero());
        assert!(monge(&j1("x^2/(1-x)", 9)).unwrap().is_zero());
        assert_eq!(monge(&j1("exp(x)", 8)).unwrap(), j1("4*exp(3*x)", 3));
        assert!(matches!(halphen(&j1("x^3", 6)), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn conic_witness_is_on_its_conic() {
        // x^2 + u x - u = 0 along u = x^2/(1-x).
        let u = j1("x^2/(1-x)", 8);
        let x = j1("x", 8);
        let r = (&x * &x).try_add(&(&u * &x)).unwrap().try_sub(&u).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn cartan_tube_on_the_four_spherical_curves() {
        assert!(cartan_tube(&j1("x^2", 8)).unwrap().is_zero());
        assert!(cartan_tube(&j1("exp(x)", 8)).unwrap().is_zero());
        for (text, base) in [("arcsin(exp(x))", -1), ("arcsinh(exp(x))", 0)] {
            let f = eval_jet(&parse(text).unwrap(), &["x".into()], &[Float::with_val(256, base)], 8, &256).unwrap();
            let c = cartan_tube(&f).unwrap();
            assert!(c.is_negligible(DEFAULT_VANISHING_TOLERANCE), "{text}: {}", c.max_abs_f64());
        }
        assert!(!cartan_tube(&j1("x^2+x^5", 8)).unwrap().is_zero());
    }

    #[test]
    fn derived_cartan_equals_reconciled_printed_form() {
        assert_eq!(*cr::tube_cartan_polynomial(), reconciled_cartan_polynomial());
        assert_ne!(reconciled_cartan_polynomial(), printed_cartan_polynomial().mul(&DPoly::pivot_pow(-4)));
    }

    #[test]
    fn s_aff_examples() {
        let f = j2("x^2/(1-y)", 8);
        assert_eq!(s_aff_numerator(&f).unwrap(), j2("4/(1-y)^3", 5));
        assert!(s_aff(&j2("x^2", 6)).unwrap().is_zero());
        assert_eq!(*s_aff(&j2("x^2*(1+y)", 6)).unwrap().constant_term(), 1);
    }

    #[test]
    fn model_surface_is_flat() {
        let f = j2("x^2/(1-y)", 10);
        for r in [w_aff_numerator(&f), w_aff(&f), w_aff_reduced(&f), j_aff(&f), j_tilde(&f), monge(&f)] {
            assert!(r.unwrap().is_zero());
        }
        assert!(!w_aff_numerator(&j2("x^2/(1-y)+x^3*y^2", 8)).unwrap().is_zero());
        assert!(!j_tilde(&j2("x^2+x^2*y+x^2*y^2+x^5", 8)).unwrap().constant_term().is_zero());
    }

    #[test]
    fn closure_formulas_match_direct_differentiation() {
        let f = j2("x^2/(1-y)", 9);
        for e in constraint_closure(&f, 7).unwrap() {
            let direct = dx(&f, e.coord.0 as u32, e.coord.1 as u32).unwrap();
            assert_eq!(e.value, direct.truncate(e.value.order()), "{}", e.name);
        }
        let g = j2("x^2", 6);
        assert!(constraint_closure(&g, 5).unwrap().iter().all(|e| e.value.is_zero()));
        assert!(constraint_closure(&j2("x^2+y^2", 6), 4).is_err());
    }

    #[test]
    fn closure_prints_the_first_prolongation() {
        let f = j2("x^2/(1-y)", 6);
        let c = constraint_closure(&f, 3).unwrap();
        let fxyy = c.iter().find(|e| e.name == "F_xyy").unwrap();
        assert_eq!(fxyy.formula.to_string(), "-F_xx^-2*F_xy^2*F_xxx + 2*F_xx^-1*F_xy*F_xxy");
    }

    #[test]
    fn rank_one_jets_have_zero_hessian() {
        let f = rank_one_jet(&[Q::new(), Q::from(1), Q::from(2), Q::from(-1)], &[Q::from(3), Q::from(1), Q::from((1, 2))], 8, &()).unwrap();
        assert!(hessian_det(&f).unwrap().is_zero());
        assert_eq!(f.coeff(&[2, 0]), 2);
        assert_eq!(f.coeff(&[1, 1]), 1);
    }

    #[test]
    fn halphen_constraint_is_imposed() {
        let f = halphen_constrained_jet([Q::from(1), Q::from(-2), Q::from(3), Q::from((1, 2))], 9).unwrap();
        assert!(halphen(&f).unwrap().is_zero());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn j_tilde_closed_form_equals_derivation(c in prop::collection::vec(-6i64..7, 8)) {
            let mut f = j1("x^2", 7);
            for (i, v) in c.iter().enumerate() {
                let mut m = f.coeff(&[i as u32]);
                m += Q::from((*v, 1 + i as i64));
                f.set_coeff(&[i as u32], m);
            }
            prop_assume!(f.coeff(&[2]) != 0);
            prop_assert_eq!(j_tilde(&f).unwrap(), j_tilde_derivation(&f).unwrap());
        }
    }
}

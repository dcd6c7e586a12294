//! Affine maps acting on graphs `u = F(x)` and `u = F(x, y)`, the factor
//! calculus of their relative invariants, and the normalization of
//! rank-one Hessian surfaces to the model `u = x^2/(1-y)`.
//!
//! An affine map of `R^n` (`n = 2` for curves, `3` for surfaces) sends
//! `(x, [y,] u)` to `M (x, [y,] u) + t`; the last row is the `u'` row.

use std::fmt;

use rand::Rng;
use rug::Rational;
use serde_json::{json, Value};

use crate::affine::{
    dx, halphen, hessian_det, monge, require_fxx, s_aff, s_aff_numerator, w_aff_numerator,
};
use crate::analytic::implicit_solve;
use crate::error::{Error, Result};
use crate::expr::{eval_jet, parse};
use crate::io::{scalar_from_json, scalar_to_json};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::space::VarSpace;

/// Name of the solved-for coordinate inside `transform_graph`.
const SOLVED: &str = "__u";

/// Default bound on `max |M - I|` for near-identity maps.
pub const NEAR_IDENTITY_RADIUS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap<S: Scalar> {
    pub matrix: Vec<Vec<S>>,
    pub translation: Vec<S>,
}

impl<S: Scalar> AffineMap<S> {
    pub fn new(matrix: Vec<Vec<S>>, translation: Vec<S>) -> Result<Self> {
        let n = matrix.len();
        if !(n == 2 || n == 3) || matrix.iter().any(|r| r.len() != n) || translation.len() != n {
            return Err(Error::Invalid(
                "affine map needs a 2x2 or 3x3 matrix and a matching translation".into(),
            ));
        }
        Ok(AffineMap { matrix, translation })
    }

    pub fn identity(n: usize, ctx: &S::Ctx) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { S::one(ctx) } else { S::zero(ctx) }).collect())
            .collect();
        AffineMap {
            matrix,
            translation: vec![S::zero(ctx); n],
        }
    }

    pub fn from_rational(g: &AffineMap<Rational>, ctx: &S::Ctx) -> Self {
        AffineMap {
            matrix: g.matrix.iter().map(|r| r.iter().map(|q| S::from_rational(ctx, q)).collect()).collect(),
            translation: g.translation.iter().map(|q| S::from_rational(ctx, q)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    fn ctx(&self) -> S::Ctx {
        self.matrix[0][0].ctx()
    }

    /// Determinant of the linear part.
    pub fn delta(&self) -> S {
        let m = &self.matrix;
        if self.dim() == 2 {
            return m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]));
        }
        let minor = |r1: usize, r2: usize, c1: usize, c2: usize| m[r1][c1].mul(&m[r2][c2]).sub(&m[r1][c2].mul(&m[r2][c1]));
        m[0][0]
            .mul(&minor(1, 2, 1, 2))
            .sub(&m[0][1].mul(&minor(1, 2, 0, 2)))
            .add(&m[0][2].mul(&minor(1, 2, 0, 1)))
    }

    pub fn apply(&self, p: &[S]) -> Vec<S> {
        (0..self.dim())
            .map(|i| {
                let mut acc = self.translation[i].clone();
                for (j, pj) in p.iter().enumerate() {
                    acc.add_mul(&self.matrix[i][j], pj);
                }
                acc
            })
            .collect()
    }

    /// Inverse by the adjugate; `SingularMap` when `delta` vanishes.
    pub fn inverse(&self) -> Result<Self> {
        let d = self.delta();
        if d.negligible(S::default_tolerance(&self.ctx())) {
            return Err(Error::SingularMap);
        }
        let inv_d = d.recip().ok_or(Error::SingularMap)?;
        let n = self.dim();
        let m = &self.matrix;
        let cofactor = |i: usize, j: usize| -> S {
            if n == 2 {
                let c = m[1 - i][1 - j].clone();
                if (i + j).is_multiple_of(2) {
                    c
                } else {
                    c.neg()
                }
            } else {
                let rows: Vec<usize> = (0..3).filter(|&r| r != i).collect();
                let cols: Vec<usize> = (0..3).filter(|&c| c != j).collect();
                let minor = m[rows[0]][cols[0]]
                    .mul(&m[rows[1]][cols[1]])
                    .sub(&m[rows[0]][cols[1]].mul(&m[rows[1]][cols[0]]));
                if (i + j).is_multiple_of(2) {
                    minor
                } else {
                    minor.neg()
                }
            }
        };
        let matrix: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| cofactor(j, i).mul(&inv_d)).collect()).collect();
        let lin = AffineMap {
            matrix,
            translation: vec![S::zero(&self.ctx()); n],
        };
        let translation = lin.apply(&self.translation).iter().map(|v| v.neg()).collect();
        Ok(AffineMap {
            matrix: lin.matrix,
            translation,
        })
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn after(&self, inner: &Self) -> Self {
        let n = self.dim();
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = S::zero(&self.ctx());
                        for k in 0..n {
                            acc.add_mul(&self.matrix[i][k], &inner.matrix[k][j]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        AffineMap {
            matrix,
            translation: self.apply(&inner.translation),
        }
    }

    /// `max |M_ij - I_ij| <= radius`.
    pub fn is_near_identity(&self, radius: f64) -> bool {
        let ctx = self.ctx();
        self.matrix.iter().enumerate().all(|(i, row)| {
            row.iter().enumerate().all(|(j, e)| {
                let dev = if i == j { e.sub(&S::one(&ctx)) } else { e.clone() };
                dev.abs_le(radius)
            })
        })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim(), &self.ctx())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "matrix": self.matrix.iter().map(|r| r.iter().map(scalar_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "translation": self.translation.iter().map(scalar_to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value, ctx: &S::Ctx) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("affine map JSON: {m}"));
        let matrix = v
            .get("matrix")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `matrix`"))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| bad("matrix rows must be arrays"))?
                    .iter()
                    .map(|e| scalar_from_json(ctx, e))
                    .collect::<Result<Vec<S>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let n = matrix.len();
        let translation = match v.get("translation") {
            None => vec![S::zero(ctx); n],
            Some(t) => t
                .as_array()
                .ok_or_else(|| bad("`translation` must be an array"))?
                .iter()
                .map(|e| scalar_from_json(ctx, e))
                .collect::<Result<_>>()?,
        };
        Self::new(matrix, translation)
    }
}

impl<S: Scalar> fmt::Display for AffineMap<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Random near-identity map with entries in `(1/32) Z`, every deviation from
/// the identity (and every translation entry) bounded by `1/4`.
pub fn random_near_identity<R: Rng>(rng: &mut R, n: usize) -> AffineMap<Rational> {
    let mut entry = |diag: bool| {
        let v = Rational::from((rng.gen_range(-8i64..=8), 32));
        if diag {
            v + 1u32
        } else {
            v
        }
    };
    let matrix = (0..n).map(|i| (0..n).map(|j| entry(i == j)).collect()).collect();
    let translation = (0..n).map(|_| entry(false)).collect();
    AffineMap { matrix, translation }
}

// ---------------------------------------------------------------------------
// Graph transform

fn check_dims<S: Scalar>(g: &AffineMap<S>, f: &Jet<S>) -> Result<()> {
    if g.dim() != f.nvars() + 1 {
        return Err(Error::Invalid(format!(
            "a {0}x{0} map acts on graphs over {1} variable(s), got {2}",
            g.dim(),
            g.dim() - 1,
            f.nvars()
        )));
    }
    Ok(())
}

/// `F'` with `u' = F'(x', y')` the image of `u = F(x, y)` under `g`, as a jet
/// at the image of the base point. Solves
/// `u(x', y', u') - F(x(x', y', u'), y(x', y', u')) = 0` for `u'`, with
/// `(x, y, u) = g^{-1}(x', y', u')`.
pub fn transform_graph<S: Scalar>(g: &AffineMap<S>, f: &Jet<S>) -> Result<Jet<S>> {
    check_dims(g, f)?;
    let n = g.dim();
    let inv = g.inverse()?;
    let ctx = f.ctx().clone();
    let order = f.order();
    let mut source = f.base().to_vec();
    source.push(f.constant_term().clone());
    let target = g.apply(&source);
    let mut names: Vec<String> = f.vars().to_vec();
    names.push(SOLVED.to_string());
    let space = VarSpace::new(&names, order);
    let coords = names
        .iter()
        .map(|v| Jet::variable(space.clone(), order, target.clone(), v, ctx.clone()))
        .collect::<Result<Vec<_>>>()?;
    let pre: Vec<Jet<S>> = (0..n)
        .map(|i| {
            let mut acc = coords[0].const_like(inv.translation[i].clone());
            for (j, c) in coords.iter().enumerate() {
                acc = acc.try_add(&c.scale(&inv.matrix[i][j]))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let g_eq = pre[n - 1].try_sub(&f.compose(&pre[..n - 1])?)?;
    implicit_solve(&g_eq, SOLVED).map_err(|e| match e {
        Error::ImplicitDegenerate(_) => Error::Hypothesis("the image is not graphed over the target plane".into()),
        other => other,
    })
}

/// Factors relating invariants of `F` and of its image `F'`.
#[derive(Clone, Debug)]
pub struct Factors<S: Scalar> {
    pub delta: S,
    /// Jacobian determinant of `(A, B)` (curves: `A_x = a + b F_x`).
    pub lambda: Jet<S>,
    /// `B_y F_xx - B_x F_xy`; surfaces only.
    pub upsilon: Option<Jet<S>>,
    /// `r - c F'_{x'} - m F'_{y'}` (curves: `q - b F'_{x'}`), pulled back.
    pub mu: Jet<S>,
    /// `A`, `B`: source jets of the target coordinates `x'`, `y'`.
    pub images: Vec<Jet<S>>,
    /// `Jac[i][a] = d_i (image a)`.
    pub jacobian: Vec<Vec<Jet<S>>>,
}

/// Source jets `(A, B)` of the target horizontal coordinates.
fn images<S: Scalar>(g: &AffineMap<S>, f: &Jet<S>) -> Result<Vec<Jet<S>>> {
    let n = g.dim();
    let mut coords = f
        .vars()
        .iter()
        .map(|v| Jet::variable(f.space().clone(), f.order(), f.base().to_vec(), v, f.ctx().clone()))
        .collect::<Result<Vec<_>>>()?;
    coords.push(f.clone());
    (0..n - 1)
        .map(|a| {
            let mut acc = f.const_like(g.translation[a].clone());
            for (j, c) in coords.iter().enumerate() {
                acc = acc.try_add(&c.scale(&g.matrix[a][j]))?;
            }
            Ok(acc)
        })
        .collect()
}

/// `j ∘ (A, B)`: a target-side jet seen from the source.
pub fn pull<S: Scalar>(fac: &Factors<S>, j: &Jet<S>) -> Result<Jet<S>> {
    j.compose(&fac.images)
}

pub fn factors<S: Scalar>(g: &AffineMap<S>, f: &Jet<S>, fprime: &Jet<S>) -> Result<Factors<S>> {
    check_dims(g, f)?;
    let n = g.dim();
    let images = images(g, f)?;
    let jacobian: Vec<Vec<Jet<S>>> = (0..n - 1)
        .map(|i| images.iter().map(|a| a.diff(i)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let lambda = if n == 2 {
        jacobian[0][0].clone()
    } else {
        jacobian[0][0].try_mul(&jacobian[1][1])?.try_sub(&jacobian[1][0].try_mul(&jacobian[0][1])?)?
    };
    let mut mu = f.const_like(g.matrix[n - 1][n - 1].clone());
    for a in 0..n - 1 {
        let fa = fprime.diff(a)?.compose(&images)?;
        mu = mu.try_sub(&fa.scale(&g.matrix[a][n - 1]))?;
    }
    let upsilon = if n == 3 {
        let (fxx, fxy) = (dx(f, 2, 0)?, dx(f, 1, 1)?);
        Some(jacobian[1][1].try_mul(&fxx)?.try_sub(&jacobian[0][1].try_mul(&fxy)?)?)
    } else {
        None
    };
    let fac = Factors {
        delta: g.delta(),
        lambda,
        upsilon,
        mu,
        images,
        jacobian,
    };
    let tol = S::default_tolerance(f.ctx());
    let mut units = vec![&fac.lambda, &fac.mu];
    units.extend(fac.upsilon.as_ref());
    if units.iter().any(|j| j.constant_term().negligible(tol)) {
        return Err(Error::Hypothesis(
            "a factor vanishes at the base point (map too far from the identity)".into(),
        ));
    }
    Ok(fac)
}

// ---------------------------------------------------------------------------
// Transformation laws

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Law {
    /// `H(F') ∘ (A,B) = δ^2/Λ^4 H(F)`.
    HessianDet,
    /// `μ' Hess F = Jac · (Hess F' ∘ (A,B)) · Jac^T`.
    HessianCongruence,
    /// Same with `μ'` on the other side (does not hold).
    HessianCongruenceInverted,
    /// Pullback of `ϱ' = du' - F'_{x'} dx' - F'_{y'} dy'` equals `μ' ϱ`, and `μ' Λ = δ`.
    Pullback,
    /// `ϱ = μ' ϱ'` (does not hold).
    PullbackInverted,
    /// Rank-one Hessian: `F'_{x'x'} ∘ (A,B) = δ Υ^2 / (Λ^3 F_xx)`.
    FxxRankOne,
    /// Rank-one Hessian: `S'_num = δ^2 Υ^3 / (Λ^6 F_xx^3) S_num`.
    SAffNumerator,
    /// Rank-one Hessian: `S'_aff = (F_xx / Υ) S_aff`.
    SAff,
    /// Rank-one Hessian: `W'_num = δ^3 Υ^6 / (F_xx^6 Λ^10) W_num`.
    WAffNumerator,
    /// Curves: `F'_{x'x'} = δ F_xx / X^3`, `X = a + b F_x`.
    CurveFxx,
    /// Curves: `δ^2 F_xx / X^3` (does not hold).
    CurveFxxSquared,
    /// Curves: Halphen `δ^2 / X^8`.
    Halphen,
    /// Curves: Monge `δ^3 / X^12`.
    Monge,
}

impl Law {
    pub const ALL: [Law; 13] = [
        Law::HessianDet,
        Law::HessianCongruence,
        Law::HessianCongruenceInverted,
        Law::Pullback,
        Law::PullbackInverted,
        Law::FxxRankOne,
        Law::SAffNumerator,
        Law::SAff,
        Law::WAffNumerator,
        Law::CurveFxx,
        Law::CurveFxxSquared,
        Law::Halphen,
        Law::Monge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Law::HessianDet => "hessian-det",
            Law::HessianCongruence => "hessian-congruence",
            Law::HessianCongruenceInverted => "hessian-congruence-inverted",
            Law::Pullback => "pullback",
            Law::PullbackInverted => "pullback-inverted",
            Law::FxxRankOne => "fxx-rank-one",
            Law::SAffNumerator => "s-aff-numerator",
            Law::SAff => "s-aff",
            Law::WAffNumerator => "w-aff-numerator",
            Law::CurveFxx => "curve-fxx",
            Law::CurveFxxSquared => "curve-fxx-squared",
            Law::Halphen => "halphen",
            Law::Monge => "monge",
        }
    }

    pub fn parse(name: &str) -> Option<Law> {
        Law::ALL.iter().copied().find(|l| l.name() == name)
    }

    /// Matrix size the law applies to.
    pub fn dim(self) -> usize {
        match self {
            Law::CurveFxx | Law::CurveFxxSquared | Law::Halphen | Law::Monge => 2,
            _ => 3,
        }
    }

    pub fn needs_rank_one(self) -> bool {
        matches!(self, Law::FxxRankOne | Law::SAffNumerator | Law::SAff | Law::WAffNumerator)
    }

    /// False for the deliberately wrong variants.
    pub fn holds(self) -> bool {
        !matches!(self, Law::HessianCongruenceInverted | Law::PullbackInverted | Law::CurveFxxSquared)
    }

    /// The laws that hold for this dimension of map.
    pub fn valid_for(dim: usize) -> Vec<Law> {
        Law::ALL.iter().copied().filter(|l| l.dim() == dim && l.holds()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct LawResidual<S: Scalar> {
    pub law: Law,
    /// `LHS - factor · RHS`, one jet per scalar identity.
    pub components: Vec<Jet<S>>,
}

impl<S: Scalar> LawResidual<S> {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Jet::is_zero)
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.components.iter().all(|c| c.is_negligible(tol))
    }

    pub fn max_abs_f64(&self) -> f64 {
        self.components.iter().map(Jet::max_abs_f64).fold(0.0, f64::max)
    }
}

fn require_rank_one<S: Scalar>(f: &Jet<S>) -> Result<()> {
    require_fxx(f)?;
    let tol = S::default_tolerance(f.ctx());
    if let Some((m, c)) = hessian_det(f)?.first_nonzero(tol) {
        return Err(Error::Hypothesis(format!(
            "Hessian is not identically zero (coefficient {m:?} = {c})"
        )));
    }
    Ok(())
}

fn pow<S: Scalar>(j: &Jet<S>, n: i64) -> Result<Jet<S>> {
    j.pow_int(n)
}

fn scalar_pow<S: Scalar>(s: &S, n: u32) -> S {
    let mut acc = S::one(&s.ctx());
    for _ in 0..n {
        acc = acc.mul(s);
    }
    acc
}

/// `LHS - factor · RHS` for `law` on the image of `f` under `g`.
pub fn verify_law<S: Scalar>(law: Law, g: &AffineMap<S>, f: &Jet<S>) -> Result<LawResidual<S>> {
    if g.dim() != law.dim() {
        return Err(Error::Invalid(format!(
            "law `{}` needs a {1}x{1} map, got {2}x{2}",
            law.name(),
            law.dim(),
            g.dim()
        )));
    }
    check_dims(g, f)?;
    if law.needs_rank_one() {
        require_rank_one(f)?;
    }
    let fp = transform_graph(g, f)?;
    let fac = factors(g, f, &fp)?;
    let d = &fac.delta;
    let lam = &fac.lambda;
    let components = match law {
        Law::HessianDet => {
            let lhs = pull(&fac, &hessian_det(&fp)?)?;
            let rhs = hessian_det(f)?.try_mul(&pow(lam, -4)?)?.scale(&scalar_pow(d, 2));
            vec![lhs.try_sub(&rhs)?]
        }
        Law::HessianCongruence | Law::HessianCongruenceInverted => {
            let n = g.dim() - 1;
            let mut out = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let mut m = vec![0u32; n];
                    m[i] += 1;
                    m[j] += 1;
                    let h = f.partial(&m)?;
                    let mut sandwich: Option<Jet<S>> = None;
                    for a in 0..n {
                        for b in 0..n {
                            let mut e = vec![0u32; n];
                            e[a] += 1;
                            e[b] += 1;
                            let t = pull(&fac, &fp.partial(&e)?)?
                                .try_mul(&fac.jacobian[i][a])?
                                .try_mul(&fac.jacobian[j][b])?;
                            sandwich = Some(match sandwich {
                                None => t,
                                Some(s) => s.try_add(&t)?,
                            });
                        }
                    }
                    let sandwich = sandwich.expect("n >= 1");
                    out.push(if law == Law::HessianCongruence {
                        fac.mu.try_mul(&h)?.try_sub(&sandwich)?
                    } else {
                        h.try_sub(&fac.mu.try_mul(&sandwich)?)?
                    });
                }
            }
            out
        }
        Law::Pullback | Law::PullbackInverted => {
            let n = g.dim() - 1;
            let last = n;
            let mut out = Vec::new();
            // dx_i coefficient of the pulled-back ϱ'.
            let mut rho_prime = Vec::new();
            for i in 0..n {
                let mut c = f.const_like(g.matrix[last][i].clone());
                for a in 0..n {
                    let fa = pull(&fac, &fp.diff(a)?)?;
                    c = c.try_sub(&fa.scale(&g.matrix[a][i]))?;
                }
                rho_prime.push(c);
            }
            for (i, c) in rho_prime.iter().enumerate() {
                let fi = f.diff(i)?;
                out.push(if law == Law::Pullback {
                    // ϱ' = μ' du + c_i dx_i and μ' ϱ = μ' du - μ' F_i dx_i.
                    c.try_add(&fac.mu.try_mul(&fi)?)?
                } else {
                    // ϱ - μ' ϱ': dx_i part.
                    (-&fi).try_sub(&fac.mu.try_mul(c)?)?
                });
            }
            if law == Law::Pullback {
                out.push(fac.mu.try_mul(lam)?.try_sub(&lam.const_like(d.clone()))?);
            } else {
                out.push(fac.mu.one_like().try_sub(&fac.mu.try_mul(&fac.mu)?)?);
            }
            out
        }
        Law::FxxRankOne => {
            let ups = fac.upsilon.as_ref().expect("surface");
            let lhs = pull(&fac, &dx(&fp, 2, 0)?)?;
            let rhs = ups
                .try_mul(ups)?
                .try_div(&lam.try_mul(lam)?.try_mul(lam)?.try_mul(&dx(f, 2, 0)?)?)?
                .scale(d);
            vec![lhs.try_sub(&rhs)?]
        }
        Law::SAffNumerator => {
            let ups = fac.upsilon.as_ref().expect("surface");
            let lhs = pull(&fac, &s_aff_numerator(&fp)?)?;
            let factor = pow(ups, 3)?
                .try_div(&pow(lam, 6)?.try_mul(&pow(&dx(f, 2, 0)?, 3)?)?)?
                .scale(&scalar_pow(d, 2));
            vec![lhs.try_sub(&factor.try_mul(&s_aff_numerator(f)?)?)?]
        }
        Law::SAff => {
            let ups = fac.upsilon.as_ref().expect("surface");
            let lhs = pull(&fac, &s_aff(&fp)?)?;
            let rhs = dx(f, 2, 0)?.try_div(ups)?.try_mul(&s_aff(f)?)?;
            vec![lhs.try_sub(&rhs)?]
        }
        Law::WAffNumerator => {
            let ups = fac.upsilon.as_ref().expect("surface");
            let lhs = pull(&fac, &w_aff_numerator(&fp)?)?;
            let factor = pow(ups, 6)?
                .try_div(&pow(&dx(f, 2, 0)?, 6)?.try_mul(&pow(lam, 10)?)?)?
                .scale(&scalar_pow(d, 3));
            vec![lhs.try_sub(&factor.try_mul(&w_aff_numerator(f)?)?)?]
        }
        Law::CurveFxx | Law::CurveFxxSquared => {
            let k = if law == Law::CurveFxx { 1 } else { 2 };
            let lhs = pull(&fac, &dx(&fp, 2, 0)?)?;
            let rhs = dx(f, 2, 0)?.try_div(&pow(lam, 3)?)?.scale(&scalar_pow(d, k));
            vec![lhs.try_sub(&rhs)?]
        }
        Law::Halphen => {
            let lhs = pull(&fac, &halphen(&fp)?)?;
            let rhs = halphen(f)?.try_div(&pow(lam, 8)?)?.scale(&scalar_pow(d, 2));
            vec![lhs.try_sub(&rhs)?]
        }
        Law::Monge => {
            let lhs = pull(&fac, &monge(&fp)?)?;
            let rhs = monge(f)?.try_div(&pow(lam, 12)?)?.scale(&scalar_pow(d, 3));
            vec![lhs.try_sub(&rhs)?]
        }
    };
    Ok(LawResidual { law, components })
}

// ---------------------------------------------------------------------------
// Normalization to the model

/// The three identities whose joint vanishing characterizes the model:
/// Hessian, `W_aff` numerator, `J_aff mod W_aff` (x-Monge).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Identity {
    Hessian,
    WAff,
    JTilde,
}

impl Identity {
    pub fn label(self) -> &'static str {
        match self {
            Identity::Hessian => "①",
            Identity::WAff => "②",
            Identity::JTilde => "③",
        }
    }

    pub fn invariant(self) -> &'static str {
        match self {
            Identity::Hessian => "hessian_det",
            Identity::WAff => "w_aff_numerator",
            Identity::JTilde => "monge_x",
        }
    }

    fn evaluate(self, f: &Jet<Rational>) -> Result<Jet<Rational>> {
        match self {
            Identity::Hessian => hessian_det(f),
            Identity::WAff => w_aff_numerator(f),
            Identity::JTilde => monge(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obstruction {
    pub identity: Identity,
    /// Step at which the normal form broke down.
    pub step: u8,
    /// Graded-lex first nonzero coefficient of the identity's jet.
    pub witness: (Vec<u32>, Rational),
    /// Coefficient of the partially normalized jet that should have vanished.
    pub coefficient: (Vec<u32>, Rational),
}

#[derive(Clone, Debug, PartialEq)]
pub enum NormVerdict {
    EquivalentToModel,
    Obstruction(Obstruction),
}

#[derive(Clone, Debug)]
pub struct StepLog {
    pub step: u8,
    pub action: String,
    pub map: Option<AffineMap<Rational>>,
}

#[derive(Clone, Debug)]
pub struct NormalizationResult {
    pub verdict: NormVerdict,
    /// Composite of all step maps, input coordinates to normalized ones.
    pub map: AffineMap<Rational>,
    /// The input transformed by `map`.
    pub jet: Jet<Rational>,
    pub steps: Vec<StepLog>,
    /// `jet - model`; identically zero on success.
    pub residual: Option<Jet<Rational>>,
}

/// Jet of `x^2/(1-y)` at the origin.
pub fn model_jet(order: u32) -> Result<Jet<Rational>> {
    eval_jet(
        &parse("x^2/(1-y)")?,
        &["x".to_string(), "y".to_string()],
        &[Rational::new(), Rational::new()],
        order,
        &(),
    )
}

fn r(n: i64) -> Rational {
    Rational::from(n)
}

fn surface_map(m: [[Rational; 3]; 3], t: [Rational; 3]) -> AffineMap<Rational> {
    AffineMap {
        matrix: m.into_iter().map(|r| r.into_iter().collect()).collect(),
        translation: t.into_iter().collect(),
    }
}

struct Normalizer {
    f: Jet<Rational>,
    map: AffineMap<Rational>,
    steps: Vec<StepLog>,
}

impl Normalizer {
    fn apply(&mut self, step: u8, action: String, g: AffineMap<Rational>) -> Result<()> {
        if g.is_identity() {
            self.steps.push(StepLog { step, action, map: None });
            return Ok(());
        }
        self.f = transform_graph(&g, &self.f)?;
        self.map = g.after(&self.map);
        self.steps.push(StepLog { step, action, map: Some(g) });
        Ok(())
    }

    fn note(&mut self, step: u8, action: impl Into<String>) {
        self.steps.push(StepLog {
            step,
            action: action.into(),
            map: None,
        });
    }

    fn c(&self, j: u32, k: u32) -> Rational {
        self.f.coeff(&[j, k])
    }

    /// Obstruction for `bad` (a coefficient that should vanish), blamed on
    /// the first identity of `order` that evaluates to a nonzero jet.
    fn obstruction(&self, step: u8, order: &[Identity], bad: (Vec<u32>, Rational)) -> Result<NormVerdict> {
        let all = [Identity::Hessian, Identity::WAff, Identity::JTilde];
        for id in order.iter().chain(all.iter()) {
            if let Some(w) = id.evaluate(&self.f)?.first_nonzero(0.0) {
                return Ok(NormVerdict::Obstruction(Obstruction {
                    identity: *id,
                    step,
                    witness: w,
                    coefficient: bad,
                }));
            }
        }
        Err(Error::Invalid(format!(
            "coefficient {:?} = {} survived although all three identities vanish",
            bad.0, bad.1
        )))
    }

    fn finish(self, verdict: NormVerdict) -> Result<NormalizationResult> {
        let residual = match verdict {
            NormVerdict::EquivalentToModel => Some(self.f.try_sub(&model_jet(self.f.order())?)?),
            NormVerdict::Obstruction(_) => None,
        };
        Ok(NormalizationResult {
            verdict,
            map: self.map,
            jet: self.f,
            steps: self.steps,
            residual,
        })
    }
}

/// Brings `u = F(x, y)` to `u = x^2/(1-y)` by explicit affine changes of
/// coordinates, or reports which of the three identities fails.
///
/// Requires `F_xx != 0` and `F_xx F_xxy - F_xy F_xxx != 0` at the base.
/// A nonvanishing Hessian is reported as an obstruction, not an error.
pub fn normalize_to_model(f: &Jet<Rational>, order: u32) -> Result<NormalizationResult> {
    if f.nvars() != 2 {
        return Err(Error::Invalid("normalization needs a surface u = F(x, y)".into()));
    }
    if order < 6 {
        return Err(Error::OrderTooLow {
            what: "normalization".into(),
            needed: 6,
            got: order,
        });
    }
    if f.order() < order {
        return Err(Error::OrderTooLow {
            what: "normalization input".into(),
            needed: order,
            got: f.order(),
        });
    }
    require_fxx(f)?;
    if s_aff_numerator(f)?.constant_term().is_zero() {
        return Err(Error::Hypothesis(
            "F_xx F_xxy - F_xy F_xxx vanishes at the base point (not 2-nondegenerate)".into(),
        ));
    }
    let f = f.truncate(order);
    let mut nz = Normalizer {
        map: AffineMap::identity(3, &()),
        f: f.clone(),
        steps: Vec::new(),
    };

    // Step 0: base to the origin, drop the tangent plane, make the quadratic
    // part x^2. Pivot on x: (F_xx/2)(x + (F_xy/F_xx) y)^2 + rank-one remainder.
    let (x0, y0) = (f.base()[0].clone(), f.base()[1].clone());
    let (f0, fx, fy) = (f.coeff(&[0, 0]), f.coeff(&[1, 0]), f.coeff(&[0, 1]));
    let fxx = f.derivative_at_base(&[2, 0]);
    let fxy = f.derivative_at_base(&[1, 1]);
    let s = Rational::from(&fxy / &fxx);
    let w = Rational::from(2 / &fxx);
    let mw = Rational::from(-&w);
    let shift_u = &mw * (f0 - Rational::from(&fx * &x0) - Rational::from(&fy * &y0));
    let g0 = surface_map(
        [
            [r(1), s.clone(), r(0)],
            [r(0), r(1), r(0)],
            [Rational::from(&mw * &fx), Rational::from(&mw * &fy), w.clone()],
        ],
        [
            Rational::from(-&x0) - Rational::from(&s * &y0),
            Rational::from(-&y0),
            shift_u,
        ],
    );
    nz.apply(0, "translate to the origin, remove the tangent plane, scale to x^2 + O(3)".into(), g0)?;
    for (m, want) in [([0, 0], 0), ([1, 0], 0), ([0, 1], 0), ([2, 0], 1), ([1, 1], 0), ([0, 2], 0)] {
        let c = nz.c(m[0], m[1]);
        if c != want {
            // Only a Hessian of rank two at the base leaves y^2 behind.
            let bad = (m.to_vec(), c);
            let verdict = nz.obstruction(0, &[Identity::Hessian], bad)?;
                return nz.finish(verdict);
        }
    }

    // Step 1: F_0(y) = F(0, y) and F_1(y) = F_x(0, y) vanish identically.
    for k in 0..=order {
        for j in 0..=1u32 {
            if j + k <= order && nz.c(j, k) != 0 {
                let bad = (vec![j, k], nz.c(j, k));
                let verdict = nz.obstruction(1, &[Identity::Hessian], bad)?;
                return nz.finish(verdict);
            }
        }
    }
    nz.note(1, "F(0, y) and F_x(0, y) vanish");

    // Step 2: x^2 + αx^3 + βx^2y = x^2 + x^2(αx + βy); new y := αx + βy.
    let (alpha, beta) = (nz.c(3, 0), nz.c(2, 1));
    debug_assert!(beta != 0, "2-nondegeneracy is invariant");
    let g2 = surface_map(
        [[r(1), r(0), r(0)], [alpha.clone(), beta.clone(), r(0)], [r(0), r(0), r(1)]],
        [r(0), r(0), r(0)],
    );
    nz.apply(2, format!("y := {alpha}*x + {beta}*y"), g2)?;

    // Step 3: the Hessian forces the x^2 y^2 coefficient to 1.
    let c22 = nz.c(2, 2);
    if c22 != 1 {
        let verdict = nz.obstruction(3, &[Identity::Hessian], (vec![2, 2], c22))?;
                return nz.finish(verdict);
    }
    nz.note(3, "x^2 y^2 coefficient equals 1");

    // Step 4: y := y + A u removes A x^4; W_aff at the origin is 24 B.
    let a4 = nz.c(4, 0);
    let g4 = surface_map(
        [[r(1), r(0), r(0)], [r(0), r(1), a4.clone()], [r(0), r(0), r(1)]],
        [r(0), r(0), r(0)],
    );
    nz.apply(4, format!("y := y + {a4}*u"), g4)?;
    let b = nz.c(3, 1);
    if b != 0 {
        let verdict = nz.obstruction(4, &[Identity::WAff], (vec![3, 1], b))?;
                return nz.finish(verdict);
    }
    nz.note(4, "x^3 y coefficient vanishes");

    // Step 5: F_{x^k y^l}(0) = 0 for k >= 3, graded-lex.
    for deg in 3..=order {
        for l in 0..=deg - 3 {
            let k = deg - l;
            let c = nz.c(k, l);
            if c != 0 {
                let blame: &[Identity] = match l {
                    0 => &[Identity::JTilde],
                    1 => &[Identity::WAff],
                    _ => &[Identity::JTilde, Identity::WAff],
                };
                let verdict = nz.obstruction(5, blame, (vec![k, l], c))?;
                return nz.finish(verdict);
            }
        }
    }
    nz.note(5, "F_{x^k y^l}(0) = 0 for k >= 3");

    // Step 6: F = x^2 G(y) with G_{y^k} = k! G_y^k / G^{k-1}, G(0) = G_y(0) = 1,
    // so G is the geometric series.
    for l in 0..=order - 2 {
        let c = nz.c(2, l);
        if c != 1 {
            let verdict = nz.obstruction(6, &[Identity::Hessian], (vec![2, l], c))?;
                return nz.finish(verdict);
        }
    }
    nz.note(6, "F = x^2 (1 + y + y^2 + ...)");
    nz.finish(NormVerdict::EquivalentToModel)
}

impl Obstruction {
    pub fn to_json(&self) -> Value {
        json!({
            "identity": self.identity.label(),
            "invariant": self.identity.invariant(),
            "step": self.step,
            "witness": {"monomial": self.witness.0, "value": self.witness.1.to_string()},
            "coefficient": {"monomial": self.coefficient.0, "value": self.coefficient.1.to_string()},
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{j_aff, rank_one_jet, w_aff};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::from((n, d))
    }

    fn j1(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into()], &[Q::new()], order, &()).unwrap()
    }

    fn j2(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into(), "y".into()], &[Q::new(), Q::new()], order, &()).unwrap()
    }

    fn lc(order: u32) -> Jet<Q> {
        model_jet(order).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn map_algebra() {
        let mut rg = rng(1);
        for n in [2, 3] {
            let g = random_near_identity(&mut rg, n);
            assert!(g.is_near_identity(NEAR_IDENTITY_RADIUS));
            let id = AffineMap::<Q>::identity(n, &());
            assert_eq!(g.after(&g.inverse().unwrap()), id);
            assert_eq!(g.inverse().unwrap().after(&g), id);
            let p: Vec<Q> = (0..n as i64).map(|i| q(i + 1, 3)).collect();
            assert_eq!(g.inverse().unwrap().apply(&g.apply(&p)), p);
            let h = random_near_identity(&mut rg, n);
            assert_eq!(h.after(&g).delta(), Q::from(h.delta() * g.delta()));
            let back = AffineMap::<Q>::from_json(&g.to_json(), &()).unwrap();
            assert_eq!(back, g);
        }
        let singular = AffineMap::new(vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]], vec![Q::new(), Q::new()]).unwrap();
        assert!(matches!(singular.inverse(), Err(Error::SingularMap)));
    }

    #[test]
    fn identity_and_translation() {
        let f = lc(6);
        assert_eq!(transform_graph(&AffineMap::identity(3, &()), &f).unwrap(), f);
        let mut g = AffineMap::<Q>::identity(3, &());
        g.translation[2] = q(3, 7);
        assert_eq!(transform_graph(&g, &f).unwrap(), f.add_scalar(&q(3, 7)));
        let fac = factors(&AffineMap::identity(3, &()), &f, &f).unwrap();
        assert_eq!(fac.lambda, f.const_like(q(1, 1)).truncate(5));
        assert_eq!(fac.mu, f.const_like(q(1, 1)).truncate(5));
        assert_eq!(fac.upsilon.unwrap(), dx(&f, 2, 0).unwrap());
        assert_eq!(fac.delta, 1);
    }

    #[test]
    fn round_trip_returns_the_original_jet() {
        let mut rg = rng(2);
        let f = lc(7);
        for _ in 0..5 {
            let g = random_near_identity(&mut rg, 3);
            let fp = transform_graph(&g, &f).unwrap();
            let back = transform_graph(&g.inverse().unwrap(), &fp).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn transform_is_an_action() {
        let mut rg = rng(3);
        let f = j2("x^2+x*y^2+exp(y)-1", 6);
        let (g1, g2) = (random_near_identity(&mut rg, 3), random_near_identity(&mut rg, 3));
        let two_steps = transform_graph(&g2, &transform_graph(&g1, &f).unwrap()).unwrap();
        assert_eq!(two_steps, transform_graph(&g2.after(&g1), &f).unwrap());
    }

    #[test]
    fn curve_image_by_hand() {
        // x' = x, u' = u + 2x  sends u = x^2 to u' = x'^2 + 2x'.
        let g = AffineMap::new(vec![vec![q(1, 1), Q::new()], vec![q(2, 1), q(1, 1)]], vec![Q::new(), Q::new()]).unwrap();
        assert_eq!(transform_graph(&g, &j1("x^2", 5)).unwrap(), j1("x^2+2*x", 5));
        // Swapping x and u maps u = x + x^2 to the inverse series.
        let swap = AffineMap::new(vec![vec![Q::new(), q(1, 1)], vec![q(1, 1), Q::new()]], vec![Q::new(), Q::new()]).unwrap();
        let inv = transform_graph(&swap, &j1("x+x^2", 6)).unwrap();
        assert_eq!(inv, j1("(sqrt(1+4*x)-1)/2", 6));
    }

    #[test]
    fn hessian_laws_on_a_general_surface() {
        let mut rg = rng(4);
        let f = j2("x^2+3*x*y-y^2+x^3*y+exp(x*y)-1", 6);
        for _ in 0..3 {
            let g = random_near_identity(&mut rg, 3);
            for law in [Law::HessianDet, Law::HessianCongruence, Law::Pullback] {
                assert!(verify_law(law, &g, &f).unwrap().is_zero(), "{}", law.name());
            }
            for law in [Law::HessianCongruenceInverted, Law::PullbackInverted] {
                assert!(!verify_law(law, &g, &f).unwrap().is_zero(), "{}", law.name());
            }
        }
    }

    #[test]
    fn rank_one_laws() {
        let mut rg = rng(5);
        let f = rank_one_jet(&[Q::new(), Q::new(), q(1, 1), q(1, 3)], &[Q::new(), q(1, 2), q(1, 1), q(-1, 5)], 6, &()).unwrap();
        for _ in 0..3 {
            let g = random_near_identity(&mut rg, 3);
            for law in [Law::FxxRankOne, Law::SAffNumerator, Law::SAff, Law::WAffNumerator] {
                assert!(verify_law(law, &g, &f).unwrap().is_zero(), "{}", law.name());
            }
        }
        let g = random_near_identity(&mut rg, 3);
        assert!(matches!(verify_law(Law::SAff, &g, &j2("x^2+y^2", 6)), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn curve_laws_on_exp() {
        let mut rg = rng(6);
        let f = j1("exp(x)", 8);
        for _ in 0..3 {
            let g = random_near_identity(&mut rg, 2);
            for law in Law::valid_for(2) {
                assert!(verify_law(law, &g, &f).unwrap().is_zero(), "{}", law.name());
            }
            assert!(!verify_law(Law::CurveFxxSquared, &g, &f).unwrap().is_zero());
        }
    }

    #[test]
    fn identity_map_has_zero_residuals() {
        let f = j2("x^2/(1-y)+x^3*y^2", 6);
        let g = AffineMap::identity(3, &());
        for law in Law::valid_for(3) {
            if law.needs_rank_one() {
                continue;
            }
            assert!(verify_law(law, &g, &f).unwrap().is_zero());
        }
    }

    #[test]
    fn flatness_survives_affine_maps() {
        let mut rg = rng(7);
        let g = random_near_identity(&mut rg, 3);
        let f = transform_graph(&g, &lc(8)).unwrap();
        assert!(w_aff(&f).unwrap().is_zero());
        assert!(j_aff(&f).unwrap().is_zero());
    }

    #[test]
    fn normalizes_the_model_with_the_identity() {
        let res = normalize_to_model(&lc(8), 8).unwrap();
        assert_eq!(res.verdict, NormVerdict::EquivalentToModel);
        assert!(res.map.is_identity());
        assert!(res.residual.unwrap().is_zero());
    }

    #[test]
    fn normalizes_affine_images_and_is_idempotent() {
        let mut rg = rng(8);
        for _ in 0..3 {
            let g = random_near_identity(&mut rg, 3);
            let f = transform_graph(&g, &lc(8)).unwrap();
            let res = normalize_to_model(&f, 8).unwrap();
            assert_eq!(res.verdict, NormVerdict::EquivalentToModel);
            assert!(res.residual.as_ref().unwrap().is_zero());
            assert_eq!(transform_graph(&res.map, &f).unwrap(), lc(8));
            let again = normalize_to_model(&res.jet, 8).unwrap();
            assert!(again.map.is_identity());
            assert_eq!(again.jet, res.jet);
        }
    }

    #[test]
    fn perturbation_obstructs_at_the_monge_identity() {
        let f = j2("x^2/(1-y)+x^6", 8);
        let res = normalize_to_model(&f, 8).unwrap();
        let NormVerdict::Obstruction(ob) = res.verdict else {
            panic!("expected an obstruction");
        };
        assert_eq!(ob.identity, Identity::JTilde);
        assert_eq!(ob.coefficient, (vec![6, 0], q(1, 1)));
        // 9 F_xx^2 F_xxxxx = 9 * 4 * 720 x + O(2).
        assert_eq!(ob.witness, (vec![1, 0], q(25920, 1)));
        assert_eq!(monge(&f).unwrap().coeff(&[1, 0]), 25920);
    }

    #[test]
    fn cubic_perturbation_obstructs_at_w_aff() {
        let f = j2("x^2/(1-y)+x^3*y", 8);
        let res = normalize_to_model(&f, 8).unwrap();
        let NormVerdict::Obstruction(ob) = res.verdict else {
            panic!("expected an obstruction");
        };
        assert_eq!(ob.identity, Identity::WAff);
    }

    #[test]
    fn rank_two_hessian_is_an_obstruction() {
        let res = normalize_to_model(&j2("x^2+x^2*y+y^3", 8), 8).unwrap();
        let NormVerdict::Obstruction(ob) = res.verdict else {
            panic!("expected an obstruction");
        };
        assert_eq!(ob.identity, Identity::Hessian);
        assert!(matches!(normalize_to_model(&j2("x^2", 8), 8), Err(Error::Hypothesis(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn hessian_det_law_holds(seed in 0u64..1000) {
            let mut rg = rng(seed);
            let g = random_near_identity(&mut rg, 3);
            let f = j2("x^2-x*y+2*y^2+x^3-x*y^3", 5);
            prop_assert!(verify_law(Law::HessianDet, &g, &f).unwrap().is_zero());
        }
    }
}

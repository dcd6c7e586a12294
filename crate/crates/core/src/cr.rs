//! CR side: tangent fields as derivations on complexified jets, the frames of
//! Levi nondegenerate `M^3 ⊂ C^2` and Levi rank-one `M^5 ⊂ C^3` graphs, the
//! universal formulas for the Cartan invariant and for `W_0`, `J_0`, Levi
//! checks, and the solved-form PDE propagation.
//!
//! The universal formulas are written once against [`Frame`] / [`KernelFrame`]
//! and evaluated on several realizations: complex jets with genuine
//! derivations, real tube jets, and symbolic tube expressions.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rug::Rational;

use crate::complex::CJet;
use crate::diffalg::{Algebra, DPoly, DVar, Equation, System};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

// ---------------------------------------------------------------------------
// Universal formulas

/// Field operations and the two fundamental derivations of a CR frame.
pub trait Frame {
    type V: Clone;
    fn l1(&self, f: &Self::V) -> Result<Self::V>;
    fn l1bar(&self, f: &Self::V) -> Result<Self::V>;
    /// The second fundamental function `P`.
    fn p(&self) -> Self::V;
    fn conj(&self, f: &Self::V) -> Self::V;
    fn add(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn div(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&self, a: &Self::V, c: &Rational) -> Self::V;
    fn times_i(&self, a: &Self::V) -> Self::V;
}

/// Frames of Levi rank-one hypersurfaces: slant `k`, kernel field `𝒦`, and
/// `𝒯(k)` with `𝒯 = i[ℒ_1, ℒ̄_1]`.
pub trait KernelFrame: Frame {
    fn k(&self) -> Self::V;
    fn kernel(&self, f: &Self::V) -> Result<Self::V>;
    fn t_of_k(&self) -> Result<Self::V>;
}

/// Sum of `c_i * prod(factors_i) / prod(denominators_i)` helper.
struct Terms<'a, F: Frame> {
    fr: &'a F,
    acc: Option<F::V>,
}

impl<'a, F: Frame> Terms<'a, F> {
    fn new(fr: &'a F) -> Self {
        Terms { fr, acc: None }
    }

    fn push(&mut self, c: Rational, num: &[&F::V], den: &[&F::V]) -> Result<()> {
        let fr = self.fr;
        let mut t = num[0].clone();
        for f in &num[1..] {
            t = fr.mul(&t, f)?;
        }
        if !den.is_empty() {
            let mut d = den[0].clone();
            for f in &den[1..] {
                d = fr.mul(&d, f)?;
            }
            t = fr.div(&t, &d)?;
        }
        let t = fr.scale(&t, &c);
        self.acc = Some(match self.acc.take() {
            None => t,
            Some(a) => fr.add(&a, &t)?,
        });
        Ok(())
    }

    fn push_value(&mut self, t: F::V) -> Result<()> {
        self.acc = Some(match self.acc.take() {
            None => t,
            Some(a) => self.fr.add(&a, &t)?,
        });
        Ok(())
    }

    fn finish(self) -> F::V {
        self.acc.expect("at least one term")
    }
}

/// `I = -2 L̄LL̄P̄ + 3 L̄L̄LP̄ - 7 P̄ L̄LP̄ + 4 P̄ LL̄P̄ - LP̄ L̄P̄ + 2 P̄² LP̄`.
pub fn cartan_formula<F: Frame>(fr: &F) -> Result<F::V> {
    let pb = fr.conj(&fr.p());
    let l_pb = fr.l1(&pb)?;
    let lb_pb = fr.l1bar(&pb)?;
    let lb_l_pb = fr.l1bar(&l_pb)?;
    let l_lb_pb = fr.l1(&lb_pb)?;
    let lb_l_lb_pb = fr.l1bar(&l_lb_pb)?;
    let lb_lb_l_pb = fr.l1bar(&lb_l_pb)?;
    let mut t = Terms::new(fr);
    t.push(q(-2, 1), &[&lb_l_lb_pb], &[])?;
    t.push(q(3, 1), &[&lb_lb_l_pb], &[])?;
    t.push(q(-7, 1), &[&pb, &lb_l_pb], &[])?;
    t.push(q(4, 1), &[&pb, &l_lb_pb], &[])?;
    t.push(q(-1, 1), &[&l_pb, &lb_pb], &[])?;
    t.push(q(2, 1), &[&pb, &pb, &l_pb], &[])?;
    Ok(t.finish())
}

/// First CR invariant `W_0` of a Levi-rank-one hypersurface.
pub fn w0_formula<F: KernelFrame>(fr: &F) -> Result<F::V> {
    let k = fr.k();
    let kb = fr.conj(&k);
    let s = fr.l1bar(&k)?;
    let s2 = fr.l1bar(&s)?;
    let ks2 = fr.kernel(&s2)?;
    let ks = fr.kernel(&s)?;
    let sb = fr.l1bar(&kb)?;
    let l_sb = fr.l1(&sb)?;
    let l_s = fr.l1(&s)?;
    let tk = fr.t_of_k()?;
    let mut t = Terms::new(fr);
    t.push(q(-1, 3), &[&ks2], &[&s, &s])?;
    t.push(q(1, 3), &[&ks, &s2], &[&s, &s, &s])?;
    t.push(q(2, 3), &[&l_sb], &[&sb])?;
    t.push(q(2, 3), &[&l_s], &[&s])?;
    let last = fr.div(&tk, &s)?;
    t.push_value(fr.scale(&fr.times_i(&last), &q(1, 3)))?;
    Ok(t.finish())
}

/// Conjugate `J̄_0` of the second invariant.
pub fn j0bar_formula<F: KernelFrame>(fr: &F) -> Result<F::V> {
    let k = fr.k();
    let pb = fr.conj(&fr.p());
    let s = fr.l1bar(&k)?;
    let s2 = fr.l1bar(&s)?;
    let s3 = fr.l1bar(&s2)?;
    let s4 = fr.l1bar(&s3)?;
    let lpb = fr.l1bar(&pb)?;
    let llpb = fr.l1bar(&lpb)?;
    let mut t = Terms::new(fr);
    t.push(q(1, 6), &[&s4], &[&s])?;
    t.push(q(-5, 6), &[&s3, &s2], &[&s, &s])?;
    t.push(q(-1, 6), &[&s3, &pb], &[&s])?;
    t.push(q(20, 27), &[&s2, &s2, &s2], &[&s, &s, &s])?;
    t.push(q(5, 18), &[&s2, &s2, &pb], &[&s, &s])?;
    t.push(q(1, 6), &[&s2, &lpb], &[&s])?;
    t.push(q(-1, 9), &[&s2, &pb, &pb], &[&s])?;
    t.push(q(-1, 6), &[&llpb], &[])?;
    t.push(q(1, 3), &[&lpb, &pb], &[])?;
    t.push(q(-2, 27), &[&pb, &pb, &pb], &[])?;
    Ok(t.finish())
}

/// `J_0 = conj(J̄_0)`.
pub fn j0_formula<F: KernelFrame>(fr: &F) -> Result<F::V> {
    Ok(fr.conj(&j0bar_formula(fr)?))
}

// ---------------------------------------------------------------------------
// Derivations on complexified jets

/// `sum_i c_i d/dx_i` over the real variables of a jet, complex coefficients.
#[derive(Clone, Debug)]
pub struct Derivation<S: Scalar> {
    coeffs: Vec<Option<CJet<S>>>,
}

impl<S: Scalar> Derivation<S> {
    pub fn zero(nvars: usize) -> Self {
        Derivation {
            coeffs: vec![None; nvars],
        }
    }

    pub fn coefficient(&self, var: usize) -> Option<&CJet<S>> {
        self.coeffs[var].as_ref()
    }

    pub fn with(mut self, var: usize, c: CJet<S>) -> Self {
        self.coeffs[var] = Some(c);
        self
    }

    pub fn apply(&self, f: &CJet<S>) -> Result<CJet<S>> {
        let mut acc: Option<CJet<S>> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if let Some(c) = c {
                let df = CJet::new(f.re.diff(i)?, f.im.diff(i)?);
                let t = c.try_mul(&df)?;
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.try_add(&t)?,
                });
            }
        }
        match acc {
            Some(a) => Ok(a),
            None if f.order() == 0 => Err(Error::OrderTooLow {
                what: "derivation".into(),
                needed: 1,
                got: 0,
            }),
            None => Ok(f.truncate(f.order() - 1).zero_like()),
        }
    }

    pub fn conj(&self) -> Self {
        Derivation {
            coeffs: self.coeffs.iter().map(|c| c.as_ref().map(CJet::conj)).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&o.coeffs)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Ok(Some(a.try_add(b)?)),
                (Some(a), None) => Ok(Some(a.clone())),
                (None, Some(b)) => Ok(Some(b.clone())),
                (None, None) => Ok(None),
            })
            .collect::<Result<_>>()?;
        Ok(Derivation { coeffs })
    }

    /// Multiplies every coefficient by `f`.
    pub fn times(&self, f: &CJet<S>) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.as_ref().map(|c| c.try_mul(f)).transpose())
            .collect::<Result<_>>()?;
        Ok(Derivation { coeffs })
    }

    pub fn times_i(&self) -> Self {
        Derivation {
            coeffs: self.coeffs.iter().map(|c| c.as_ref().map(CJet::times_i)).collect(),
        }
    }

    /// `[X, Y] = sum_j (X(Y_j) - Y(X_j)) d/dx_j`.
    pub fn commutator(&self, o: &Self) -> Result<Self> {
        let n = self.coeffs.len();
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            let xy = o.coeffs[j].as_ref().map(|c| self.apply(c)).transpose()?;
            let yx = self.coeffs[j].as_ref().map(|c| o.apply(c)).transpose()?;
            coeffs.push(match (xy, yx) {
                (Some(a), Some(b)) => Some(a.try_sub(&b)?),
                (Some(a), None) => Some(a),
                (None, Some(b)) => Some(-&b),
                (None, None) => None,
            });
        }
        Ok(Derivation { coeffs })
    }
}

// ---------------------------------------------------------------------------
// Graphed CR hypersurfaces

/// `u = F(...)` with declared roles of the jet's real variables. Roles that
/// are absent are variables `F` does not depend on (tube or rigid graphs);
/// derivatives along them vanish.
#[derive(Clone, Debug)]
pub struct CRGraph<S: Scalar> {
    pub f: Jet<S>,
    /// For each complex coordinate `z_k = x_k + i y_k`, the jet indices of
    /// `x_k` and `y_k`.
    pub z: Vec<(Option<usize>, Option<usize>)>,
    /// Jet index of `v = Im w`.
    pub v: Option<usize>,
}

impl<S: Scalar> CRGraph<S> {
    /// Roles by name: `x_k`/`y_k` names per complex coordinate and `v`; names
    /// absent from the jet are treated as absent roles.
    pub fn with_roles(f: Jet<S>, z: &[(&str, &str)], v: &str) -> Self {
        let find = |n: &str| f.space().var_index(n);
        let z = z.iter().map(|(a, b)| (find(a), find(b))).collect();
        let v = find(v);
        CRGraph { f, z, v }
    }

    /// Tube over a graph: jet variable `i` is `x_{i+1}`, no `y`, no `v`.
    pub fn tube(f: Jet<S>) -> Self {
        let z = (0..f.nvars()).map(|i| (Some(i), None)).collect();
        CRGraph { f, z, v: None }
    }

    pub fn nvars(&self) -> usize {
        self.f.nvars()
    }

    fn cconst(&self, re: Rational, im: Rational) -> CJet<S> {
        let ctx = self.f.ctx();
        CJet::new(
            self.f.const_like(S::from_rational(ctx, &re)),
            self.f.const_like(S::from_rational(ctx, &im)),
        )
    }

    fn real(&self, j: Jet<S>) -> CJet<S> {
        CJet::real(j)
    }

    /// `d/dz_k = 1/2 (d/dx_k - i d/dy_k)`.
    pub fn dz(&self, k: usize) -> Derivation<S> {
        let mut d = Derivation::zero(self.nvars());
        let (x, y) = self.z[k];
        if let Some(x) = x {
            d = d.with(x, self.cconst(q(1, 2), q(0, 1)));
        }
        if let Some(y) = y {
            d = d.with(y, self.cconst(q(0, 1), q(-1, 2)));
        }
        d
    }

    pub fn dv(&self) -> Derivation<S> {
        let d = Derivation::zero(self.nvars());
        match self.v {
            Some(v) => d.with(v, self.cconst(q(1, 1), q(0, 1))),
            None => d,
        }
    }

    /// `A^k = -i F_{z_k} / (1 + i F_v)`.
    pub fn a(&self, k: usize) -> Result<CJet<S>> {
        let fz = self.dz(k).apply(&self.real(self.f.clone()))?;
        let fv = match self.v {
            Some(v) => self.f.diff(v)?,
            None => self.f.truncate(self.f.order() - 1).zero_like(),
        };
        let den = CJet::new(fv.one_like(), fv);
        (-&fz.times_i()).try_div(&den)
    }

    /// `ℒ_k = d/dz_k + A^k d/dv`.
    pub fn field(&self, k: usize, a: &CJet<S>) -> Result<Derivation<S>> {
        self.dz(k).add(&self.dv().times(a)?)
    }

    fn a_v(&self, a: &CJet<S>) -> Result<CJet<S>> {
        self.dv().apply(a)
    }
}

fn require_nonzero<S: Scalar>(c: &CJet<S>, tol: f64, what: &str) -> Result<()> {
    let re = c.re.constant_term();
    let im = c.im.constant_term();
    let zero = if S::EXACT {
        re.is_zero() && im.is_zero()
    } else {
        re.negligible(tol) && im.negligible(tol)
    };
    if zero {
        Err(Error::Hypothesis(format!("{what} vanishes at the base point")))
    } else {
        Ok(())
    }
}

/// Frame of a Levi nondegenerate `M^3 ⊂ C^2`.
#[derive(Clone, Debug)]
pub struct FrameC2<S: Scalar> {
    pub a: CJet<S>,
    pub l_field: Derivation<S>,
    pub lbar_field: Derivation<S>,
    pub levi: CJet<S>,
    pub p: CJet<S>,
}

pub fn cr_frame_c2<S: Scalar>(g: &CRGraph<S>) -> Result<FrameC2<S>> {
    if g.z.len() != 1 {
        return Err(Error::Invalid("C^2 frame needs one complex coordinate".into()));
    }
    if g.f.order() < 3 {
        return Err(Error::OrderTooLow {
            what: "CR frame of M^3".into(),
            needed: 3,
            got: g.f.order(),
        });
    }
    let a = g.a(0)?;
    let l_field = g.field(0, &a)?;
    let lbar_field = l_field.conj();
    let levi = l_field.apply(&a.conj())?.try_sub(&lbar_field.apply(&a)?)?.times_i();
    require_nonzero(&levi, S::default_tolerance(g.f.ctx()), "Levi factor l")?;
    let a_v = g.a_v(&a)?;
    let p = l_field.apply(&levi)?.try_sub(&levi.try_mul(&a_v)?)?.try_div(&levi)?;
    Ok(FrameC2 {
        a,
        l_field,
        lbar_field,
        levi,
        p,
    })
}

impl<S: Scalar> Frame for FrameC2<S> {
    type V = CJet<S>;
    fn l1(&self, f: &CJet<S>) -> Result<CJet<S>> {
        self.l_field.apply(f)
    }
    fn l1bar(&self, f: &CJet<S>) -> Result<CJet<S>> {
        self.lbar_field.apply(f)
    }
    fn p(&self) -> CJet<S> {
        self.p.clone()
    }
    fn conj(&self, f: &CJet<S>) -> CJet<S> {
        f.conj()
    }
    fn add(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_add(b)
    }
    fn mul(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_mul(b)
    }
    fn div(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_div(b)
    }
    fn scale(&self, a: &CJet<S>, c: &Rational) -> CJet<S> {
        a.scale_rational(c)
    }
    fn times_i(&self, a: &CJet<S>) -> CJet<S> {
        a.times_i()
    }
}

/// Cartan's sphericity invariant of `M^3 ⊂ C^2` by nested derivations.
pub fn cartan_general<S: Scalar>(g: &CRGraph<S>) -> Result<CJet<S>> {
    if g.f.order() < 6 {
        return Err(Error::OrderTooLow {
            what: "Cartan invariant".into(),
            needed: 6,
            got: g.f.order(),
        });
    }
    cartan_formula(&cr_frame_c2(g)?)
}

/// Frame of a Levi rank-one `M^5 ⊂ C^3`.
#[derive(Clone, Debug)]
pub struct FrameC3<S: Scalar> {
    pub a1: CJet<S>,
    pub a2: CJet<S>,
    pub l1_field: Derivation<S>,
    pub l2_field: Derivation<S>,
    pub l1bar_field: Derivation<S>,
    pub levi: CJet<S>,
    pub k: CJet<S>,
    pub kernel_field: Derivation<S>,
    pub t_field: Derivation<S>,
    pub p: CJet<S>,
}

pub fn cr_frame_c3<S: Scalar>(g: &CRGraph<S>) -> Result<FrameC3<S>> {
    if g.z.len() != 2 {
        return Err(Error::Invalid("C^3 frame needs two complex coordinates".into()));
    }
    if g.f.order() < 4 {
        return Err(Error::OrderTooLow {
            what: "CR frame of M^5".into(),
            needed: 4,
            got: g.f.order(),
        });
    }
    let tol = S::default_tolerance(g.f.ctx());
    let checks = levi_checks(g)?;
    if checks.rank_at_base == 0 {
        return Err(Error::Hypothesis("Levi form vanishes at the base point (rank 0)".into()));
    }
    if !checks.det_vanishes {
        return Err(Error::Hypothesis("Levi form is nondegenerate, not of rank one".into()));
    }
    let a1 = g.a(0)?;
    let a2 = g.a(1)?;
    let l1_field = g.field(0, &a1)?;
    let l2_field = g.field(1, &a2)?;
    let l1bar_field = l1_field.conj();
    let levi_num = l1_field.apply(&a1.conj())?.try_sub(&l1bar_field.apply(&a1)?)?;
    let levi = levi_num.times_i();
    require_nonzero(&levi, tol, "Levi entry l")?;
    let k = -&l2_field
        .apply(&a1.conj())?
        .try_sub(&l1bar_field.apply(&a2)?)?
        .try_div(&levi_num)?;
    let kernel_field = l1_field.times(&k)?.add(&l2_field)?;
    let t_field = l1_field.commutator(&l1bar_field)?.times_i();
    let a1_v = g.a_v(&a1)?;
    let p = l1_field.apply(&levi)?.try_sub(&levi.try_mul(&a1_v)?)?.try_div(&levi)?;
    let lbk = l1bar_field.apply(&k)?;
    require_nonzero(&lbk, tol, "L̄_1(k) (2-nondegeneracy)")?;
    Ok(FrameC3 {
        a1,
        a2,
        l1_field,
        l2_field,
        l1bar_field,
        levi,
        k,
        kernel_field,
        t_field,
        p,
    })
}

impl<S: Scalar> Frame for FrameC3<S> {
    type V = CJet<S>;
    fn l1(&self, f: &CJet<S>) -> Result<CJet<S>> {
        self.l1_field.apply(f)
    }
    fn l1bar(&self, f: &CJet<S>) -> Result<CJet<S>> {
        self.l1bar_field.apply(f)
    }
    fn p(&self) -> CJet<S> {
        self.p.clone()
    }
    fn conj(&self, f: &CJet<S>) -> CJet<S> {
        f.conj()
    }
    fn add(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_add(b)
    }
    fn mul(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_mul(b)
    }
    fn div(&self, a: &CJet<S>, b: &CJet<S>) -> Result<CJet<S>> {
        a.try_div(b)
    }
    fn scale(&self, a: &CJet<S>, c: &Rational) -> CJet<S> {
        a.scale_rational(c)
    }
    fn times_i(&self, a: &CJet<S>) -> CJet<S> {
        a.times_i()
    }
}

impl<S: Scalar> KernelFrame for FrameC3<S> {
    fn k(&self) -> CJet<S> {
        self.k.clone()
    }
    fn kernel(&self, f: &CJet<S>) -> Result<CJet<S>> {
        self.kernel_field.apply(f)
    }
    fn t_of_k(&self) -> Result<CJet<S>> {
        self.t_field.apply(&self.k)
    }
}

fn check_depth<S: Scalar>(g: &CRGraph<S>, needed: u32, what: &str) -> Result<()> {
    if g.f.order() < needed {
        return Err(Error::OrderTooLow {
            what: what.into(),
            needed,
            got: g.f.order(),
        });
    }
    Ok(())
}

pub fn w0<S: Scalar>(g: &CRGraph<S>) -> Result<CJet<S>> {
    check_depth(g, 5, "W_0")?;
    w0_formula(&cr_frame_c3(g)?)
}

pub fn j0<S: Scalar>(g: &CRGraph<S>) -> Result<CJet<S>> {
    check_depth(g, 6, "J_0")?;
    j0_formula(&cr_frame_c3(g)?)
}

// ---------------------------------------------------------------------------
// Levi form

impl<S: Scalar> Algebra for CJet<S> {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, q: &Rational) -> Self {
        self.scale_rational(q)
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det<T: Algebra>(m: &[Vec<T>]) -> T {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc: Option<T> = None;
    for j in 0..n {
        let minor: Vec<Vec<T>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, x)| x.clone()).collect())
            .collect();
        let mut t = m[0][j].mul(&det(&minor));
        if j % 2 == 1 {
            t = t.scale(&Rational::from(-1));
        }
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t),
        });
    }
    acc.expect("non-empty matrix")
}

/// Bordered Levi determinant of a defining function `rho`, whose real
/// variables play the roles `z[k] = (x_k, y_k)` (absent roles: no dependence).
pub fn levi_bordered<S: Scalar>(rho: &Jet<S>, z: &[(Option<usize>, Option<usize>)]) -> Result<CJet<S>> {
    if rho.order() < 2 {
        return Err(Error::OrderTooLow {
            what: "Levi determinant".into(),
            needed: 2,
            got: rho.order(),
        });
    }
    let g = CRGraph {
        f: rho.clone(),
        z: z.to_vec(),
        v: None,
    };
    let r = CJet::real(rho.clone());
    let n = z.len();
    let dz: Vec<CJet<S>> = (0..n).map(|k| g.dz(k).apply(&r)).collect::<Result<_>>()?;
    let mut m: Vec<Vec<CJet<S>>> = Vec::with_capacity(n + 1);
    let zero = dz[0].truncate(rho.order() - 2).zero_like();
    let mut first = vec![zero];
    first.extend(dz.iter().map(|d| d.truncate(rho.order() - 2)));
    m.push(first);
    for j in 0..n {
        let dzb = dz[j].conj();
        let mut row = vec![dzb.truncate(rho.order() - 2)];
        for dk in &dz {
            // d/dz̄_j d/dz_k rho
            row.push(g.dz(j).conj().apply(dk)?);
        }
        m.push(row);
    }
    Ok(det(&m))
}

#[derive(Clone, Debug)]
pub struct LeviChecks<S: Scalar> {
    /// 2×2 matrix `h_{jk} = ϱ_0(i[ℒ_j, ℒ̄_k])`, printed row-major as
    /// `[[h_11, h_21], [h_12, h_22]]`.
    pub matrix: [[CJet<S>; 2]; 2],
    pub levi_det: CJet<S>,
    pub det_vanishes: bool,
    pub rank_at_base: u8,
    pub two_nondegenerate: bool,
}

/// Levi data of `M^5 ⊂ C^3`. Uses `ϱ_0(i[ℒ_j, ℒ̄_k]) = i(ℒ_j(Ā^k) - ℒ̄_k(A^j))`.
pub fn levi_checks<S: Scalar>(g: &CRGraph<S>) -> Result<LeviChecks<S>> {
    if g.z.len() != 2 {
        return Err(Error::Invalid("Levi checks need two complex coordinates".into()));
    }
    if g.f.order() < 3 {
        return Err(Error::OrderTooLow {
            what: "Levi checks".into(),
            needed: 3,
            got: g.f.order(),
        });
    }
    let tol = S::default_tolerance(g.f.ctx());
    let a = [g.a(0)?, g.a(1)?];
    let l = [g.field(0, &a[0])?, g.field(1, &a[1])?];
    let h = |j: usize, k: usize| -> Result<CJet<S>> {
        Ok(l[j].apply(&a[k].conj())?.try_sub(&l[k].conj().apply(&a[j])?)?.times_i())
    };
    let matrix = [[h(0, 0)?, h(1, 0)?], [h(0, 1)?, h(1, 1)?]];
    let levi_det = matrix[0][0].try_mul(&matrix[1][1])?.try_sub(&matrix[0][1].try_mul(&matrix[1][0])?)?;
    let det_vanishes = if S::EXACT {
        levi_det.is_zero()
    } else {
        levi_det.is_negligible(tol)
    };
    let at_base_zero = |c: &CJet<S>| {
        let (re, im) = (c.re.constant_term(), c.im.constant_term());
        if S::EXACT {
            re.is_zero() && im.is_zero()
        } else {
            re.negligible(tol) && im.negligible(tol)
        }
    };
    let rank_at_base = if matrix.iter().flatten().all(at_base_zero) {
        0
    } else if at_base_zero(&levi_det) {
        1
    } else {
        2
    };
    let mut two_nondegenerate = false;
    if rank_at_base == 1 && !at_base_zero(&matrix[0][0]) {
        let num = -&h(1, 0)?.times_i();
        let den = -&h(0, 0)?.times_i();
        // k = -(ℒ_2(Ā^1) - ℒ̄_1(A^2)) / (ℒ_1(Ā^1) - ℒ̄_1(A^1))
        let k = -&num.try_div(&den)?;
        let lbk = l[0].conj().apply(&k)?;
        two_nondegenerate = !at_base_zero(&lbk);
    }
    Ok(LeviChecks {
        matrix,
        levi_det,
        det_vanishes,
        rank_at_base,
        two_nondegenerate,
    })
}

// ---------------------------------------------------------------------------
// Symbolic tube restriction

/// Curve tube `u = F(x)` in jet coordinates: `ℒ = ℒ̄ = 1/2 D_x`, `P = F_xxx/(2 F_xx)`.
pub struct SymbolicTubeCurve;

impl Frame for SymbolicTubeCurve {
    type V = DPoly;
    fn l1(&self, f: &DPoly) -> Result<DPoly> {
        Ok(f.total_derivative(0).scale(&q(1, 2)))
    }
    fn l1bar(&self, f: &DPoly) -> Result<DPoly> {
        self.l1(f)
    }
    fn p(&self) -> DPoly {
        DPoly::var((3, 0)).mul(&DPoly::pivot_pow(-1)).scale(&q(1, 2))
    }
    fn conj(&self, f: &DPoly) -> DPoly {
        f.clone()
    }
    fn add(&self, a: &DPoly, b: &DPoly) -> Result<DPoly> {
        Ok(a.add(b))
    }
    fn mul(&self, a: &DPoly, b: &DPoly) -> Result<DPoly> {
        Ok(a.mul(b))
    }
    fn div(&self, _: &DPoly, _: &DPoly) -> Result<DPoly> {
        Err(Error::Invalid("symbolic frame supports no division".into()))
    }
    fn scale(&self, a: &DPoly, c: &Rational) -> DPoly {
        a.scale(c)
    }
    fn times_i(&self, _: &DPoly) -> DPoly {
        unreachable!("tube expressions stay real")
    }
}

/// The Cartan invariant restricted to curve tubes, as a Laurent polynomial in
/// `F_xx, ..., F_xxxxxx`. Computed once from [`cartan_formula`].
pub fn tube_cartan_polynomial() -> &'static DPoly {
    static POLY: OnceLock<DPoly> = OnceLock::new();
    POLY.get_or_init(|| cartan_formula(&SymbolicTubeCurve).expect("division-free formula"))
}

// ---------------------------------------------------------------------------
// Solved-form PDE system

pub const PDE_INIT_KEYS: [&str; 8] = ["u00", "u10", "u20", "u30", "u40", "u01", "u11", "u21"];

pub const PDE_PARAMETRIC: [DVar; 8] = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (0, 1), (1, 1), (2, 1)];

/// Values `F_{x^j y^k}(0)` of the eight parametric derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeInit {
    pub values: [Rational; 8],
}

impl PdeInit {
    pub fn new(values: [Rational; 8]) -> Self {
        PdeInit { values }
    }

    pub fn from_i64(v: [i64; 8]) -> Self {
        PdeInit {
            values: v.map(Rational::from),
        }
    }

    pub fn value(&self, v: DVar) -> Option<&Rational> {
        PDE_PARAMETRIC.iter().position(|&p| p == v).map(|i| &self.values[i])
    }
}

fn u(j: u8, k: u8) -> DPoly {
    DPoly::var((j, k))
}

/// `F_yy = F_xy^2 / F_xx`.
pub fn hessian_equation() -> Equation {
    Equation {
        name: "hessian",
        lhs: (0, 2),
        rhs: u(1, 1).pow(2).mul(&DPoly::pivot_pow(-1)),
    }
}

/// `F_xxxy = (F_xy/F_xx) F_xxxx + 2 F_xxx F_xxy / F_xx - 2 F_xy F_xxx^2 / F_xx^2`.
pub fn w_aff_equation() -> Equation {
    let inv = DPoly::pivot_pow(-1);
    let inv2 = DPoly::pivot_pow(-2);
    let rhs = u(1, 1)
        .mul(&u(4, 0))
        .mul(&inv)
        .add(&u(3, 0).mul(&u(2, 1)).mul(&inv).scale(&q(2, 1)))
        .sub(&u(1, 1).mul(&u(3, 0).pow(2)).mul(&inv2).scale(&q(2, 1)));
    Equation {
        name: "w_aff",
        lhs: (3, 1),
        rhs,
    }
}

/// `F_xxxxx = 5 F_xxx F_xxxx / F_xx - (40/9) F_xxx^3 / F_xx^2`.
pub fn monge_equation() -> Equation {
    let rhs = u(3, 0)
        .mul(&u(4, 0))
        .mul(&DPoly::pivot_pow(-1))
        .scale(&q(5, 1))
        .sub(&u(3, 0).pow(3).mul(&DPoly::pivot_pow(-2)).scale(&q(40, 9)));
    Equation {
        name: "monge",
        lhs: (5, 0),
        rhs,
    }
}

pub fn flat_system() -> System {
    System::new(vec![hessian_equation(), w_aff_equation(), monge_equation()])
}

fn check_init(init: &PdeInit, order: u32) -> Result<()> {
    if init.values[2] == 0 {
        return Err(Error::Hypothesis("u20 = F_xx(0) must be nonzero".into()));
    }
    if order < 5 {
        return Err(Error::OrderTooLow {
            what: "PDE propagation".into(),
            needed: 5,
            got: order,
        });
    }
    Ok(())
}

fn eval_at_init(p: &DPoly, init: &PdeInit) -> Result<Rational> {
    p.eval_rational(&|v| {
        init.value(v)
            .cloned()
            .unwrap_or_else(|| panic!("normal form uses non-parametric {v:?}"))
    })
}

/// Jet of `F(x, y)` at the origin determined by the solved-form system and
/// eight initial values; coefficients filled in graded-lex order.
pub fn pde_propagate(init: &PdeInit, order: u32) -> Result<Jet<Rational>> {
    check_init(init, order)?;
    flat_system().solve_jet(&["x", "y"], order, |v| {
        init.value(v)
            .cloned()
            .unwrap_or_else(|| panic!("{v:?} is parametric but has no initial value"))
    })
}

#[derive(Clone, Debug)]
pub struct CompatibilityReport {
    /// Principal coordinates reachable by more than one route.
    pub checked: usize,
    /// Route pairs whose normal forms differ as Laurent polynomials.
    pub symbolic_mismatches: Vec<String>,
    /// Largest `|value difference|` at the initial data.
    pub max_residual: Rational,
    /// Per-coordinate number of routes compared.
    pub routes: BTreeMap<String, usize>,
}

/// Compares, for every principal derivative up to `order`, the normal forms
/// obtained along every differentiation route.
pub fn compatibility_check(init: &PdeInit, order: u32) -> Result<CompatibilityReport> {
    check_init(init, order)?;
    let mut sys = flat_system();
    let mut checked = 0;
    let mut symbolic_mismatches = Vec::new();
    let mut max_residual = Rational::new();
    let mut routes = BTreeMap::new();
    for v in sys.principal_upto(order) {
        let all = sys.routes(v);
        if all.len() < 2 {
            continue;
        }
        checked += 1;
        routes.insert(crate::diffalg::coord_name(v), all.len());
        let reference = sys.normal_form(v)?;
        for r in all {
            let cand = sys.along(v, r)?;
            let diff = cand.sub(&reference);
            if !diff.is_zero() {
                symbolic_mismatches.push(format!("{} via {:?}", crate::diffalg::coord_name(v), r));
            }
            let val = Rational::from(eval_at_init(&diff, init)?.abs_ref());
            if val > max_residual {
                max_residual = val;
            }
        }
    }
    Ok(CompatibilityReport {
        checked,
        symbolic_mismatches,
        max_residual,
        routes,
    })
}

/// Left side minus right side of each solved equation, evaluated on a jet in
/// `(x, y)`: `[hessian, w_aff numerator, monge]`.
pub fn pde_residuals<S: Scalar>(f: &Jet<S>) -> Result<Vec<Jet<S>>> {
    [hessian_equation(), w_aff_equation(), monge_equation()]
        .iter()
        .map(|e| {
            let lhs = DPoly::var(e.lhs);
            // Clear the pivot denominators so the residual is polynomial.
            let min_pivot = e.rhs.terms().map(|(m, _)| m.pivot).min().unwrap_or(0).min(0);
            let cleared = lhs.sub(&e.rhs).mul(&DPoly::pivot_pow(-min_pivot));
            cleared.eval_on_jet(f)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_jet, parse};

    type Q = Rational;

    fn jet2(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into(), "y".into()], &[Q::new(), Q::new()], order, &()).unwrap()
    }

    fn jet1(text: &str, order: u32) -> Jet<Q> {
        eval_jet(&parse(text).unwrap(), &["x".into()], &[Q::new()], order, &()).unwrap()
    }

    #[test]
    fn tube_frame_of_curve() {
        let f = jet1("x^3+2*x^2+x^4/5", 6);
        let g = CRGraph::tube(f.clone());
        let fr = cr_frame_c2(&g).unwrap();
        let fx = f.diff(0).unwrap();
        assert_eq!(fr.a.re, fx.zero_like());
        assert_eq!(fr.a.im, fx.scale_rational(&q(-1, 2)));
        let fxx = f.partial(&[2]).unwrap();
        assert_eq!(fr.levi.re, fxx.scale_rational(&q(-1, 2)));
        assert!(fr.levi.im.is_zero());
        let p = f.partial(&[3]).unwrap().try_div(&fxx).unwrap().scale_rational(&q(1, 2));
        assert_eq!(fr.p.re, p);
        assert!(fr.p.im.is_zero());
    }

    #[test]
    fn sphere_tube_frame() {
        let fr = cr_frame_c2(&CRGraph::tube(jet1("x^2", 6))).unwrap();
        assert!(fr.p.is_zero());
        assert_eq!(*fr.levi.re.constant_term(), -1);
    }

    #[test]
    fn full_variables_agree_with_reduced_tube() {
        // Same tube written over (x, y, v) with no y, v dependence.
        let names = ["x".to_string(), "y".to_string(), "v".to_string()];
        let f = eval_jet(&parse("x^2+x^3/3+x^4").unwrap(), &names, &[Q::new(), Q::new(), Q::new()], 7, &()).unwrap();
        let full = CRGraph::with_roles(f, &[("x", "y")], "v");
        let reduced = CRGraph::tube(jet1("x^2+x^3/3+x^4", 7));
        let a = cartan_general(&full).unwrap();
        let b = cartan_general(&reduced).unwrap();
        assert_eq!(a.re.coeff(&[0, 0, 0]), b.re.coeff(&[0]));
        assert_eq!(a.re.coeff(&[1, 0, 0]), b.re.coeff(&[1]));
        assert!(a.im.is_zero());
    }

    #[test]
    fn cartan_vanishes_on_sphere_and_exp() {
        assert!(cartan_general(&CRGraph::tube(jet1("x^2", 8))).unwrap().is_zero());
        assert!(cartan_general(&CRGraph::tube(jet1("exp(x)", 8))).unwrap().is_zero());
        assert!(!cartan_general(&CRGraph::tube(jet1("x^2+x^6", 8))).unwrap().is_zero());
    }

    #[test]
    fn general_cartan_on_non_tube_graph_is_computable() {
        let names = ["x".to_string(), "y".to_string(), "v".to_string()];
        let f = eval_jet(&parse("x^2+y^2+x*v^2+x^3*y").unwrap(), &names, &[Q::new(), Q::new(), Q::new()], 7, &()).unwrap();
        let g = CRGraph::with_roles(f, &[("x", "y")], "v");
        let c = cartan_general(&g).unwrap();
        assert_eq!(c.order(), 1);
        // Sphere Re w = |z|^2 in its usual form has vanishing Cartan invariant.
        let s = eval_jet(&parse("x^2+y^2").unwrap(), &names, &[Q::new(), Q::new(), Q::new()], 7, &()).unwrap();
        assert!(cartan_general(&CRGraph::with_roles(s, &[("x", "y")], "v")).unwrap().is_zero());
    }

    #[test]
    fn commutator_of_conjugate_fields_on_lc_model_is_vertical() {
        let names = ["x1", "y1", "x2", "y2", "v"].map(String::from);
        let f = eval_jet(&parse("x1^2/(1-x2)").unwrap(), &names, &vec![Q::new(); 5], 6, &()).unwrap();
        let g = CRGraph::with_roles(f, &[("x1", "y1"), ("x2", "y2")], "v");
        let fr = cr_frame_c3(&g).unwrap();
        for i in 0..4 {
            assert!(fr.t_field.coefficient(i).is_none_or(|c| c.is_zero()));
        }
        // 𝒯 = l d/dv.
        let tv = fr.t_field.coefficient(4).unwrap();
        assert_eq!(*tv, fr.levi.truncate(tv.order()));
    }

    #[test]
    fn lc_model_flatness_and_frame_values() {
        let g = CRGraph::tube(jet2("x^2/(1-y)", 8));
        let fr = cr_frame_c3(&g).unwrap();
        let lbk = fr.l1bar_field.apply(&fr.k).unwrap();
        // -1/2 (F_xx F_xxy - F_xy F_xxx) / F_xx^2 with F_xx = 2, F_xxy = 2.
        assert_eq!(*lbk.re.constant_term(), q(-1, 2));
        assert!(fr.t_of_k().unwrap().is_zero());
        assert!(w0(&g).unwrap().is_zero());
        assert!(j0(&g).unwrap().is_zero());
        let k = fr.k.re.clone();
        let f = jet2("x^2/(1-y)", 8);
        let want = -&f.partial(&[1, 1]).unwrap().try_div(&f.partial(&[2, 0]).unwrap()).unwrap();
        assert_eq!(k, want.truncate(k.order()));
        assert!(fr.k.im.is_zero());
    }

    #[test]
    fn levi_checks_classify_examples() {
        let lc = levi_checks(&CRGraph::tube(jet2("x^2/(1-y)", 6))).unwrap();
        assert_eq!(lc.rank_at_base, 1);
        assert!(lc.det_vanishes && lc.two_nondegenerate);
        let cyl = levi_checks(&CRGraph::tube(jet2("x^2", 6))).unwrap();
        assert_eq!(cyl.rank_at_base, 1);
        assert!(!cyl.two_nondegenerate);
        let nd = levi_checks(&CRGraph::tube(jet2("x^2+y^2", 6))).unwrap();
        assert_eq!(nd.rank_at_base, 2);
        assert!(matches!(cr_frame_c3(&CRGraph::tube(jet2("x^2+y^2", 6))), Err(Error::Hypothesis(_))));
        assert!(matches!(cr_frame_c3(&CRGraph::tube(jet2("x^2", 6))), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn levi_of_tube_is_scaled_hessian() {
        // rho = x1^2 + x2^2 - u over (x1, x2, u): Levi = 4^-3 * bordered Hessian.
        let names = ["x1", "x2", "u"].map(String::from);
        let rho = eval_jet(&parse("x1^2+x2^2+x1^3-u").unwrap(), &names, &vec![Q::new(); 3], 5, &()).unwrap();
        let levi = levi_bordered(&rho, &[(Some(0), None), (Some(1), None), (Some(2), None)]).unwrap();
        let mut hm: Vec<Vec<Jet<Q>>> = Vec::new();
        let grad: Vec<Jet<Q>> = (0..3).map(|i| rho.diff(i).unwrap().truncate(3)).collect();
        let mut row = vec![grad[0].zero_like()];
        row.extend(grad.iter().cloned());
        hm.push(row);
        for i in 0..3 {
            let mut row = vec![grad[i].clone()];
            for j in 0..3 {
                let mut m = [0u32; 3];
                m[i] += 1;
                m[j] += 1;
                row.push(rho.partial(&m).unwrap());
            }
            hm.push(row);
        }
        let hess = det(&hm);
        assert_eq!(levi.re, hess.scale_rational(&q(1, 64)));
        assert!(levi.im.is_zero());
    }

    #[test]
    fn symbolic_tube_cartan_matches_jets() {
        let poly = tube_cartan_polynomial();
        let f = jet1("x^2+x^3+2*x^5-x^6/7+x^8", 8);
        let sym = poly.eval_on_jet(&f).unwrap();
        let num = cartan_general(&CRGraph::tube(f)).unwrap();
        assert_eq!(sym, num.re);
    }

    #[test]
    fn propagation_reproduces_lc_model() {
        let init = PdeInit::from_i64([0, 0, 2, 0, 0, 0, 0, 2]);
        let f = pde_propagate(&init, 8).unwrap();
        assert_eq!(f, jet2("x^2/(1-y)", 8));
        assert!(matches!(
            pde_propagate(&PdeInit::from_i64([0, 0, 0, 0, 0, 0, 0, 2]), 8),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn minimal_compatibility_case() {
        let init = PdeInit::from_i64([1, -2, 3, 1, -1, 2, 5, -3]);
        let r = compatibility_check(&init, 5).unwrap();
        assert!(r.checked > 0);
        assert!(r.routes.contains_key("F_xxxyy"));
        assert!(r.symbolic_mismatches.is_empty(), "{:?}", r.symbolic_mismatches);
        assert_eq!(r.max_residual, 0);
    }
}

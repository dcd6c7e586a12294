//! Structural invariants as property tests.

mod common;

use common::*;
use proptest::prelude::*;
use rug::Float;
use tubejet::affine::{cartan_tube, halphen_constrained_jet, hessian_det, monge, s_aff_numerator, verdict, w_aff_numerator, Verdict};
use tubejet::complex::CJet;
use tubejet::cr::{pde_propagate, CRGraph, Derivation, PdeInit};
use tubejet::expr::{eval_jet, parse};
use tubejet::scalar::check_precision;
use tubejet::space::VarSpace;
use tubejet::transform::*;
use tubejet::Jet;

fn jet_from(space: &std::sync::Arc<VarSpace>, order: u32, v: &[i64]) -> Jet<Q> {
    let mut i = 0;
    Jet::from_fn(space.clone(), order, zero_base(space.nvars()), (), |_| {
        i += 1;
        Q::from((v[(i - 1) % v.len()], 1 + (i as i64 % 3)))
    })
}

fn cjet(space: &std::sync::Arc<VarSpace>, order: u32, a: &[i64], b: &[i64]) -> CJet<Q> {
    CJet::new(jet_from(space, order, a), jet_from(space, order, b))
}

fn coeffs() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-7i64..8, 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_is_an_involution(a in coeffs(), b in coeffs()) {
        let s = VarSpace::new(&["x", "y"], 5);
        let z = cjet(&s, 5, &a, &b);
        prop_assert_eq!(z.conj().conj(), z.clone());
        prop_assert_eq!(z.conj().re, z.re);
    }

    #[test]
    fn derivations_drop_one_order_and_obey_leibniz(a in coeffs(), b in coeffs(), c in coeffs(), d in coeffs()) {
        let s = VarSpace::new(&["x", "y", "v"], 6);
        let x = Derivation::zero(3).with(0, cjet(&s, 6, &a, &b)).with(2, cjet(&s, 6, &c, &a));
        let f = cjet(&s, 6, &c, &d);
        let g = cjet(&s, 6, &b, &a);
        prop_assert_eq!(x.apply(&f).unwrap().order(), 5);
        let lhs = x.apply(&f.try_mul(&g).unwrap()).unwrap();
        let rhs = x.apply(&f).unwrap().try_mul(&g).unwrap().try_add(&f.try_mul(&x.apply(&g).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn commutator_acts_as_the_bracket(a in coeffs(), b in coeffs(), c in coeffs(), d in coeffs()) {
        let s = VarSpace::new(&["x", "y"], 6);
        let x = Derivation::zero(2).with(0, cjet(&s, 6, &a, &b)).with(1, cjet(&s, 6, &d, &c));
        let y = Derivation::zero(2).with(1, cjet(&s, 6, &c, &a));
        let f = cjet(&s, 6, &d, &b);
        let bracket = x.commutator(&y).unwrap();
        prop_assert_eq!(bracket.coefficient(1).unwrap().order(), 5);
        let direct = x.apply(&y.apply(&f).unwrap()).unwrap().try_sub(&y.apply(&x.apply(&f).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(bracket.apply(&f.truncate(5)).unwrap(), direct);
    }

    #[test]
    fn near_identity_maps_are_invertible(seed in 0u64..10_000, n in 2usize..4) {
        let g = random_near_identity(&mut rng(seed), n);
        prop_assert!(g.is_near_identity(NEAR_IDENTITY_RADIUS));
        prop_assert!(g.delta() != 0);
        prop_assert!(g.inverse().unwrap().after(&g).is_identity());
    }

    #[test]
    fn float_verdicts_are_never_exact(a in coeffs(), scale in -60i32..4) {
        let s = VarSpace::new(&["x"], 4);
        let j = Jet::from_fn(s, 4, vec![Float::with_val(256, 0)], 256, |m| {
            Float::with_val(256, a[m[0] as usize % a.len()]) * Float::with_val(256, 10f64.powi(scale))
        });
        prop_assert_ne!(verdict(&j, 1e-40), Verdict::ExactZero);
        prop_assert_ne!(verdict(&j.zero_like(), 1e-40), Verdict::ExactZero);
    }

    #[test]
    fn spherical_tubes_stay_spherical(seed in 0u64..10_000) {
        let mut rg = rng(seed);
        let init = [small(&mut rg), small(&mut rg), nonzero(&mut rg), small(&mut rg)];
        let f = halphen_constrained_jet(init, 8).unwrap();
        let image = transform_graph(&random_near_identity(&mut rg, 2), &f).unwrap();
        prop_assert!(cartan_tube(&image).unwrap().is_zero());
    }

    #[test]
    fn rank_one_hessians_stay_rank_one(seed in 0u64..10_000) {
        let mut rg = rng(seed);
        let f = random_rank_one(&mut rg, 6);
        prop_assert!(hessian_det(&f).unwrap().is_zero());
        let image = transform_graph(&random_near_identity(&mut rg, 3), &f).unwrap();
        prop_assert!(hessian_det(&image).unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn normalized_jets_equal_the_model(seed in 0u64..10_000) {
        let mut rg = rng(seed);
        let g = random_near_identity(&mut rg, 3);
        let f = transform_graph(&g, &model_jet(8).unwrap()).unwrap();
        let res = normalize_to_model(&f, 8).unwrap();
        prop_assert_eq!(res.verdict, NormVerdict::EquivalentToModel);
        prop_assert_eq!(res.jet, model_jet(8).unwrap());
    }

    /// Nondegenerate solutions of the flat system are affine images of the model.
    #[test]
    fn propagated_jets_normalize_to_the_model(seed in 0u64..10_000) {
        let mut rg = rng(seed);
        let f = loop {
            let values = std::array::from_fn(|k| if k == 2 { nonzero(&mut rg) } else { small(&mut rg) });
            let f = pde_propagate(&PdeInit::new(values), 8).unwrap();
            if *s_aff_numerator(&f).unwrap().constant_term() != 0 {
                break f;
            }
        };
        prop_assert!(w_aff_numerator(&f).unwrap().is_zero());
        prop_assert!(monge(&f).unwrap().is_zero());
        let res = normalize_to_model(&f, 8).unwrap();
        prop_assert_eq!(res.verdict, NormVerdict::EquivalentToModel);
    }
}

#[test]
fn dz_is_half_of_dx_minus_i_dy() {
    let f = j2("x^2+x*y", 4);
    let g = CRGraph::with_roles(f, &[("x", "y")], "");
    let s = VarSpace::new(&["x", "y"], 4);
    let x = Jet::variable(s.clone(), 4, zero_base(2), "x", ()).unwrap();
    let y = Jet::variable(s, 4, zero_base(2), "y", ()).unwrap();
    let z = CJet::new(x.clone(), y.clone());
    let one = g.dz(0).apply(&z).unwrap();
    assert_eq!(*one.re.constant_term(), 1);
    assert!(one.im.is_zero());
    assert!(g.dz(0).apply(&z.conj()).unwrap().is_zero());
}

#[test]
fn tube_graphs_have_no_imaginary_directions() {
    let g = CRGraph::tube(model_jet(6).unwrap());
    for k in 0..2 {
        let d = g.dz(k);
        assert!(d.coefficient(k).is_some());
        assert!(d.coefficient(1 - k).is_none());
    }
}

#[test]
fn float_precision_has_a_floor() {
    assert!(check_precision(127).is_err());
    assert!(check_precision(128).is_ok());
}

#[test]
fn undeclared_variables_are_rejected() {
    let e = parse("x^2+z").unwrap();
    assert!(eval_jet(&e, &["x".to_string(), "y".to_string()], &zero_base(2), 4, &()).is_err());
}

//! Random rational jets shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rug::Rational;
use tubejet::affine::{rank_one_jet, s_aff_numerator};
use tubejet::cr::{hessian_equation, w_aff_equation};
use tubejet::diffalg::System;
use tubejet::expr::{eval_jet, parse};
use tubejet::space::VarSpace;
use tubejet::Jet;

pub type Q = Rational;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Numerator in `[-9, 9]`, denominator in `[1, 5]`.
pub fn small(rg: &mut ChaCha8Rng) -> Q {
    Q::from((rg.gen_range(-9i64..=9), rg.gen_range(1i64..=5)))
}

pub fn nonzero(rg: &mut ChaCha8Rng) -> Q {
    loop {
        let q = small(rg);
        if q != 0 {
            return q;
        }
    }
}

pub fn zero_base(n: usize) -> Vec<Q> {
    vec![Q::new(); n]
}

pub fn j1(text: &str, order: u32) -> Jet<Q> {
    eval_jet(&parse(text).unwrap(), &["x".into()], &zero_base(1), order, &()).unwrap()
}

pub fn j2(text: &str, order: u32) -> Jet<Q> {
    eval_jet(&parse(text).unwrap(), &["x".into(), "y".into()], &zero_base(2), order, &()).unwrap()
}

/// Random curve jet at the origin with `F_xx != 0`.
pub fn random_curve(rg: &mut ChaCha8Rng, order: u32) -> Jet<Q> {
    let space = VarSpace::new(&["x"], order);
    Jet::from_fn(space, order, zero_base(1), (), |m| if m[0] == 2 { nonzero(rg) } else { small(rg) })
}

/// Random surface jet at the origin with `F_xx != 0`.
pub fn random_surface(rg: &mut ChaCha8Rng, order: u32) -> Jet<Q> {
    let space = VarSpace::new(&["x", "y"], order);
    Jet::from_fn(space, order, zero_base(2), (), |m| if m == [2, 0] { nonzero(rg) } else { small(rg) })
}

/// Random rank-one Hessian surface jet with `F_xx != 0` and
/// `F_xx F_xxy - F_xy F_xxx != 0` at the origin.
pub fn random_rank_one(rg: &mut ChaCha8Rng, order: u32) -> Jet<Q> {
    loop {
        let f0: Vec<Q> = (0..=order).map(|i| if i == 2 { nonzero(rg) } else { small(rg) }).collect();
        let f1: Vec<Q> = (0..order).map(|_| small(rg)).collect();
        let f = rank_one_jet(&f0, &f1, order, &()).unwrap();
        if *s_aff_numerator(&f).unwrap().constant_term() != 0 {
            return f;
        }
    }
}

/// Random jet on which both the Hessian and the `W_aff` numerator vanish
/// identically, from random parametric data.
pub fn random_w_flat(rg: &mut ChaCha8Rng, order: u32) -> Jet<Q> {
    loop {
        let mut sys = System::new(vec![hessian_equation(), w_aff_equation()]);
        let f = sys.solve_jet(&["x", "y"], order, |v| if v == (2, 0) { nonzero(rg) } else { small(rg) });
        if let Ok(f) = f {
            if *s_aff_numerator(&f).unwrap().constant_term() != 0 {
                return f;
            }
        }
    }
}

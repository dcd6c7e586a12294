//! JSON form of jets:
//! `{"vars": [...], "order": N, "base": {"x": "0", ...}, "coeffs": {"2,0": "1/2", ...}}`.
//!
//! Scalars travel as strings: `p/q` for exact values, decimal for floats.
//! Coefficients are written densely in graded-lex order; missing keys read as 0.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::space::{format_key, parse_key, VarSpace};

pub fn scalar_to_json<S: Scalar>(s: &S) -> Value {
    Value::String(s.to_string())
}

pub fn scalar_from_json<S: Scalar>(ctx: &S::Ctx, v: &Value) -> Result<S> {
    match v {
        Value::String(s) => S::parse(ctx, s),
        Value::Number(n) => S::parse(ctx, &n.to_string()),
        other => Err(Error::Invalid(format!("expected a number string, got {other}"))),
    }
}

/// Coefficient table keyed by comma-joined exponents.
pub fn coeffs_to_json<S: Scalar>(jet: &Jet<S>) -> Value {
    let mut map = Map::new();
    for (i, c) in jet.coeffs().iter().enumerate() {
        map.insert(format_key(jet.space().monomial(i)), scalar_to_json(c));
    }
    Value::Object(map)
}

pub fn jet_to_json<S: Scalar>(jet: &Jet<S>) -> Value {
    let base: Map<String, Value> = jet
        .vars()
        .iter()
        .zip(jet.base())
        .map(|(v, b)| (v.clone(), scalar_to_json(b)))
        .collect();
    json!({
        "vars": jet.vars(),
        "order": jet.order(),
        "base": base,
        "coeffs": coeffs_to_json(jet),
    })
}

pub fn jet_from_json<S: Scalar>(value: &Value, ctx: &S::Ctx) -> Result<Jet<S>> {
    let bad = |m: &str| Error::Invalid(format!("jet JSON: {m}"));
    let vars: Vec<String> = value
        .get("vars")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `vars` array"))?
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("variable names must be strings")))
        .collect::<Result<_>>()?;
    let order = value
        .get("order")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("missing non-negative `order`"))? as u32;
    let base_obj = value.get("base").and_then(Value::as_object);
    let mut base = Vec::with_capacity(vars.len());
    for v in &vars {
        let b = match base_obj.and_then(|m| m.get(v)) {
            Some(x) => scalar_from_json::<S>(ctx, x)?,
            None => S::zero(ctx),
        };
        base.push(b);
    }
    let space = VarSpace::new(&vars, order);
    let mut jet = Jet::zero(space, order, base, ctx.clone());
    if let Some(coeffs) = value.get("coeffs").and_then(Value::as_object) {
        for (k, c) in coeffs {
            let m = parse_key(k, vars.len()).ok_or_else(|| bad(&format!("bad exponent key `{k}`")))?;
            if crate::space::degree(&m) > order {
                return Err(bad(&format!("coefficient `{k}` lies above order {order}")));
            }
            jet.set_coeff(&m, scalar_from_json(ctx, c)?);
        }
    }
    Ok(jet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::{Float, Rational};

    #[test]
    fn exact_round_trip() {
        let s = VarSpace::new(&["x", "y"], 3);
        let mut j = Jet::<Rational>::zero(s, 3, vec![Rational::new(), Rational::from((1, 2))], ());
        j.set_coeff(&[2, 0], Rational::from((-3, 7)));
        j.set_coeff(&[1, 2], Rational::from(5));
        let v = jet_to_json(&j);
        assert_eq!(v["coeffs"]["2,0"], "-3/7");
        assert_eq!(v["base"]["y"], "1/2");
        assert_eq!(jet_from_json::<Rational>(&v, &()).unwrap(), j);
    }

    #[test]
    fn sparse_input_and_decimals() {
        let v = serde_json::json!({"vars": ["x"], "order": 2, "coeffs": {"2": "0.25"}});
        let j = jet_from_json::<Rational>(&v, &()).unwrap();
        assert_eq!(j.coeff(&[2]), Rational::from((1, 4)));
        assert_eq!(j.coeff(&[1]), 0);
        let bad = serde_json::json!({"vars": ["x"], "order": 1, "coeffs": {"2": "1"}});
        assert!(jet_from_json::<Rational>(&bad, &()).is_err());
    }

    #[test]
    fn float_round_trip() {
        let s = VarSpace::new(&["x"], 2);
        let c = Float::with_val(256, 1) / 3u32;
        let c: Float = c;
        let j = Jet::from_coeffs(s, 2, vec![Float::with_val(256, -1)], vec![c.clone(), c.clone(), c], 256);
        let back = jet_from_json::<Float>(&jet_to_json(&j), &256).unwrap();
        assert_eq!(back, j);
    }
}

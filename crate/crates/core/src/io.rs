//! JSON formats and canonical digests.
//!
//! Matrices are `{"dim": d, "rows": [[[re, im], ...], ...]}` in row-major
//! order. Sums are `{"dim": d, "terms": [{"sign": -1, "a": rows, "b": rows}, ...]}`
//! where `sign` is optional and defaults to `1`.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hs::HSMatrix;
use crate::linalg::{c, C64};
use crate::posdecomp::{Sign, SignedLRSum, SignedTerm};
use crate::superop::LRSum;

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

pub fn parse(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| schema(format!("malformed JSON: {e}")))
}

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn parse_complex(v: &Value) -> Result<C64> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| schema("complex entries must be [re, im] pairs"))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| schema("complex parts must be numbers"))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| schema("complex parts must be numbers"))?;
    Ok(c(re, im))
}

pub fn rows_json(m: &HSMatrix) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|row| Value::Array(row.into_iter().map(complex_json).collect()))
            .collect(),
    )
}

pub fn matrix_json(m: &HSMatrix) -> Value {
    json!({ "dim": m.dim(), "rows": rows_json(m) })
}

/// Rows of a `d × d` matrix; `dim` is the expected size when known.
pub fn parse_rows(v: &Value, dim: Option<usize>) -> Result<HSMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| schema("rows must be an array"))?;
    if let Some(d) = dim {
        if rows.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rows.len(),
            });
        }
    }
    let d = rows.len();
    let mut out = Vec::with_capacity(d);
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| schema("each row must be an array"))?;
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        out.push(row.iter().map(parse_complex).collect::<Result<Vec<_>>>()?);
    }
    HSMatrix::from_rows(&out)
}

pub fn parse_dim(v: &Value) -> Result<usize> {
    v.get("dim")
        .and_then(Value::as_u64)
        .filter(|&d| d >= 1)
        .map(|d| d as usize)
        .ok_or_else(|| schema("\"dim\" must be a positive integer"))
}

pub fn parse_matrix(v: &Value) -> Result<HSMatrix> {
    let d = parse_dim(v)?;
    parse_rows(
        v.get("rows").ok_or_else(|| schema("missing \"rows\""))?,
        Some(d),
    )
}

/// The sum object of `v`: `v["terms_out"]` when `v` is a previous report,
/// otherwise `v` itself.
pub fn sum_object(v: &Value) -> &Value {
    match v.get("terms_out") {
        Some(inner) if inner.is_object() => inner,
        _ => v,
    }
}

pub fn parse_signed(v: &Value) -> Result<SignedLRSum> {
    let v = sum_object(v);
    let d = parse_dim(v)?;
    let terms = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("\"terms\" must be an array"))?;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let sign = match t.get("sign") {
            None => Sign::Plus,
            Some(s) => match s.as_f64() {
                Some(1.0) => Sign::Plus,
                Some(-1.0) => Sign::Minus,
                _ => return Err(schema("\"sign\" must be 1 or -1")),
            },
        };
        let a = parse_rows(
            t.get("a").ok_or_else(|| schema("term without \"a\""))?,
            Some(d),
        )?;
        let b = parse_rows(
            t.get("b").ok_or_else(|| schema("term without \"b\""))?,
            Some(d),
        )?;
        out.push(SignedTerm { sign, a, b });
    }
    SignedLRSum::new(d, out)
}

/// A sum with the signs folded into the left factors.
pub fn parse_lrsum(v: &Value) -> Result<LRSum> {
    Ok(parse_signed(v)?.to_lrsum())
}

pub fn signed_json(s: &SignedLRSum) -> Value {
    let terms = s
        .terms()
        .iter()
        .map(|t| {
            let mut obj = Map::new();
            if t.sign == Sign::Minus {
                obj.insert("sign".into(), json!(-1));
            }
            obj.insert("a".into(), rows_json(&t.a));
            obj.insert("b".into(), rows_json(&t.b));
            Value::Object(obj)
        })
        .collect();
    json!({ "dim": s.dim(), "terms": Value::Array(terms) })
}

pub fn lrsum_json(s: &LRSum) -> Value {
    signed_json(&SignedLRSum::from_lrsum(s))
}

/// Canonical text: sorted keys, no whitespace, every number printed as the
/// shortest round-trip `f64`.
pub fn canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            out.push_str(&format!("{x:?}"));
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Hex SHA-256 of [`canonical_string`].
pub fn canonical_digest(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical_string(v).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_and_integer_formatting_do_not_change_digest() {
        let a = parse(r#"{"dim":1,"rows":[[[1,0]]]}"#).unwrap();
        let b = parse("{ \"rows\" : [ [ [1.0, 0.0] ] ],\n  \"dim\": 1 }").unwrap();
        assert_eq!(canonical_digest(&a), canonical_digest(&b));
        let c = parse(r#"{"dim":1,"rows":[[[1.000000000000001,0]]]}"#).unwrap();
        assert_ne!(canonical_digest(&a), canonical_digest(&c));
    }

    #[test]
    fn signed_round_trip() {
        let text = r#"{"dim":2,"terms":[{"sign":-1,"a":[[[1,0],[0,0]],[[0,0],[1,0]]],"b":[[[2,0],[0,1]],[[0,-1],[2,0]]]},{"a":[[[1,0],[0,0]],[[0,0],[0,0]]],"b":[[[1,0],[0,0]],[[0,0],[1,0]]]}]}"#;
        let v = parse(text).unwrap();
        let s = parse_signed(&v).unwrap();
        assert!(s.has_negative_lead());
        assert_eq!(canonical_string(&signed_json(&s)), canonical_string(&v));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse("{"), Err(Error::Schema(_))));
        let v = parse(r#"{"dim":2,"rows":[[[1,0]]]}"#).unwrap();
        assert!(matches!(
            parse_matrix(&v),
            Err(Error::DimensionMismatch { .. })
        ));
        let v = parse(r#"{"dim":1,"rows":[[[1]]]}"#).unwrap();
        assert!(matches!(parse_matrix(&v), Err(Error::Schema(_))));
        let v = parse(r#"{"dim":1,"terms":[{"sign":2,"a":[[[1,0]]],"b":[[[1,0]]]}]}"#).unwrap();
        assert!(matches!(parse_signed(&v), Err(Error::Schema(_))));
    }

    #[test]
    fn report_input_is_unwrapped() {
        let v = parse(
            r#"{"command":"x","terms_out":{"dim":1,"terms":[{"a":[[[2,0]]],"b":[[[3,0]]]}]}}"#,
        )
        .unwrap();
        let s = parse_lrsum(&v).unwrap();
        assert_eq!(s.len(), 1);
    }
}

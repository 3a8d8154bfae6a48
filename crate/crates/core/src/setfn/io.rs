//! JSON instance files.
//!
//! ```json
//! {"n": 2,
//!  "set_function": {"kind": "explicit", "values": [0, 1, 1, "3/2"]},
//!  "c": [2, 1], "d": ["2/5", "7/10"]}
//! ```
//!
//! Cut functions use `{"kind": "cut", "nodes": N, "edges": [[u, v, cap], ...],
//! "source": s, "sink": t}`; the ground elements are the remaining nodes in
//! ascending order. Entries of `d` may be `"inf"` for unbounded sides.
//!
//! A cut function read as a rank function is normalized to
//! `cut(A) - cut(∅)`; see [`InstanceFile::rank_oracle`].

use super::{CutGraph, OracleKind, SetFnError, SetFunctionOracle};
use crate::rational::{fmt_rational, parse_rational, Rational};
use num_bigint::BigInt;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceFormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{0}` is missing")]
    Missing(&'static str),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    SetFn(#[from] SetFnError),
}

fn field_err(field: &str, message: impl Into<String>) -> InstanceFormatError {
    InstanceFormatError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

/// A numeric entry: exact rational or unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NumberField {
    Finite(Rational),
    Infinite,
}

impl NumberField {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            NumberField::Finite(r) => Some(r),
            NumberField::Infinite => None,
        }
    }
}

fn parse_number(v: &Value, field: &str) -> Result<NumberField, InstanceFormatError> {
    match v {
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                Ok(NumberField::Finite(Rational::from_integer(BigInt::from(i))))
            } else {
                Err(field_err(field, format!("{num} is not an integer; write fractions as \"p/q\"")))
            }
        }
        Value::String(s) if s == "inf" || s == "+inf" || s == "∞" => Ok(NumberField::Infinite),
        Value::String(s) => parse_rational(s)
            .map(NumberField::Finite)
            .map_err(|e| field_err(field, e.to_string())),
        other => Err(field_err(field, format!("unexpected value {other}"))),
    }
}

fn parse_finite(v: &Value, field: &str) -> Result<Rational, InstanceFormatError> {
    match parse_number(v, field)? {
        NumberField::Finite(r) => Ok(r),
        NumberField::Infinite => Err(field_err(field, "must be finite")),
    }
}

fn number_json(r: &Rational) -> Value {
    if r.is_integer() {
        if let Ok(i) = r.to_integer().to_string().parse::<i64>() {
            return json!(i);
        }
    }
    Value::String(fmt_rational(r))
}

fn parse_usize(v: Option<&Value>, field: &'static str) -> Result<usize, InstanceFormatError> {
    v.ok_or(InstanceFormatError::Missing(field))?
        .as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| field_err(field, "expected a nonnegative integer"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetFunctionSpec {
    Explicit(Vec<Rational>),
    Cut(CutGraph),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub n: usize,
    pub set_function: SetFunctionSpec,
    pub c: Option<Vec<NumberField>>,
    pub d: Option<Vec<NumberField>>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, InstanceFormatError> {
        let root: Value = serde_json::from_str(text)?;
        let obj = root
            .as_object()
            .ok_or_else(|| field_err("<root>", "expected an object"))?;
        let n = parse_usize(obj.get("n"), "n")?;
        let sf = obj
            .get("set_function")
            .ok_or(InstanceFormatError::Missing("set_function"))?;
        let kind = sf
            .get("kind")
            .and_then(Value::as_str)
            .ok_or(InstanceFormatError::Missing("set_function.kind"))?;
        let set_function = match kind {
            "explicit" => {
                let values = sf
                    .get("values")
                    .and_then(Value::as_array)
                    .ok_or(InstanceFormatError::Missing("set_function.values"))?;
                let values = values
                    .iter()
                    .map(|v| parse_finite(v, "set_function.values"))
                    .collect::<Result<Vec<_>, _>>()?;
                if n >= 32 || values.len() != 1usize << n {
                    return Err(field_err(
                        "set_function.values",
                        format!("expected 2^{n} entries, found {}", values.len()),
                    ));
                }
                SetFunctionSpec::Explicit(values)
            }
            "cut" => {
                let nodes = parse_usize(sf.get("nodes"), "set_function.nodes")?;
                let source = parse_usize(sf.get("source"), "set_function.source")?;
                let sink = parse_usize(sf.get("sink"), "set_function.sink")?;
                let edges = sf
                    .get("edges")
                    .and_then(Value::as_array)
                    .ok_or(InstanceFormatError::Missing("set_function.edges"))?;
                let mut parsed = Vec::with_capacity(edges.len());
                for e in edges {
                    let triple = e
                        .as_array()
                        .filter(|t| t.len() == 3)
                        .ok_or_else(|| field_err("set_function.edges", "edges are [u, v, cap]"))?;
                    let u = parse_usize(Some(&triple[0]), "set_function.edges")?;
                    let v = parse_usize(Some(&triple[1]), "set_function.edges")?;
                    let cap = parse_finite(&triple[2], "set_function.edges")?;
                    parsed.push((u, v, cap));
                }
                let graph = CutGraph::new(nodes, parsed, source, sink)?;
                if graph.elements() != n {
                    return Err(field_err(
                        "n",
                        format!("cut graph has {} non-terminal nodes", graph.elements()),
                    ));
                }
                SetFunctionSpec::Cut(graph)
            }
            other => {
                return Err(field_err("set_function.kind", format!("unknown kind {other:?}")))
            }
        };
        let vector = |name: &'static str| -> Result<Option<Vec<NumberField>>, InstanceFormatError> {
            match obj.get(name) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::Array(items)) => {
                    if items.len() != n {
                        return Err(field_err(name, format!("expected {n} entries")));
                    }
                    items
                        .iter()
                        .map(|v| parse_number(v, name))
                        .collect::<Result<Vec<_>, _>>()
                        .map(Some)
                }
                Some(_) => Err(field_err(name, "expected an array")),
            }
        };
        Ok(InstanceFile {
            n,
            set_function,
            c: vector("c")?,
            d: vector("d")?,
        })
    }

    /// The raw oracle: tables as given, cut functions unnormalized.
    pub fn oracle(&self) -> Result<SetFunctionOracle, SetFnError> {
        match &self.set_function {
            SetFunctionSpec::Explicit(values) => SetFunctionOracle::explicit(self.n, values.clone()),
            SetFunctionSpec::Cut(graph) => SetFunctionOracle::cut(graph.clone()),
        }
    }

    /// The oracle as a rank function: cut functions shifted to vanish on ∅.
    pub fn rank_oracle(&self) -> Result<SetFunctionOracle, SetFnError> {
        let raw = self.oracle()?;
        match &self.set_function {
            SetFunctionSpec::Explicit(_) => Ok(raw),
            SetFunctionSpec::Cut(_) => super::contraction(&std::sync::Arc::new(raw), super::Subset::EMPTY),
        }
    }

    /// Builds the file representation of an oracle, when it has one.
    pub fn from_oracle(
        oracle: &SetFunctionOracle,
        c: Option<&[Rational]>,
        d: Option<&[Rational]>,
    ) -> Result<Self, SetFnError> {
        let n = oracle.n();
        let set_function = match oracle.cut_graph() {
            Some(graph) => SetFunctionSpec::Cut(graph.clone()),
            None => match oracle.kind() {
                OracleKind::ExplicitTable(values) => SetFunctionSpec::Explicit(values.clone()),
                _ => SetFunctionSpec::Explicit(SetFunctionOracle::tabulate(n, oracle).map(
                    |t| match t.kind {
                        OracleKind::ExplicitTable(v) => v,
                        _ => unreachable!(),
                    },
                )?),
            },
        };
        let wrap = |v: &[Rational]| v.iter().cloned().map(NumberField::Finite).collect();
        Ok(InstanceFile {
            n,
            set_function,
            c: c.map(wrap),
            d: d.map(wrap),
        })
    }

    pub fn to_json(&self) -> String {
        let sf = match &self.set_function {
            SetFunctionSpec::Explicit(values) => json!({
                "kind": "explicit",
                "values": values.iter().map(number_json).collect::<Vec<_>>(),
            }),
            SetFunctionSpec::Cut(graph) => json!({
                "kind": "cut",
                "nodes": graph.nodes(),
                "edges": graph
                    .edges()
                    .iter()
                    .map(|(u, v, cap)| json!([u, v, number_json(cap)]))
                    .collect::<Vec<_>>(),
                "source": graph.source(),
                "sink": graph.sink(),
            }),
        };
        let vec_json = |v: &Vec<NumberField>| {
            Value::Array(
                v.iter()
                    .map(|x| match x {
                        NumberField::Finite(r) => number_json(r),
                        NumberField::Infinite => Value::String("inf".into()),
                    })
                    .collect(),
            )
        };
        let mut root = json!({ "n": self.n, "set_function": sf });
        if let Some(c) = &self.c {
            root["c"] = vec_json(c);
        }
        if let Some(d) = &self.d {
            root["d"] = vec_json(d);
        }
        serde_json::to_string_pretty(&root).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use crate::setfn::{SetFunction, Subset};

    #[test]
    fn parses_explicit_instance() {
        let text = r#"{"n": 2, "set_function": {"kind": "explicit", "values": [0, 1, 1, "3/2"]},
                       "c": [2, 1], "d": ["2/5", "0.7"]}"#;
        let inst = InstanceFile::parse(text).unwrap();
        let f = inst.oracle().unwrap();
        assert_eq!(f.eval(Subset::full(2)), rat(3, 2));
        assert_eq!(
            inst.d.unwrap(),
            vec![NumberField::Finite(rat(2, 5)), NumberField::Finite(rat(7, 10))]
        );
    }

    #[test]
    fn parses_cut_instance() {
        let text = r#"{"n": 2, "set_function": {"kind": "cut", "nodes": 4,
            "edges": [[2,0,3],[0,3,2],[2,1,1],[1,3,4],[0,1,1]], "source": 2, "sink": 3}}"#;
        let inst = InstanceFile::parse(text).unwrap();
        let f = inst.oracle().unwrap();
        assert_eq!(f.eval(Subset::EMPTY), int(4));
        assert_eq!(f.eval(Subset::singleton(1)), int(7));
        let again = InstanceFile::parse(&inst.to_json()).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(InstanceFile::parse("{").is_err());
        assert!(matches!(
            InstanceFile::parse(r#"{"n": 2, "set_function": {"kind": "explicit", "values": [0, 1]}}"#),
            Err(InstanceFormatError::Field { .. })
        ));
        assert!(matches!(
            InstanceFile::parse(r#"{"n": 1, "set_function": {"kind": "explicit", "values": [0, 0.5]}}"#),
            Err(InstanceFormatError::Field { .. })
        ));
        assert!(matches!(
            InstanceFile::parse(r#"{"n": 1}"#),
            Err(InstanceFormatError::Missing("set_function"))
        ));
    }

    #[test]
    fn infinite_side_bounds() {
        let text = r#"{"n": 1, "set_function": {"kind": "explicit", "values": [0, 1]}, "d": ["inf"]}"#;
        let inst = InstanceFile::parse(text).unwrap();
        assert_eq!(inst.d.unwrap(), vec![NumberField::Infinite]);
    }
}

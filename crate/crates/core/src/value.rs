//! Serialized runtime values: the on-disk shape of captured function I/O.
//!
//! A value is one of `prim`, `ptr`, `struct`, `fnptr`, or `null`. Pointer
//! payloads hold the dereferenced elements of the whole backing allocation;
//! aliasing between pointers inside one snapshot is preserved through shared
//! `alias_group` ids.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Scalar payload. Integers and floats are kept apart so char/int payloads
/// round-trip exactly; the `type` field on the enclosing value disambiguates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrimVal {
    Int(i64),
    Float(f64),
}

impl PrimVal {
    pub fn as_f64(&self) -> f64 {
        match self {
            PrimVal::Int(v) => *v as f64,
            PrimVal::Float(v) => *v,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            PrimVal::Int(v) => Some(*v),
            PrimVal::Float(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub name: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Value {
    Prim {
        #[serde(rename = "type")]
        ty: String,
        payload: PrimVal,
    },
    Ptr {
        #[serde(rename = "type")]
        ty: String,
        payload: Vec<Value>,
        count: u64,
        alias_group: u64,
    },
    Struct {
        #[serde(rename = "type")]
        ty: String,
        payload: Vec<FieldValue>,
    },
    Fnptr {
        #[serde(rename = "type")]
        ty: String,
        payload: String,
    },
    Null {
        #[serde(rename = "type")]
        ty: String,
    },
}

impl Value {
    pub fn int(ty: &str, v: i64) -> Value {
        Value::Prim {
            ty: ty.to_string(),
            payload: PrimVal::Int(v),
        }
    }

    pub fn float(ty: &str, v: f64) -> Value {
        Value::Prim {
            ty: ty.to_string(),
            payload: PrimVal::Float(v),
        }
    }

    pub fn void() -> Value {
        Value::Prim {
            ty: "void".to_string(),
            payload: PrimVal::Int(0),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Prim { .. } => "prim",
            Value::Ptr { .. } => "ptr",
            Value::Struct { .. } => "struct",
            Value::Fnptr { .. } => "fnptr",
            Value::Null { .. } => "null",
        }
    }

    /// Renumber alias groups in first-encounter DFS order. Two snapshots are
    /// structurally equal — including sharing topology — iff their canonical
    /// forms are equal.
    pub fn canonicalize_groups(values: &[Value]) -> Vec<Value> {
        let mut mapping: alloc::collections::BTreeMap<u64, u64> = alloc::collections::BTreeMap::new();
        let mut next = 0u64;
        fn walk(
            v: &Value,
            mapping: &mut alloc::collections::BTreeMap<u64, u64>,
            next: &mut u64,
        ) -> Value {
            match v {
                Value::Ptr {
                    ty,
                    payload,
                    count,
                    alias_group,
                } => {
                    let g = *mapping.entry(*alias_group).or_insert_with(|| {
                        let g = *next;
                        *next += 1;
                        g
                    });
                    Value::Ptr {
                        ty: ty.clone(),
                        payload: payload.iter().map(|p| walk(p, mapping, next)).collect(),
                        count: *count,
                        alias_group: g,
                    }
                }
                Value::Struct { ty, payload } => Value::Struct {
                    ty: ty.clone(),
                    payload: payload
                        .iter()
                        .map(|f| FieldValue {
                            name: f.name.clone(),
                            value: walk(&f.value, mapping, next),
                        })
                        .collect(),
                },
                other => other.clone(),
            }
        }
        values.iter().map(|v| walk(v, &mut mapping, &mut next)).collect()
    }

    /// Structural equality of two snapshots up to alias-group renumbering.
    pub fn snapshots_equal(a: &[Value], b: &[Value]) -> bool {
        Value::canonicalize_groups(a) == Value::canonicalize_groups(b)
    }
}

/// One localized difference between an expected and an actual value tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub path: String,
    pub expected: String,
    pub actual: String,
}

/// Minimal-subtree diff between expected and actual snapshots (already
/// canonicalized by the caller when sharing matters). Each reported path
/// points at a subtree that is a leaf or whose children all match.
pub fn diff_snapshots(expected: &[Value], actual: &[Value]) -> Vec<DiffEntry> {
    let mut out = Vec::new();
    if expected.len() != actual.len() {
        out.push(DiffEntry {
            path: "$".to_string(),
            expected: format!("{} values", expected.len()),
            actual: format!("{} values", actual.len()),
        });
        return out;
    }
    for (i, (e, a)) in expected.iter().zip(actual.iter()).enumerate() {
        diff_value(&format!("$[{i}]"), e, a, &mut out);
    }
    out
}

fn diff_value(path: &str, expected: &Value, actual: &Value, out: &mut Vec<DiffEntry>) {
    if expected == actual {
        return;
    }
    match (expected, actual) {
        (
            Value::Ptr {
                ty: t1,
                payload: p1,
                count: c1,
                alias_group: g1,
            },
            Value::Ptr {
                ty: t2,
                payload: p2,
                count: c2,
                alias_group: g2,
            },
        ) if t1 == t2 && c1 == c2 && g1 == g2 && p1.len() == p2.len() => {
            for (i, (e, a)) in p1.iter().zip(p2.iter()).enumerate() {
                diff_value(&format!("{path}.payload[{i}]"), e, a, out);
            }
        }
        (Value::Struct { ty: t1, payload: p1 }, Value::Struct { ty: t2, payload: p2 })
            if t1 == t2
                && p1.len() == p2.len()
                && p1.iter().zip(p2.iter()).all(|(a, b)| a.name == b.name) =>
        {
            for (e, a) in p1.iter().zip(p2.iter()) {
                diff_value(&format!("{path}.{}", e.name), &e.value, &a.value, out);
            }
        }
        _ => out.push(DiffEntry {
            path: path.to_string(),
            expected: render_short(expected),
            actual: render_short(actual),
        }),
    }
}

/// Compact single-line rendering for diff fragments.
pub fn render_short(v: &Value) -> String {
    match v {
        Value::Prim { ty, payload } => match payload {
            PrimVal::Int(i) => format!("{ty}:{i}"),
            PrimVal::Float(f) => format!("{ty}:{f}"),
        },
        Value::Ptr {
            ty,
            payload,
            count,
            alias_group,
        } => {
            let inner: Vec<String> = payload.iter().take(8).map(render_short).collect();
            let ell = if payload.len() > 8 { ", …" } else { "" };
            format!("{ty}#g{alias_group} x{count} [{}{}]", inner.join(", "), ell)
        }
        Value::Struct { ty, payload } => {
            let inner: Vec<String> = payload
                .iter()
                .map(|f| format!("{}: {}", f.name, render_short(&f.value)))
                .collect();
            format!("{ty} {{{}}}", inner.join(", "))
        }
        Value::Fnptr { payload, .. } => format!("fn:{payload}"),
        Value::Null { ty } => format!("null:{ty}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn alias_canonicalization_respects_topology() {
        let shared = |g: u64| Value::Ptr {
            ty: "pointer(float)".into(),
            payload: vec![Value::float("float", 1.0)],
            count: 1,
            alias_group: g,
        };
        // (7,7) and (1,1) have the same topology; (1,2) does not.
        assert!(Value::snapshots_equal(
            &[shared(7), shared(7)],
            &[shared(1), shared(1)]
        ));
        assert!(!Value::snapshots_equal(
            &[shared(1), shared(2)],
            &[shared(3), shared(3)]
        ));
    }

    #[test]
    fn diff_paths_are_minimal() {
        let mk = |v: f64| Value::Ptr {
            ty: "pointer(float)".into(),
            payload: vec![Value::float("float", 1.0), Value::float("float", v)],
            count: 2,
            alias_group: 0,
        };
        let diffs = diff_snapshots(&[mk(2.0)], &[mk(3.0)]);
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].path, "$[0].payload[1]");
        assert_eq!(diffs[0].expected, "float:2");
        assert_eq!(diffs[0].actual, "float:3");
    }

    #[test]
    fn null_has_no_payload_in_json() {
        let v = Value::Null {
            ty: "pointer(int)".into(),
        };
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"kind":"null","type":"pointer(int)"}"#);
    }
}

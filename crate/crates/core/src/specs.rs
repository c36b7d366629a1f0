//! Dynamic property mining: folds instrumented execution traces into
//! per-function specifications (types, per-call sizes, nullability, aliasing)
//! and serialized I/O examples.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::ProgramAst;
use crate::ctype::CType;
use crate::interp::ExecutionTrace;
use crate::value::Value;

/// Serialized snapshot of one observed call: pre-state arguments, post-state
/// arguments, and the return value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoExample {
    pub function: String,
    pub call_id: u64,
    #[serde(rename = "pre")]
    pub pre_args: Vec<Value>,
    #[serde(rename = "post")]
    pub post_args: Vec<Value>,
    #[serde(rename = "ret")]
    pub return_value: Value,
}

/// Unordered argument pair, stored sorted; serialized as `"a,b"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArgPair(pub String, pub String);

impl ArgPair {
    pub fn new(a: &str, b: &str) -> ArgPair {
        if a <= b {
            ArgPair(a.to_string(), b.to_string())
        } else {
            ArgPair(b.to_string(), a.to_string())
        }
    }
}

impl Serialize for ArgPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{},{}", self.0, self.1))
    }
}

impl<'de> Deserialize<'de> for ArgPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<ArgPair, D::Error> {
        let s = String::deserialize(d)?;
        let mut it = s.splitn(2, ',');
        let a = it.next().unwrap_or("").to_string();
        let b = it.next().unwrap_or("").to_string();
        Ok(ArgPair(a, b))
    }
}

/// Aliasing occurrence class. The aggregation lattice joins disagreement to
/// `Some`: Always ⊓ Never is impossible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aliasing {
    Always,
    Some,
    Never,
}

impl Aliasing {
    fn join(self, observed_aliased: bool) -> Aliasing {
        match (self, observed_aliased) {
            (Aliasing::Always, true) => Aliasing::Always,
            (Aliasing::Never, false) => Aliasing::Never,
            _ => Aliasing::Some,
        }
    }

    fn seed(observed_aliased: bool) -> Aliasing {
        if observed_aliased {
            Aliasing::Always
        } else {
            Aliasing::Never
        }
    }
}

/// Aggregated dynamic facts for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub function: String,
    /// Observed argument types (raw allocations typed by their first cast).
    pub type_info: BTreeMap<String, CType>,
    /// Per-call element counts for pointer arguments, context-sensitive.
    pub size_info: Vec<BTreeMap<String, u64>>,
    /// Whether each pointer argument was ever observed null.
    pub null_info: BTreeMap<String, bool>,
    /// Aliasing class per unordered pointer-argument pair.
    pub alias_info: BTreeMap<ArgPair, Aliasing>,
    /// Functions observed bound to each function-pointer argument.
    pub fnptr_bindings: BTreeMap<String, BTreeSet<String>>,
    /// Char-pointer payloads observed NUL-terminated in every call (hint).
    pub nul_terminated: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MineError {
    /// Two traces disagree on an argument's observed type: type punning,
    /// which is out of contract.
    ConflictingTypes { function: String, arg: String },
    NoTraces,
    UnknownFunction(String),
}

impl core::fmt::Display for MineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MineError::ConflictingTypes { function, arg } => {
                write!(f, "conflicting observed types for `{function}` argument `{arg}`")
            }
            MineError::NoTraces => write!(f, "property mining requires at least one trace"),
            MineError::UnknownFunction(n) => write!(f, "trace mentions unknown function `{n}`"),
        }
    }
}

fn param_names<'a>(ast: &'a ProgramAst, function: &str) -> Result<Vec<&'a str>, MineError> {
    ast.function(function)
        .map(|f| f.params.iter().map(|p| p.name.as_str()).collect())
        .ok_or_else(|| MineError::UnknownFunction(function.to_string()))
}

/// Observed per-argument types, aggregated across all calls in all traces.
pub fn mine_type_info(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, BTreeMap<String, CType>>, MineError> {
    if traces.is_empty() {
        return Err(MineError::NoTraces);
    }
    let mut out: BTreeMap<String, BTreeMap<String, CType>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let names = param_names(ast, &ev.io.function)?;
            let entry = out.entry(ev.io.function.clone()).or_default();
            for (name, ty) in names.iter().zip(ev.observed_types.iter()) {
                match entry.get(*name) {
                    None => {
                        entry.insert((*name).to_string(), ty.clone());
                    }
                    Some(prev) if prev == ty => {}
                    Some(_) => {
                        return Err(MineError::ConflictingTypes {
                            function: ev.io.function.clone(),
                            arg: (*name).to_string(),
                        })
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-call pointer sizes (element counts), kept context-sensitive.
pub fn mine_size_info(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, Vec<BTreeMap<String, u64>>>, MineError> {
    let mut out: BTreeMap<String, Vec<BTreeMap<String, u64>>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let names = param_names(ast, &ev.io.function)?;
            let mut per_call = BTreeMap::new();
            for (name, v) in names.iter().zip(ev.io.pre_args.iter()) {
                if let Value::Ptr { count, .. } = v {
                    per_call.insert((*name).to_string(), *count);
                }
            }
            out.entry(ev.io.function.clone()).or_default().push(per_call);
        }
    }
    Ok(out)
}

/// Ever-null flag per pointer argument: OR over all calls in all traces.
pub fn mine_null_info(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, BTreeMap<String, bool>>, MineError> {
    let mut out: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let names = param_names(ast, &ev.io.function)?;
            let entry = out.entry(ev.io.function.clone()).or_default();
            for ((name, ty), v) in names.iter().zip(ev.observed_types.iter()).zip(ev.io.pre_args.iter()) {
                if !ty.is_pointer() {
                    continue;
                }
                let flag = entry.entry((*name).to_string()).or_insert(false);
                *flag |= v.is_null();
            }
        }
    }
    Ok(out)
}

/// Aliasing class per unordered pointer-argument pair. A pair aliases in one
/// call when both arguments resolve to the same live allocation (shared
/// `alias_group` in the pre-state snapshot).
pub fn mine_alias_info(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, BTreeMap<ArgPair, Aliasing>>, MineError> {
    let mut out: BTreeMap<String, BTreeMap<ArgPair, Aliasing>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let names = param_names(ast, &ev.io.function)?;
            let ptr_args: Vec<(usize, &str)> = names
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    ev.observed_types
                        .get(*i)
                        .map(CType::is_pointer)
                        .unwrap_or(false)
                })
                .map(|(i, n)| (i, *n))
                .collect();
            let entry = out.entry(ev.io.function.clone()).or_default();
            for (xi, (i, a)) in ptr_args.iter().enumerate() {
                for (j, b) in ptr_args.iter().skip(xi + 1) {
                    let aliased = match (&ev.io.pre_args[*i], &ev.io.pre_args[*j]) {
                        (
                            Value::Ptr { alias_group: g1, .. },
                            Value::Ptr { alias_group: g2, .. },
                        ) => g1 == g2,
                        _ => false,
                    };
                    let key = ArgPair::new(a, b);
                    let next = match entry.get(&key) {
                        None => Aliasing::seed(aliased),
                        Some(prev) => prev.join(aliased),
                    };
                    entry.insert(key, next);
                }
            }
        }
    }
    Ok(out)
}

/// NUL-termination hint: a char payload is flagged when every observation
/// contains a 0 byte at or before position count-1.
fn mine_nul_hints(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, BTreeMap<String, bool>>, MineError> {
    let mut out: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let names = param_names(ast, &ev.io.function)?;
            let entry = out.entry(ev.io.function.clone()).or_default();
            for ((name, ty), v) in names.iter().zip(ev.observed_types.iter()).zip(ev.io.pre_args.iter()) {
                let is_char_ptr = matches!(
                    ty.pointee(),
                    Some(CType::Primitive { prim }) if matches!(prim, crate::ctype::Prim::Char | crate::ctype::Prim::UChar)
                );
                if !is_char_ptr {
                    continue;
                }
                let terminated = match v {
                    Value::Ptr { payload, .. } => payload.iter().any(|c| {
                        matches!(c, Value::Prim { payload: crate::value::PrimVal::Int(0), .. })
                    }),
                    _ => false,
                };
                match entry.get_mut(*name) {
                    None => {
                        entry.insert((*name).to_string(), terminated);
                    }
                    Some(prev) => *prev &= terminated,
                }
            }
        }
    }
    Ok(out)
}

/// Functions observed bound to each function-pointer argument.
pub fn mine_fnptr_bindings(
    traces: &[ExecutionTrace],
) -> BTreeMap<String, BTreeMap<String, BTreeSet<String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = BTreeMap::new();
    for tr in traces {
        for ev in &tr.calls {
            let entry = out.entry(ev.io.function.clone()).or_default();
            for (arg, bound) in &ev.fnptr_bindings {
                entry.entry(arg.clone()).or_default().insert(bound.clone());
            }
        }
    }
    out
}

/// Flattened per-function binding sets, the shape consumed by the slicer's
/// observed-edge pass.
pub fn fnptr_bindings_flat(traces: &[ExecutionTrace]) -> BTreeMap<String, BTreeSet<String>> {
    mine_fnptr_bindings(traces)
        .into_iter()
        .map(|(f, per_arg)| {
            let all: BTreeSet<String> = per_arg.into_values().flatten().collect();
            (f, all)
        })
        .collect()
}

/// Full mining pass: one `PropertySpec` per traced function.
pub fn mine_specs(
    ast: &ProgramAst,
    traces: &[ExecutionTrace],
) -> Result<BTreeMap<String, PropertySpec>, MineError> {
    if traces.is_empty() {
        return Err(MineError::NoTraces);
    }
    let types = mine_type_info(ast, traces)?;
    let sizes = mine_size_info(ast, traces)?;
    let nulls = mine_null_info(ast, traces)?;
    let aliases = mine_alias_info(ast, traces)?;
    let bindings = mine_fnptr_bindings(traces);
    let nuls = mine_nul_hints(ast, traces)?;
    let mut out = BTreeMap::new();
    for (function, type_info) in types {
        let spec = PropertySpec {
            function: function.clone(),
            type_info,
            size_info: sizes.get(&function).cloned().unwrap_or_default(),
            null_info: nulls.get(&function).cloned().unwrap_or_default(),
            alias_info: aliases.get(&function).cloned().unwrap_or_default(),
            fnptr_bindings: bindings.get(&function).cloned().unwrap_or_default(),
            nul_terminated: nuls.get(&function).cloned().unwrap_or_default(),
        };
        out.insert(function, spec);
    }
    Ok(out)
}

/// All I/O examples for one function across traces, in capture order.
pub fn examples_for(traces: &[ExecutionTrace], function: &str) -> Vec<IoExample> {
    let mut out = Vec::new();
    for tr in traces {
        for ev in &tr.calls {
            if ev.io.function == function {
                out.push(ev.io.clone());
            }
        }
    }
    out
}

//! Serialization between runtime values and the on-disk `Value` model, plus
//! the reverse materialization used to seed entry inputs and replay records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::StructDef;
use crate::ctype::{CType, Prim};
use crate::interp::memory::{AllocId, BoundsTable, Region, RtVal};
use crate::value::{FieldValue, PrimVal, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum SerializeError {
    /// Pointer into freed or unknown memory, interior pointer, or a cycle.
    Unserializable(String),
}

impl core::fmt::Display for SerializeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SerializeError::Unserializable(m) => write!(f, "unserializable value: {m}"),
        }
    }
}

/// Alias-group numbering scope: one per serialized snapshot.
#[derive(Debug, Default)]
pub struct SnapshotScope {
    groups: BTreeMap<AllocId, u64>,
    next: u64,
}

impl SnapshotScope {
    pub fn new() -> SnapshotScope {
        SnapshotScope::default()
    }

    fn group_for(&mut self, id: AllocId) -> u64 {
        *self.groups.entry(id).or_insert_with(|| {
            let g = self.next;
            self.next += 1;
            g
        })
    }
}

pub fn serialize_rt(
    val: &RtVal,
    mem: &BoundsTable,
    structs: &BTreeMap<String, StructDef>,
    scope: &mut SnapshotScope,
) -> Result<Value, SerializeError> {
    let mut path: Vec<AllocId> = Vec::new();
    serialize_inner(val, mem, structs, scope, &mut path)
}

fn serialize_inner(
    val: &RtVal,
    mem: &BoundsTable,
    structs: &BTreeMap<String, StructDef>,
    scope: &mut SnapshotScope,
    path: &mut Vec<AllocId>,
) -> Result<Value, SerializeError> {
    match val {
        RtVal::Int { v, ty } => Ok(Value::int(ty.name(), *v)),
        RtVal::Float { v, ty } => Ok(Value::float(ty.name(), *v)),
        RtVal::Void => Ok(Value::void()),
        RtVal::Fn { name } => Ok(Value::Fnptr {
            ty: "function".to_string(),
            payload: name.clone(),
        }),
        RtVal::Null { ty } => Ok(Value::Null {
            ty: CType::ptr(ty.clone()).render(),
        }),
        RtVal::StructV { tag, fields } => {
            let def = structs
                .get(tag)
                .ok_or_else(|| SerializeError::Unserializable(format!("unknown struct `{tag}`")))?;
            let mut payload = Vec::new();
            for (f, v) in def.fields.iter().zip(fields.iter()) {
                payload.push(FieldValue {
                    name: f.name.clone(),
                    value: serialize_inner(v, mem, structs, scope, path)?,
                });
            }
            Ok(Value::Struct {
                ty: tag.clone(),
                payload,
            })
        }
        RtVal::Ptr { alloc, offset, .. } => {
            let rec = mem.record(*alloc).ok_or_else(|| {
                SerializeError::Unserializable("pointer to unknown allocation".to_string())
            })?;
            if rec.freed {
                return Err(SerializeError::Unserializable(
                    "pointer to freed allocation".to_string(),
                ));
            }
            if *offset != 0 {
                return Err(SerializeError::Unserializable(
                    "interior pointer escapes a call boundary".to_string(),
                ));
            }
            if path.contains(alloc) {
                return Err(SerializeError::Unserializable(
                    "cyclic object graph".to_string(),
                ));
            }
            let group = scope.group_for(*alloc);
            path.push(*alloc);
            let mut payload = Vec::new();
            for cell in &rec.cells {
                payload.push(serialize_inner(cell, mem, structs, scope, path)?);
            }
            path.pop();
            Ok(Value::Ptr {
                ty: CType::ptr(rec.element_type.clone()).render(),
                payload,
                count: rec.element_count,
                alias_group: group,
            })
        }
    }
}

/// Materialization scope: alias groups map to shared allocations.
#[derive(Debug, Default)]
pub struct MaterializeScope {
    by_group: BTreeMap<u64, AllocId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterializeError(pub String);

impl core::fmt::Display for MaterializeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "cannot materialize value: {}", self.0)
    }
}

/// Build a runtime value of declared type `ty` from a serialized `Value`,
/// allocating backing records. Values sharing an `alias_group` within one
/// scope share one allocation.
pub fn materialize(
    value: &Value,
    ty: &CType,
    mem: &mut BoundsTable,
    structs: &BTreeMap<String, StructDef>,
    scope: &mut MaterializeScope,
) -> Result<RtVal, MaterializeError> {
    match (value, ty) {
        (Value::Prim { payload, .. }, CType::Primitive { prim }) => Ok(match payload {
            PrimVal::Int(v) if prim.is_float() => RtVal::Float {
                v: *v as f64,
                ty: *prim,
            },
            PrimVal::Int(v) => RtVal::Int { v: *v, ty: *prim },
            PrimVal::Float(v) => {
                if prim.is_float() {
                    RtVal::Float { v: *v, ty: *prim }
                } else {
                    return Err(MaterializeError(format!(
                        "float payload for integer type {}",
                        prim.name()
                    )));
                }
            }
        }),
        (Value::Null { .. }, CType::Pointer { inner }) => Ok(RtVal::Null {
            ty: (**inner).clone(),
        }),
        (Value::Fnptr { payload, .. }, CType::FunctionPointer { .. }) => Ok(RtVal::Fn {
            name: payload.clone(),
        }),
        (
            Value::Ptr {
                payload,
                count,
                alias_group,
                ..
            },
            CType::Pointer { inner },
        ) => {
            if let Some(id) = scope.by_group.get(alias_group) {
                return Ok(RtVal::Ptr {
                    alloc: *id,
                    offset: 0,
                    ty: (**inner).clone(),
                });
            }
            let elem_size = elem_size_of(inner, structs)
                .ok_or_else(|| MaterializeError("unsized element type".to_string()))?;
            let zero = zero_value(inner, structs)
                .ok_or_else(|| MaterializeError("cannot zero element type".to_string()))?;
            let id = mem.allocate((**inner).clone(), *count, elem_size, Region::Heap, zero);
            scope.by_group.insert(*alias_group, id);
            if payload.len() as u64 != *count {
                return Err(MaterializeError(format!(
                    "payload length {} != count {}",
                    payload.len(),
                    count
                )));
            }
            for (i, p) in payload.iter().enumerate() {
                let cell = materialize(p, inner, mem, structs, scope)?;
                let rec = mem.record_mut(id).expect("fresh record");
                rec.cells[i] = cell;
            }
            Ok(RtVal::Ptr {
                alloc: id,
                offset: 0,
                ty: (**inner).clone(),
            })
        }
        (Value::Struct { ty: tag, payload }, CType::Struct { tag: want }) => {
            if tag != want {
                return Err(MaterializeError(format!(
                    "struct tag mismatch: `{tag}` vs `{want}`"
                )));
            }
            let def = structs
                .get(tag)
                .ok_or_else(|| MaterializeError(format!("unknown struct `{tag}`")))?
                .clone();
            if payload.len() != def.fields.len() {
                return Err(MaterializeError(format!(
                    "struct `{tag}` arity mismatch"
                )));
            }
            let mut fields = Vec::new();
            for (f, fv) in def.fields.iter().zip(payload.iter()) {
                if f.name != fv.name {
                    return Err(MaterializeError(format!(
                        "struct `{tag}` field order mismatch at `{}`",
                        fv.name
                    )));
                }
                fields.push(materialize(&fv.value, &f.ty, mem, structs, scope)?);
            }
            Ok(RtVal::StructV {
                tag: tag.clone(),
                fields,
            })
        }
        (v, t) => Err(MaterializeError(format!(
            "value kind `{}` does not match declared type `{}`",
            v.kind_name(),
            t.render()
        ))),
    }
}

pub fn elem_size_of(ty: &CType, structs: &BTreeMap<String, StructDef>) -> Option<u64> {
    match ty {
        CType::Void => Some(1),
        CType::Primitive { prim } => Some(prim.size_of()),
        CType::Pointer { .. } | CType::FunctionPointer { .. } => Some(8),
        CType::Struct { tag } => {
            let def = structs.get(tag)?;
            let mut total = 0u64;
            for f in &def.fields {
                total += elem_size_of(&f.ty, structs)?;
            }
            Some(total)
        }
    }
}

/// Zero value of a type: 0 / 0.0 / null / zeroed struct.
pub fn zero_value(ty: &CType, structs: &BTreeMap<String, StructDef>) -> Option<RtVal> {
    match ty {
        CType::Void => Some(RtVal::Int {
            v: 0,
            ty: Prim::UChar,
        }),
        CType::Primitive { prim } if prim.is_float() => Some(RtVal::Float { v: 0.0, ty: *prim }),
        CType::Primitive { prim } => Some(RtVal::Int { v: 0, ty: *prim }),
        CType::Pointer { inner } => Some(RtVal::Null {
            ty: (**inner).clone(),
        }),
        CType::FunctionPointer { .. } => None,
        CType::Struct { tag } => {
            let def = structs.get(tag)?;
            let mut fields = Vec::new();
            for f in &def.fields {
                fields.push(zero_value(&f.ty, structs)?);
            }
            Some(RtVal::StructV {
                tag: tag.clone(),
                fields,
            })
        }
    }
}

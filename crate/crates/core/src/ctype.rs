//! The restricted-C type lattice shared by the frontend, interpreter, and miner.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Primitive scalar types of the supported C subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prim {
    Int,
    UInt,
    Char,
    UChar,
    Float,
    Double,
    SizeT,
}

impl Prim {
    pub fn name(self) -> &'static str {
        match self {
            Prim::Int => "int",
            Prim::UInt => "uint",
            Prim::Char => "char",
            Prim::UChar => "uchar",
            Prim::Float => "float",
            Prim::Double => "double",
            Prim::SizeT => "size_t",
        }
    }

    /// Abstract machine size in bytes. No alignment padding anywhere.
    pub fn size_of(self) -> u64 {
        match self {
            Prim::Char | Prim::UChar => 1,
            Prim::Int | Prim::UInt | Prim::Float => 4,
            Prim::Double | Prim::SizeT => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Prim::Float | Prim::Double)
    }

    pub fn is_signed(self) -> bool {
        matches!(self, Prim::Int | Prim::Char)
    }
}

/// A type in the restricted C subset.
///
/// Pointer nesting is capped at depth 2 (`T**` is the deepest supported form)
/// and function pointers never appear behind a data pointer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CType {
    Void,
    Primitive { prim: Prim },
    Pointer { inner: Box<CType> },
    Struct { tag: String },
    FunctionPointer { params: Vec<CType>, ret: Box<CType> },
}

impl CType {
    pub fn prim(p: Prim) -> CType {
        CType::Primitive { prim: p }
    }

    pub fn ptr(inner: CType) -> CType {
        CType::Pointer {
            inner: Box::new(inner),
        }
    }

    pub fn fn_ptr(params: Vec<CType>, ret: CType) -> CType {
        CType::FunctionPointer {
            params,
            ret: Box::new(ret),
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, CType::Pointer { .. })
    }

    pub fn is_function_pointer(&self) -> bool {
        matches!(self, CType::FunctionPointer { .. })
    }

    pub fn pointee(&self) -> Option<&CType> {
        match self {
            CType::Pointer { inner } => Some(inner),
            _ => None,
        }
    }

    /// Number of `Pointer` layers wrapping the base type.
    pub fn pointer_depth(&self) -> usize {
        match self {
            CType::Pointer { inner } => 1 + inner.pointer_depth(),
            _ => 0,
        }
    }

    /// Checks the structural invariants: pointer depth <= 2 and no function
    /// pointer behind a data pointer.
    pub fn is_well_formed(&self) -> bool {
        match self {
            CType::Void | CType::Primitive { .. } | CType::Struct { .. } => true,
            CType::Pointer { .. } => {
                if self.pointer_depth() > 2 {
                    return false;
                }
                let mut cur = self;
                while let CType::Pointer { inner } = cur {
                    if inner.is_function_pointer() {
                        return false;
                    }
                    cur = inner;
                }
                true
            }
            CType::FunctionPointer { params, ret } => {
                params.iter().all(CType::is_well_formed) && ret.is_well_formed()
            }
        }
    }

    /// Abstract machine size in bytes. Struct sizes are resolved through
    /// `sizer`, which maps a struct tag to its field types.
    pub fn size_of(&self, sizer: &dyn StructSizer) -> Option<u64> {
        match self {
            CType::Void => None,
            CType::Primitive { prim } => Some(prim.size_of()),
            CType::Pointer { .. } | CType::FunctionPointer { .. } => Some(8),
            CType::Struct { tag } => sizer.struct_size(tag),
        }
    }

    /// Short human-readable rendering used in mined property specs:
    /// `int`, `pointer(float)`, `struct(S)`, `function`.
    pub fn render(&self) -> String {
        match self {
            CType::Void => String::from("void"),
            CType::Primitive { prim } => String::from(prim.name()),
            CType::Pointer { inner } => format!("pointer({})", inner.render()),
            CType::Struct { tag } => format!("struct({tag})"),
            CType::FunctionPointer { .. } => String::from("function"),
        }
    }

    /// Full C-style rendering including function pointer signatures.
    pub fn render_full(&self) -> String {
        match self {
            CType::FunctionPointer { params, ret } => {
                let ps: Vec<String> = params.iter().map(CType::render_full).collect();
                format!("function({})->{}", ps.join(","), ret.render_full())
            }
            CType::Pointer { inner } => format!("pointer({})", inner.render_full()),
            other => other.render(),
        }
    }
}

/// Resolves struct sizes for `CType::size_of`.
pub trait StructSizer {
    fn struct_size(&self, tag: &str) -> Option<u64>;
}

/// A sizer with no struct knowledge; adequate for prim/pointer types.
pub struct NoStructs;

impl StructSizer for NoStructs {
    fn struct_size(&self, _tag: &str) -> Option<u64> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_depth_limit() {
        let d1 = CType::ptr(CType::prim(Prim::Int));
        let d2 = CType::ptr(d1.clone());
        let d3 = CType::ptr(d2.clone());
        assert!(d1.is_well_formed());
        assert!(d2.is_well_formed());
        assert!(!d3.is_well_formed());
    }

    #[test]
    fn no_pointer_to_function_pointer() {
        let fp = CType::fn_ptr(alloc::vec![CType::prim(Prim::Float)], CType::prim(Prim::Float));
        assert!(fp.is_well_formed());
        assert!(!CType::ptr(fp).is_well_formed());
    }

    #[test]
    fn renders() {
        assert_eq!(CType::prim(Prim::Float).render(), "float");
        assert_eq!(CType::ptr(CType::prim(Prim::Float)).render(), "pointer(float)");
        let fp = CType::fn_ptr(
            alloc::vec![
                CType::prim(Prim::Float),
                CType::prim(Prim::Float),
                CType::prim(Prim::Int)
            ],
            CType::prim(Prim::Float),
        );
        assert_eq!(fp.render(), "function");
        assert_eq!(fp.render_full(), "function(float,float,int)->float");
    }
}

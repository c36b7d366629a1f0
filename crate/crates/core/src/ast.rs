//! AST for the restricted C subset, plus the translation-unit model the rest
//! of the pipeline operates on.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ctype::CType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    /// `-x`
    Neg,
    /// `!x`
    Not,
    /// `*p`
    Deref,
    /// `&x`
    AddrOf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    IntLit(i64),
    FloatLit(f64),
    CharLit(i8),
    /// String literal, NUL excluded; the interpreter materializes it as a
    /// fresh char allocation with a trailing NUL.
    StrLit(Vec<u8>),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    /// `x.field`
    Member(Box<Expr>, String),
    /// `p->field`
    Arrow(Box<Expr>, String),
    Call(String, Vec<Expr>),
    /// `(*fp)(args...)` or `fp(args...)` where `fp` is a function-pointer
    /// variable rather than a function name.
    CallPtr(Box<Expr>, Vec<Expr>),
    Cast(CType, Box<Expr>),
    SizeOf(CType),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Decl {
        name: String,
        ty: CType,
        /// `int a[10];` — element count expression for stack arrays.
        array_len: Option<Expr>,
        init: Option<Expr>,
    },
    Assign {
        target: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Break,
    Continue,
    ExprStmt(Expr),
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: CType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: CType,
    pub body: Vec<Stmt>,
}

impl FunctionDef {
    pub fn param_types(&self) -> Vec<CType> {
        self.params.iter().map(|p| p.ty.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub ty: CType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructDef {
    pub tag: String,
    pub fields: Vec<Field>,
}

impl StructDef {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

/// The declaration payload of a translation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UnitDecl {
    Function(FunctionDef),
    Struct(StructDef),
    Typedef { name: String, ty: CType },
    Macro { name: String, body: String },
    Global { name: String, ty: CType, init: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    StructDef,
    Typedef,
    Macro,
    GlobalAssign,
    Function,
}

impl UnitKind {
    pub fn short(self) -> &'static str {
        match self {
            UnitKind::StructDef => "struct",
            UnitKind::Typedef => "typedef",
            UnitKind::Macro => "macro",
            UnitKind::GlobalAssign => "global",
            UnitKind::Function => "fn",
        }
    }

    /// Tie-break rank used by dependency-order iteration.
    pub fn rank(self) -> u8 {
        match self {
            UnitKind::StructDef => 0,
            UnitKind::Typedef => 1,
            UnitKind::Macro => 2,
            UnitKind::GlobalAssign => 3,
            UnitKind::Function => 4,
        }
    }
}

/// Stable identifier for a translation unit: `<kind>:<name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(pub String);

impl UnitId {
    pub fn new(kind: UnitKind, name: &str) -> UnitId {
        UnitId(format!("{}:{}", kind.short(), name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Filesystem-safe form (`fn_square`).
    pub fn slug(&self) -> String {
        self.0.replace(':', "_")
    }
}

impl core::fmt::Display for UnitId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One top-level C element together with its verbatim source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationUnit {
    pub id: UnitId,
    pub kind: UnitKind,
    pub name: String,
    /// Verbatim source slice for this unit (macros unexpanded).
    pub source_text: String,
    pub decl: UnitDecl,
    /// (file index, declaration index) — the deterministic order tiebreak.
    pub file_order: (usize, usize),
}

impl TranslationUnit {
    pub fn as_function(&self) -> Option<&FunctionDef> {
        match &self.decl {
            UnitDecl::Function(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_struct(&self) -> Option<&StructDef> {
        match &self.decl {
            UnitDecl::Struct(s) => Some(s),
            _ => None,
        }
    }

    /// Declared signature (param types, return type); functions only.
    pub fn declared_signature(&self) -> Option<(Vec<CType>, CType)> {
        self.as_function().map(|f| (f.param_types(), f.ret.clone()))
    }
}

/// Parsed project: every top-level declaration in deterministic file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramAst {
    pub units: Vec<TranslationUnit>,
    /// Name of the entry function, when one is designated. Defaults to
    /// `main` when a function of that name exists.
    pub entry_point: Option<String>,
}

impl ProgramAst {
    pub fn unit(&self, id: &UnitId) -> Option<&TranslationUnit> {
        self.units.iter().find(|u| &u.id == id)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.units.iter().find_map(|u| match &u.decl {
            UnitDecl::Function(f) if f.name == name => Some(f),
            _ => None,
        })
    }

    pub fn struct_def(&self, tag: &str) -> Option<&StructDef> {
        self.units.iter().find_map(|u| match &u.decl {
            UnitDecl::Struct(s) if s.tag == tag => Some(s),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.units.iter().filter_map(|u| match &u.decl {
            UnitDecl::Function(f) => Some(f),
            _ => None,
        })
    }

    /// Designate the entry point; the name must refer to a function unit.
    pub fn with_entry_point(mut self, name: &str) -> Result<ProgramAst, String> {
        if self.function(name).is_none() {
            return Err(format!("entry point `{name}` is not a defined function"));
        }
        self.entry_point = Some(String::from(name));
        Ok(self)
    }
}

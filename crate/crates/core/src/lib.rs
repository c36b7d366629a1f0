//! Core analysis engine for the C-to-safe-Rust translation pipeline.
//!
//! This crate hosts everything that is pure computation over in-memory data:
//! the restricted-C frontend (lexer, parser, pretty printer), the dependency
//! graph used to order translation, the instrumented interpreter that executes
//! C projects while tracking allocations, and the property miner that distills
//! executions into per-function specifications and serialized I/O examples.
//!
//! File and process I/O, candidate generation, and the CLI live in the
//! companion `syzygy` crate. This crate is `no_std`-compatible (with `alloc`)
//! so the analyses stay portable and deterministic.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ast;
pub mod ctype;
pub mod funnel;
pub mod graph;
pub mod interp;
pub mod lex;
pub mod parse;
pub mod pretty;
pub mod specs;
pub mod value;

pub use ast::{ProgramAst, TranslationUnit, UnitId, UnitKind};
pub use ctype::{CType, Prim};
pub use graph::DependencyGraph;
pub use interp::{ExecutionTrace, Interpreter, RuntimeError};
pub use specs::{IoExample, PropertySpec};
pub use value::Value;

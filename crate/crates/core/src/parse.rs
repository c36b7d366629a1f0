//! Parser for the restricted C subset: preprocessing (object-like macros
//! only), recursive-descent parsing into [`ProgramAst`], project validation,
//! and scope-aware reference resolution.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::{
    Expr, Field, FunctionDef, Param, ProgramAst, Stmt, StructDef, TranslationUnit, UnaryOp,
    UnitDecl, UnitId, UnitKind,
};
use crate::ast::BinOp;
use crate::ctype::{CType, Prim};
use crate::lex::{lex, LexError, Loc, Tok, Token};

/// Functions the interpreter provides natively; calls to these never need a
/// project definition.
pub const BUILTINS: &[&str] = &[
    "malloc", "free", "min", "toupper", "memcpy", "assert", "printf",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// Structured diagnostic record; serialized as JSON lines by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Syntax { loc: Loc, message: String },
    Unsupported { construct: String, loc: Loc },
    DuplicateDefinition { name: String, loc: Loc },
    UnresolvedIdentifier { name: String, unit: String },
}

impl ParseError {
    pub fn to_diagnostic(&self, file_names: &[String]) -> Diagnostic {
        let lookup = |loc: &Loc| {
            file_names
                .get(loc.file)
                .cloned()
                .unwrap_or_else(|| format!("<file {}>", loc.file))
        };
        match self {
            ParseError::Syntax { loc, message } => Diagnostic {
                file: lookup(loc),
                line: loc.line,
                col: loc.col,
                code: "syntax".to_string(),
                message: message.clone(),
            },
            ParseError::Unsupported { construct, loc } => Diagnostic {
                file: lookup(loc),
                line: loc.line,
                col: loc.col,
                code: "unsupported".to_string(),
                message: format!("unsupported construct: {construct}"),
            },
            ParseError::DuplicateDefinition { name, loc } => Diagnostic {
                file: lookup(loc),
                line: loc.line,
                col: loc.col,
                code: "duplicate-definition".to_string(),
                message: format!("duplicate top-level definition of `{name}`"),
            },
            ParseError::UnresolvedIdentifier { name, unit } => Diagnostic {
                file: String::new(),
                line: 0,
                col: 0,
                code: "unresolved-identifier".to_string(),
                message: format!("`{name}` referenced by `{unit}` does not resolve"),
            },
        }
    }
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseError::Syntax { loc, message } => write!(f, "syntax error at {loc}: {message}"),
            ParseError::Unsupported { construct, loc } => {
                write!(f, "unsupported construct at {loc}: {construct}")
            }
            ParseError::DuplicateDefinition { name, loc } => {
                write!(f, "duplicate definition of `{name}` at {loc}")
            }
            ParseError::UnresolvedIdentifier { name, unit } => {
                write!(f, "unresolved identifier `{name}` in `{unit}`")
            }
        }
    }
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> ParseError {
        ParseError::Syntax {
            loc: e.loc,
            message: e.message,
        }
    }
}

const KEYWORDS: &[&str] = &[
    "void", "int", "unsigned", "char", "float", "double", "size_t", "struct", "typedef", "if",
    "else", "for", "while", "return", "break", "continue", "sizeof",
];

const REJECTED_KEYWORDS: &[(&str, &str)] = &[
    ("goto", "goto"),
    ("union", "union"),
    ("switch", "switch statement"),
    ("do", "do-while loop"),
    ("static", "storage class specifier"),
    ("extern", "storage class specifier"),
    ("volatile", "volatile qualifier"),
    ("pthread_create", "thread primitive"),
    ("pthread_join", "thread primitive"),
];

/// Object-like macro table: name -> body tokens.
#[derive(Debug, Clone, Default)]
pub struct MacroTable {
    pub defs: BTreeMap<String, Vec<Token>>,
    pub raw: BTreeMap<String, String>,
}

/// Parse an ordered list of `(file name, source text)` pairs into a project
/// AST. The entry point defaults to `main` when such a function exists.
pub fn parse_project(files: &[(String, String)]) -> Result<ProgramAst, ParseError> {
    let mut macros = MacroTable::default();
    let mut units: Vec<TranslationUnit> = Vec::new();
    let mut typedefs: BTreeMap<String, CType> = BTreeMap::new();
    let mut struct_tags: BTreeSet<String> = BTreeSet::new();

    for (file_idx, (_name, text)) in files.iter().enumerate() {
        let tokens = lex(file_idx, text)?;
        let mut p = Parser {
            toks: tokens,
            pos: 0,
            file_idx,
            src: text,
            macros: &mut macros,
            typedefs: &mut typedefs,
            struct_tags: &mut struct_tags,
            units: &mut units,
            expansions: Vec::new(),
        };
        p.parse_file()?;
    }

    validate_unique(&units)?;
    validate_struct_acyclicity(&units)?;

    let entry_point = units
        .iter()
        .find(|u| u.kind == UnitKind::Function && u.name == "main")
        .map(|u| u.name.clone());
    let ast = ProgramAst { units, entry_point };

    // Reference resolution doubles as the project-level name check.
    resolve_references(&ast)?;
    Ok(ast)
}

/// Re-parse the source text of a single unit under a given macro table.
/// Used by the round-trip invariant checks.
pub fn parse_unit_source(
    text: &str,
    macro_defs: &BTreeMap<String, String>,
) -> Result<ProgramAst, ParseError> {
    let mut prelude = String::new();
    for (name, body) in macro_defs {
        prelude.push_str(&format!("#define {name} {body}\n"));
    }
    prelude.push_str(text);
    parse_project(&[("unit".to_string(), prelude)])
}

fn validate_unique(units: &[TranslationUnit]) -> Result<(), ParseError> {
    let mut seen: BTreeSet<(UnitKind, &str)> = BTreeSet::new();
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for u in units {
        if !seen.insert((u.kind, u.name.as_str())) {
            return Err(ParseError::DuplicateDefinition {
                name: u.name.clone(),
                loc: Loc::new(u.file_order.0, 0, 0),
            });
        }
        // A struct plus the typedef introducing it legitimately share a name;
        // everything else must be globally unique.
        let tolerated = matches!(u.kind, UnitKind::Typedef | UnitKind::StructDef);
        if !names.insert(u.name.as_str()) && !tolerated {
            return Err(ParseError::DuplicateDefinition {
                name: u.name.clone(),
                loc: Loc::new(u.file_order.0, 0, 0),
            });
        }
    }
    Ok(())
}

/// Reject by-value containment cycles between structs. Pointer links are
/// fine; `struct Node { struct Node* next; }` is the canonical allowed shape.
fn validate_struct_acyclicity(units: &[TranslationUnit]) -> Result<(), ParseError> {
    let defs: BTreeMap<&str, &StructDef> = units
        .iter()
        .filter_map(|u| u.as_struct().map(|s| (s.tag.as_str(), s)))
        .collect();
    fn visit<'a>(
        tag: &'a str,
        defs: &BTreeMap<&'a str, &'a StructDef>,
        stack: &mut Vec<&'a str>,
    ) -> bool {
        if stack.contains(&tag) {
            return false;
        }
        let Some(def) = defs.get(tag) else {
            return true;
        };
        stack.push(tag);
        for f in &def.fields {
            if let CType::Struct { tag: inner } = &f.ty {
                // By-value embedding only; pointers break the cycle.
                let inner: &str = inner.as_str();
                let inner = defs.keys().find(|k| **k == inner).copied();
                if let Some(inner) = inner {
                    if !visit(inner, defs, stack) {
                        return false;
                    }
                }
            }
        }
        stack.pop();
        true
    }
    for tag in defs.keys() {
        if !visit(tag, &defs, &mut Vec::new()) {
            return Err(ParseError::Unsupported {
                construct: format!("cyclic struct reference through `{tag}`"),
                loc: Loc::new(0, 0, 0),
            });
        }
    }
    Ok(())
}

/// Enumerate the translation units in deterministic (file, position) order.
pub fn enumerate_units(ast: &ProgramAst) -> Vec<TranslationUnit> {
    let mut units = ast.units.clone();
    units.sort_by_key(|u| u.file_order);
    units
}

/// For each unit, the set of other units whose names appear in its body or
/// signature. Built-ins and locals are excluded; direct recursion yields a
/// self-edge.
pub fn resolve_references(
    ast: &ProgramAst,
) -> Result<BTreeMap<UnitId, BTreeSet<UnitId>>, ParseError> {
    let mut by_name: BTreeMap<&str, Vec<&TranslationUnit>> = BTreeMap::new();
    for u in &ast.units {
        by_name.entry(u.name.as_str()).or_default().push(u);
    }
    let mut out = BTreeMap::new();
    for u in &ast.units {
        let mut refs: BTreeSet<UnitId> = BTreeSet::new();
        let mut unresolved: Option<String> = None;
        {
            let mut add_name = |name: &str, want_value: bool| {
                if let Some(cands) = by_name.get(name) {
                    // Prefer value-namespace units (functions, globals, macros)
                    // for expression identifiers; fall back to any match.
                    let pick = cands
                        .iter()
                        .find(|c| {
                            if want_value {
                                matches!(
                                    c.kind,
                                    UnitKind::Function | UnitKind::GlobalAssign | UnitKind::Macro
                                )
                            } else {
                                true
                            }
                        })
                        .or_else(|| cands.first());
                    if let Some(c) = pick {
                        refs.insert(c.id.clone());
                        return;
                    }
                }
                if !is_builtin(name) && unresolved.is_none() {
                    unresolved = Some(name.to_owned());
                }
            };

            match &u.decl {
                UnitDecl::Function(f) => {
                    let mut scopes = ScopeStack::new();
                    for p in &f.params {
                        scopes.declare(&p.name);
                        collect_type_refs(&p.ty, &mut |tag| add_name(tag, false));
                    }
                    collect_type_refs(&f.ret, &mut |tag| add_name(tag, false));
                    collect_stmt_refs(&f.body, &mut scopes, &mut add_name);
                }
                UnitDecl::Struct(s) => {
                    for fld in &s.fields {
                        collect_type_refs(&fld.ty, &mut |tag| {
                            if tag != s.tag {
                                add_name(tag, false)
                            }
                        });
                    }
                }
                UnitDecl::Typedef { ty, .. } => {
                    collect_type_refs(ty, &mut |tag| add_name(tag, false));
                }
                UnitDecl::Macro { .. } => {}
                UnitDecl::Global { ty, init, .. } => {
                    collect_type_refs(ty, &mut |tag| add_name(tag, false));
                    let mut scopes = ScopeStack::new();
                    collect_expr_refs(init, &mut scopes, &mut add_name);
                }
            }
        }
        if let Some(name) = unresolved {
            return Err(ParseError::UnresolvedIdentifier {
                name,
                unit: u.id.to_string(),
            });
        }
        // A unit does not reference itself unless it is a directly recursive
        // function (the collector naturally records the self call).
        if u.kind != UnitKind::Function {
            refs.remove(&u.id);
        }
        out.insert(u.id.clone(), refs);
    }
    // Macro usage edges recorded during parsing live in the unit source text;
    // recover them by scanning for macro names in each unit's raw text.
    let macro_units: Vec<&TranslationUnit> = ast
        .units
        .iter()
        .filter(|u| u.kind == UnitKind::Macro)
        .collect();
    if !macro_units.is_empty() {
        for u in &ast.units {
            if u.kind == UnitKind::Macro {
                continue;
            }
            let refs = out.get_mut(&u.id).expect("ref set exists");
            for m in &macro_units {
                if mentions_word(&u.source_text, &m.name) {
                    refs.insert(m.id.clone());
                }
            }
        }
    }
    Ok(out)
}

/// Whole-word occurrence check used to attribute macro usage.
fn mentions_word(text: &str, word: &str) -> bool {
    let bytes = text.as_bytes();
    let wb = word.as_bytes();
    let mut i = 0;
    while i + wb.len() <= bytes.len() {
        if &bytes[i..i + wb.len()] == wb {
            let before_ok = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
            let after = i + wb.len();
            let after_ok =
                after >= bytes.len() || !(bytes[after].is_ascii_alphanumeric() || bytes[after] == b'_');
            if before_ok && after_ok {
                return true;
            }
        }
        i += 1;
    }
    false
}

struct ScopeStack {
    scopes: Vec<BTreeSet<String>>,
}

impl ScopeStack {
    fn new() -> ScopeStack {
        ScopeStack {
            scopes: vec![BTreeSet::new()],
        }
    }
    fn push(&mut self) {
        self.scopes.push(BTreeSet::new());
    }
    fn pop(&mut self) {
        self.scopes.pop();
    }
    fn declare(&mut self, name: &str) {
        self.scopes
            .last_mut()
            .expect("scope stack non-empty")
            .insert(name.to_owned());
    }
    fn contains(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }
}

fn collect_type_refs(ty: &CType, add: &mut dyn FnMut(&str)) {
    match ty {
        CType::Struct { tag } => add(tag),
        CType::Pointer { inner } => collect_type_refs(inner, add),
        CType::FunctionPointer { params, ret } => {
            for p in params {
                collect_type_refs(p, add);
            }
            collect_type_refs(ret, add);
        }
        _ => {}
    }
}

fn collect_stmt_refs(
    body: &[Stmt],
    scopes: &mut ScopeStack,
    add: &mut impl FnMut(&str, bool),
) {
    scopes.push();
    for stmt in body {
        match stmt {
            Stmt::Decl {
                name,
                ty,
                array_len,
                init,
            } => {
                collect_type_refs(ty, &mut |t| add(t, false));
                if let Some(e) = array_len {
                    collect_expr_refs(e, scopes, add);
                }
                if let Some(e) = init {
                    collect_expr_refs(e, scopes, add);
                }
                scopes.declare(name);
            }
            Stmt::Assign { target, value } => {
                collect_expr_refs(target, scopes, add);
                collect_expr_refs(value, scopes, add);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                collect_expr_refs(cond, scopes, add);
                collect_stmt_refs(then_body, scopes, add);
                collect_stmt_refs(else_body, scopes, add);
            }
            Stmt::While { cond, body } => {
                collect_expr_refs(cond, scopes, add);
                collect_stmt_refs(body, scopes, add);
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                scopes.push();
                if let Some(s) = init {
                    collect_stmt_refs(core::slice::from_ref(s), scopes, add);
                    // A for-init declaration scopes over the loop.
                    if let Stmt::Decl { name, .. } = &**s {
                        scopes.declare(name);
                    }
                }
                if let Some(e) = cond {
                    collect_expr_refs(e, scopes, add);
                }
                if let Some(s) = step {
                    collect_stmt_refs(core::slice::from_ref(s), scopes, add);
                }
                collect_stmt_refs(body, scopes, add);
                scopes.pop();
            }
            Stmt::Return(Some(e)) => collect_expr_refs(e, scopes, add),
            Stmt::Return(None) | Stmt::Break | Stmt::Continue => {}
            Stmt::ExprStmt(e) => collect_expr_refs(e, scopes, add),
            Stmt::Block(b) => collect_stmt_refs(b, scopes, add),
        }
    }
    scopes.pop();
}

fn collect_expr_refs(expr: &Expr, scopes: &mut ScopeStack, add: &mut impl FnMut(&str, bool)) {
    match expr {
        Expr::Ident(name) => {
            if !scopes.contains(name) {
                add(name, true);
            }
        }
        Expr::Unary(_, e) => collect_expr_refs(e, scopes, add),
        Expr::Binary(_, a, b) => {
            collect_expr_refs(a, scopes, add);
            collect_expr_refs(b, scopes, add);
        }
        Expr::Index(a, b) => {
            collect_expr_refs(a, scopes, add);
            collect_expr_refs(b, scopes, add);
        }
        Expr::Member(e, _) | Expr::Arrow(e, _) => collect_expr_refs(e, scopes, add),
        Expr::Call(name, args) => {
            if !scopes.contains(name) {
                add(name, true);
            }
            for a in args {
                collect_expr_refs(a, scopes, add);
            }
        }
        Expr::CallPtr(callee, args) => {
            collect_expr_refs(callee, scopes, add);
            for a in args {
                collect_expr_refs(a, scopes, add);
            }
        }
        Expr::Cast(ty, e) => {
            collect_type_refs(ty, &mut |t| add(t, false));
            collect_expr_refs(e, scopes, add);
        }
        Expr::SizeOf(ty) => collect_type_refs(ty, &mut |t| add(t, false)),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file_idx: usize,
    src: &'a str,
    macros: &'a mut MacroTable,
    typedefs: &'a mut BTreeMap<String, CType>,
    struct_tags: &'a mut BTreeSet<String>,
    units: &'a mut Vec<TranslationUnit>,
    /// Tokens spliced from macro expansion, consumed before `toks[pos]`.
    expansions: Vec<Token>,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, loc: Loc, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            loc,
            message: msg.into(),
        })
    }

    fn unsupported<T>(&self, loc: Loc, construct: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Unsupported {
            construct: construct.into(),
            loc,
        })
    }

    fn cur_loc(&self) -> Loc {
        if let Some(t) = self.expansions.first() {
            return t.loc;
        }
        self.toks
            .get(self.pos)
            .map(|t| t.loc)
            .unwrap_or(Loc::new(self.file_idx, u32::MAX, 0))
    }

    /// Next token with macro expansion applied.
    fn peek(&mut self) -> Option<Tok> {
        self.fill_expansion();
        if let Some(t) = self.expansions.first() {
            return Some(t.tok.clone());
        }
        self.toks.get(self.pos).map(|t| t.tok.clone())
    }

    fn peek2(&mut self) -> Option<Tok> {
        self.fill_expansion();
        if self.expansions.len() >= 2 {
            return Some(self.expansions[1].tok.clone());
        }
        let missing = 2 - self.expansions.len();
        self.toks.get(self.pos + missing - 1).map(|t| t.tok.clone())
    }

    /// If the upcoming token is a macro name, splice its body (recursively).
    fn fill_expansion(&mut self) {
        loop {
            if !self.expansions.is_empty() {
                // Expand the head of the expansion buffer too (nested macros).
                if let Tok::Ident(name) = &self.expansions[0].tok {
                    if let Some(body) = self.macros.defs.get(name).cloned() {
                        let loc = self.expansions[0].loc;
                        let rest = self.expansions.split_off(1);
                        self.expansions = body
                            .into_iter()
                            .map(|t| Token { tok: t.tok, loc })
                            .chain(rest)
                            .collect();
                        continue;
                    }
                }
                return;
            }
            let Some(t) = self.toks.get(self.pos) else {
                return;
            };
            if let Tok::Ident(name) = &t.tok {
                if let Some(body) = self.macros.defs.get(name).cloned() {
                    let loc = t.loc;
                    self.pos += 1;
                    self.expansions = body
                        .into_iter()
                        .map(|t| Token { tok: t.tok, loc })
                        .collect();
                    continue;
                }
            }
            return;
        }
    }

    fn bump(&mut self) -> Option<Token> {
        self.fill_expansion();
        if !self.expansions.is_empty() {
            return Some(self.expansions.remove(0));
        }
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), ParseError> {
        let loc = self.cur_loc();
        match self.bump() {
            Some(Token {
                tok: Tok::Punct(q), ..
            }) if q == p => Ok(()),
            other => self.err(
                loc,
                format!("expected `{p}`, found {}", describe(other.map(|t| t.tok))),
            ),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Loc), ParseError> {
        let loc = self.cur_loc();
        match self.bump() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                if let Some((_, what)) = REJECTED_KEYWORDS.iter().find(|(k, _)| *k == s) {
                    return self.unsupported(loc, *what);
                }
                Ok((s, loc))
            }
            other => self.err(
                loc,
                format!("expected identifier, found {}", describe(other.map(|t| t.tok))),
            ),
        }
    }

    fn peek_ident(&mut self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    // -- top level ----------------------------------------------------------

    fn parse_file(&mut self) -> Result<(), ParseError> {
        let mut decl_idx = 0usize;
        loop {
            // Directives are raw tokens; handle before expansion.
            while let Some(Token {
                tok: Tok::Directive(_),
                ..
            }) = self.toks.get(self.pos)
            {
                if !self.expansions.is_empty() {
                    break;
                }
                let t = self.toks[self.pos].clone();
                self.pos += 1;
                let Tok::Directive(text) = t.tok else {
                    unreachable!()
                };
                self.handle_directive(&text, t.loc, &mut decl_idx)?;
            }
            if self.peek().is_none() {
                return Ok(());
            }
            self.parse_top_decl(&mut decl_idx)?;
        }
    }

    fn handle_directive(
        &mut self,
        text: &str,
        loc: Loc,
        decl_idx: &mut usize,
    ) -> Result<(), ParseError> {
        let rest = text.trim_start_matches('#').trim_start();
        if let Some(body) = rest.strip_prefix("define") {
            let body = body.trim_start();
            let mut it = body.splitn(2, char::is_whitespace);
            let name = it.next().unwrap_or("").to_string();
            if name.is_empty() || !name.chars().next().unwrap().is_ascii_alphabetic() {
                return self.err(loc, "malformed #define");
            }
            if body[name.len()..].starts_with('(') || name.contains('(') {
                return self.unsupported(loc, "function-like macro");
            }
            let value = it.next().unwrap_or("").trim().to_string();
            let body_toks = lex(self.file_idx, &value)?;
            if self.macros.defs.contains_key(&name) {
                return Err(ParseError::DuplicateDefinition { name, loc });
            }
            let unit = TranslationUnit {
                id: UnitId::new(UnitKind::Macro, &name),
                kind: UnitKind::Macro,
                name: name.clone(),
                source_text: text.trim().to_string(),
                decl: UnitDecl::Macro {
                    name: name.clone(),
                    body: value.clone(),
                },
                file_order: (self.file_idx, *decl_idx),
            };
            *decl_idx += 1;
            self.units.push(unit);
            self.macros.defs.insert(name.clone(), body_toks);
            self.macros.raw.insert(name, value);
            Ok(())
        } else if ["if", "ifdef", "ifndef", "else", "elif", "endif"]
            .iter()
            .any(|d| rest.starts_with(d))
        {
            self.unsupported(loc, "conditional-compilation directive")
        } else {
            self.unsupported(loc, format!("preprocessor directive `{}`", rest))
        }
    }

    fn parse_top_decl(&mut self, decl_idx: &mut usize) -> Result<(), ParseError> {
        let start_loc = self.cur_loc();
        let start_off = self.pos;
        let kw = self.peek_ident();
        if let Some(kw) = &kw {
            if let Some((_, what)) = REJECTED_KEYWORDS.iter().find(|(k, _)| k == kw) {
                return self.unsupported(start_loc, *what);
            }
        }
        if kw.as_deref() == Some("typedef") {
            self.bump();
            return self.parse_typedef(start_loc, start_off, decl_idx);
        }
        if kw.as_deref() == Some("struct") && self.is_struct_def_ahead() {
            self.bump(); // struct
            let (tag, _) = self.expect_ident()?;
            let fields = self.parse_field_block()?;
            self.expect_punct(";")?;
            self.push_struct_unit_with_tag(&tag, fields, start_off, decl_idx);
            return Ok(());
        }

        // Function or global: type, name, then `(` or `=`.
        let ty = self.parse_type()?;
        let (name, name_loc) = self.expect_ident()?;
        match self.peek() {
            Some(Tok::Punct("(")) => {
                self.parse_function(ty, name, start_off, decl_idx)
            }
            Some(Tok::Punct("=")) => {
                self.bump();
                let init = self.parse_expr()?;
                self.expect_punct(";")?;
                let text = self.slice_since(start_off);
                self.units.push(TranslationUnit {
                    id: UnitId::new(UnitKind::GlobalAssign, &name),
                    kind: UnitKind::GlobalAssign,
                    name: name.clone(),
                    source_text: text,
                    decl: UnitDecl::Global { name, ty, init },
                    file_order: (self.file_idx, *decl_idx),
                });
                *decl_idx += 1;
                Ok(())
            }
            _ => self.err(
                name_loc,
                "expected `(` (function) or `= value;` (global) after top-level declarator",
            ),
        }
    }

    fn is_struct_def_ahead(&mut self) -> bool {
        // `struct TAG {` introduces a definition; `struct TAG ident` is a type use.
        matches!(self.peek2(), Some(Tok::Ident(_)))
            && {
                // peek 3rd token
                self.fill_expansion();
                let third = if self.expansions.len() >= 3 {
                    Some(self.expansions[2].tok.clone())
                } else {
                    let missing = 3 - self.expansions.len();
                    self.toks.get(self.pos + missing - 1).map(|t| t.tok.clone())
                };
                matches!(third, Some(Tok::Punct("{")))
            }
    }

    fn parse_typedef(
        &mut self,
        loc: Loc,
        start_off: usize,
        decl_idx: &mut usize,
    ) -> Result<(), ParseError> {
        if self.peek_ident().as_deref() == Some("struct") {
            // typedef struct [TAG] { ... } NAME;  or  typedef struct TAG NAME;
            self.bump();
            let tag_opt = self.peek_ident();
            let has_body = match (&tag_opt, self.peek2()) {
                (Some(_), Some(Tok::Punct("{"))) => {
                    self.bump();
                    true
                }
                (Some(_), _) => {
                    self.bump();
                    false
                }
                (None, _) => matches!(self.peek(), Some(Tok::Punct("{"))),
            };
            if has_body || tag_opt.is_none() {
                let (name, fields) = {
                    let fields = self.parse_field_block()?;
                    let (name, _) = self.expect_ident()?;
                    self.expect_punct(";")?;
                    (name, fields)
                };
                let tag = tag_opt.unwrap_or_else(|| name.clone());
                self.push_struct_unit_with_tag(&tag, fields, start_off, decl_idx);
                self.typedefs
                    .insert(name.clone(), CType::Struct { tag: tag.clone() });
                self.units.push(TranslationUnit {
                    id: UnitId::new(UnitKind::Typedef, &name),
                    kind: UnitKind::Typedef,
                    name: name.clone(),
                    source_text: self.slice_since(start_off),
                    decl: UnitDecl::Typedef {
                        name,
                        ty: CType::Struct { tag },
                    },
                    file_order: (self.file_idx, *decl_idx),
                });
                *decl_idx += 1;
                return Ok(());
            }
            let tag = tag_opt.expect("checked above");
            let (name, _) = self.expect_ident()?;
            self.expect_punct(";")?;
            self.typedefs
                .insert(name.clone(), CType::Struct { tag: tag.clone() });
            self.units.push(TranslationUnit {
                id: UnitId::new(UnitKind::Typedef, &name),
                kind: UnitKind::Typedef,
                name: name.clone(),
                source_text: self.slice_since(start_off),
                decl: UnitDecl::Typedef {
                    name,
                    ty: CType::Struct { tag },
                },
                file_order: (self.file_idx, *decl_idx),
            });
            *decl_idx += 1;
            return Ok(());
        }
        // typedef <type> NAME;
        let ty = self.parse_type()?;
        let (name, _) = self.expect_ident()?;
        self.expect_punct(";")?;
        let _ = loc;
        self.typedefs.insert(name.clone(), ty.clone());
        self.units.push(TranslationUnit {
            id: UnitId::new(UnitKind::Typedef, &name),
            kind: UnitKind::Typedef,
            name: name.clone(),
            source_text: self.slice_since(start_off),
            decl: UnitDecl::Typedef { name, ty },
            file_order: (self.file_idx, *decl_idx),
        });
        *decl_idx += 1;
        Ok(())
    }

    fn parse_field_block(&mut self) -> Result<Vec<Field>, ParseError> {
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while self.peek() != Some(Tok::Punct("}")) {
            let loc = self.cur_loc();
            let ty = self.parse_type()?;
            let (name, _) = self.expect_ident()?;
            if self.peek() == Some(Tok::Punct("[")) {
                return self.unsupported(loc, "array field in struct");
            }
            self.expect_punct(";")?;
            fields.push(Field { name, ty });
        }
        self.expect_punct("}")?;
        Ok(fields)
    }

    fn push_struct_unit_with_tag(
        &mut self,
        tag: &str,
        fields: Vec<Field>,
        start_off: usize,
        decl_idx: &mut usize,
    ) {
        self.struct_tags.insert(tag.to_string());
        self.units.push(TranslationUnit {
            id: UnitId::new(UnitKind::StructDef, tag),
            kind: UnitKind::StructDef,
            name: tag.to_string(),
            source_text: self.slice_since(start_off),
            decl: UnitDecl::Struct(StructDef {
                tag: tag.to_string(),
                fields,
            }),
            file_order: (self.file_idx, *decl_idx),
        });
        *decl_idx += 1;
    }

    fn parse_function(
        &mut self,
        ret: CType,
        name: String,
        start_off: usize,
        decl_idx: &mut usize,
    ) -> Result<(), ParseError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.peek() != Some(Tok::Punct(")")) {
            // `void` alone means an empty parameter list.
            if self.peek_ident().as_deref() == Some("void") && self.peek2() == Some(Tok::Punct(")"))
            {
                self.bump();
            } else {
                loop {
                    let loc = self.cur_loc();
                    if self.peek() == Some(Tok::Punct(".")) {
                        return self.unsupported(loc, "varargs");
                    }
                    params.push(self.parse_param()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.parse_block()?;
        let text = self.slice_since(start_off);
        self.units.push(TranslationUnit {
            id: UnitId::new(UnitKind::Function, &name),
            kind: UnitKind::Function,
            name: name.clone(),
            source_text: text,
            decl: UnitDecl::Function(FunctionDef {
                name,
                params,
                ret,
                body,
            }),
            file_order: (self.file_idx, *decl_idx),
        });
        *decl_idx += 1;
        Ok(())
    }

    fn parse_param(&mut self) -> Result<Param, ParseError> {
        let base = self.parse_type_base()?;
        // Function pointer parameter: RET (*name)(T, T, ...)
        if self.peek() == Some(Tok::Punct("(")) {
            self.bump();
            self.expect_punct("*")?;
            let (name, _) = self.expect_ident()?;
            self.expect_punct(")")?;
            self.expect_punct("(")?;
            let mut ptypes = Vec::new();
            if self.peek() != Some(Tok::Punct(")")) {
                loop {
                    let t = self.parse_type()?;
                    // Parameter names inside the pointer type are optional.
                    if matches!(self.peek(), Some(Tok::Ident(_))) {
                        self.bump();
                    }
                    ptypes.push(t);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            return Ok(Param {
                name,
                ty: CType::fn_ptr(ptypes, base),
            });
        }
        let ty = self.parse_pointer_suffix(base)?;
        let (name, _) = self.expect_ident()?;
        Ok(Param { name, ty })
    }

    /// True when the next token begins a type.
    fn starts_type(&mut self) -> bool {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                matches!(
                    s.as_str(),
                    "void" | "int" | "unsigned" | "char" | "float" | "double" | "size_t" | "struct"
                ) || self.typedefs.contains_key(&s)
            }
            _ => false,
        }
    }

    fn parse_type(&mut self) -> Result<CType, ParseError> {
        let base = self.parse_type_base()?;
        self.parse_pointer_suffix(base)
    }

    fn parse_pointer_suffix(&mut self, mut ty: CType) -> Result<CType, ParseError> {
        let loc = self.cur_loc();
        while self.eat_punct("*") {
            ty = CType::ptr(ty);
            if ty.pointer_depth() > 2 {
                return self.unsupported(loc, "pointer nesting deeper than 2");
            }
        }
        Ok(ty)
    }

    fn parse_type_base(&mut self) -> Result<CType, ParseError> {
        let loc = self.cur_loc();
        let (word, _) = self.expect_ident()?;
        let ty = match word.as_str() {
            "void" => CType::Void,
            "int" => CType::prim(Prim::Int),
            "char" => CType::prim(Prim::Char),
            "float" => CType::prim(Prim::Float),
            "double" => CType::prim(Prim::Double),
            "size_t" => CType::prim(Prim::SizeT),
            "unsigned" => match self.peek_ident().as_deref() {
                Some("int") => {
                    self.bump();
                    CType::prim(Prim::UInt)
                }
                Some("char") => {
                    self.bump();
                    CType::prim(Prim::UChar)
                }
                _ => CType::prim(Prim::UInt),
            },
            "struct" => {
                let (tag, _) = self.expect_ident()?;
                CType::Struct { tag }
            }
            other => {
                if let Some(ty) = self.typedefs.get(other) {
                    ty.clone()
                } else {
                    return self.err(loc, format!("unknown type name `{other}`"));
                }
            }
        };
        Ok(ty)
    }

    // -- statements ---------------------------------------------------------

    fn parse_block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while self.peek() != Some(Tok::Punct("}")) {
            if self.peek().is_none() {
                return self.err(self.cur_loc(), "unterminated block");
            }
            stmts.push(self.parse_stmt()?);
        }
        self.expect_punct("}")?;
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let loc = self.cur_loc();
        if self.peek() == Some(Tok::Punct("{")) {
            return Ok(Stmt::Block(self.parse_block()?));
        }
        if let Some(kw) = self.peek_ident() {
            if let Some((_, what)) = REJECTED_KEYWORDS.iter().find(|(k, _)| *k == kw) {
                return self.unsupported(loc, *what);
            }
            match kw.as_str() {
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let then_body = self.parse_stmt_as_block()?;
                    let else_body = if self.peek_ident().as_deref() == Some("else") {
                        self.bump();
                        self.parse_stmt_as_block()?
                    } else {
                        Vec::new()
                    };
                    return Ok(Stmt::If {
                        cond,
                        then_body,
                        else_body,
                    });
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let body = self.parse_stmt_as_block()?;
                    return Ok(Stmt::While { cond, body });
                }
                "for" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let init = if self.peek() == Some(Tok::Punct(";")) {
                        None
                    } else {
                        Some(Box::new(self.parse_simple_stmt()?))
                    };
                    self.expect_punct(";")?;
                    let cond = if self.peek() == Some(Tok::Punct(";")) {
                        None
                    } else {
                        Some(self.parse_expr()?)
                    };
                    self.expect_punct(";")?;
                    let step = if self.peek() == Some(Tok::Punct(")")) {
                        None
                    } else {
                        Some(Box::new(self.parse_simple_stmt()?))
                    };
                    self.expect_punct(")")?;
                    let body = self.parse_stmt_as_block()?;
                    return Ok(Stmt::For {
                        init,
                        cond,
                        step,
                        body,
                    });
                }
                "return" => {
                    self.bump();
                    if self.eat_punct(";") {
                        return Ok(Stmt::Return(None));
                    }
                    let e = self.parse_expr()?;
                    self.expect_punct(";")?;
                    return Ok(Stmt::Return(Some(e)));
                }
                "break" => {
                    self.bump();
                    self.expect_punct(";")?;
                    return Ok(Stmt::Break);
                }
                "continue" => {
                    self.bump();
                    self.expect_punct(";")?;
                    return Ok(Stmt::Continue);
                }
                _ => {}
            }
        }
        let s = self.parse_simple_stmt()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn parse_stmt_as_block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.peek() == Some(Tok::Punct("{")) {
            self.parse_block()
        } else {
            Ok(vec![self.parse_stmt()?])
        }
    }

    /// Declaration / assignment / expression statement without the trailing
    /// semicolon — shared by statement and for-clause parsing.
    fn parse_simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.starts_type() {
            let ty = self.parse_type()?;
            let (name, _) = self.expect_ident()?;
            if self.eat_punct("[") {
                let len = self.parse_expr()?;
                self.expect_punct("]")?;
                return Ok(Stmt::Decl {
                    name,
                    ty,
                    array_len: Some(len),
                    init: None,
                });
            }
            let init = if self.eat_punct("=") {
                Some(self.parse_expr()?)
            } else {
                None
            };
            return Ok(Stmt::Decl {
                name,
                ty,
                array_len: None,
                init,
            });
        }
        let loc = self.cur_loc();
        let target = self.parse_expr()?;
        match self.peek() {
            Some(Tok::Punct("=")) => {
                self.bump();
                let value = self.parse_expr()?;
                Ok(Stmt::Assign { target, value })
            }
            Some(Tok::Punct(op @ ("+=" | "-=" | "*=" | "/=" | "%="))) => {
                self.bump();
                let rhs = self.parse_expr()?;
                let bin = match op {
                    "+=" => BinOp::Add,
                    "-=" => BinOp::Sub,
                    "*=" => BinOp::Mul,
                    "/=" => BinOp::Div,
                    _ => BinOp::Rem,
                };
                Ok(Stmt::Assign {
                    target: target.clone(),
                    value: Expr::Binary(bin, Box::new(target), Box::new(rhs)),
                })
            }
            Some(Tok::Punct(op @ ("++" | "--"))) => {
                self.bump();
                let bin = if op == "++" { BinOp::Add } else { BinOp::Sub };
                Ok(Stmt::Assign {
                    target: target.clone(),
                    value: Expr::Binary(bin, Box::new(target), Box::new(Expr::IntLit(1))),
                })
            }
            _ => match &target {
                Expr::Call(..) | Expr::CallPtr(..) => Ok(Stmt::ExprStmt(target)),
                _ => self.err(loc, "expression statement must be a call or assignment"),
            },
        }
    }

    // -- expressions ---------------------------------------------------------

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_bin(0)
    }

    fn parse_bin(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Some(Tok::Punct("||")) => (BinOp::Or, 1),
                Some(Tok::Punct("&&")) => (BinOp::And, 2),
                Some(Tok::Punct("==")) => (BinOp::Eq, 3),
                Some(Tok::Punct("!=")) => (BinOp::Ne, 3),
                Some(Tok::Punct("<")) => (BinOp::Lt, 4),
                Some(Tok::Punct("<=")) => (BinOp::Le, 4),
                Some(Tok::Punct(">")) => (BinOp::Gt, 4),
                Some(Tok::Punct(">=")) => (BinOp::Ge, 4),
                Some(Tok::Punct("+")) => (BinOp::Add, 5),
                Some(Tok::Punct("-")) => (BinOp::Sub, 5),
                Some(Tok::Punct("*")) => (BinOp::Mul, 6),
                Some(Tok::Punct("/")) => (BinOp::Div, 6),
                Some(Tok::Punct("%")) => (BinOp::Rem, 6),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_bin(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Punct("-")) => {
                self.bump();
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.parse_unary()?)))
            }
            Some(Tok::Punct("!")) => {
                self.bump();
                Ok(Expr::Unary(UnaryOp::Not, Box::new(self.parse_unary()?)))
            }
            Some(Tok::Punct("&")) => {
                self.bump();
                let inner = self.parse_unary()?;
                Ok(Expr::Unary(UnaryOp::AddrOf, Box::new(inner)))
            }
            Some(Tok::Punct("*")) => {
                self.bump();
                let inner = self.parse_unary()?;
                Ok(Expr::Unary(UnaryOp::Deref, Box::new(inner)))
            }
            Some(Tok::Ident(s)) if s == "sizeof" => {
                self.bump();
                self.expect_punct("(")?;
                let ty = self.parse_type()?;
                self.expect_punct(")")?;
                Ok(Expr::SizeOf(ty))
            }
            Some(Tok::Punct("(")) => {
                // Cast or parenthesized expression.
                let save_pos = self.pos;
                let save_exp = self.expansions.clone();
                self.bump();
                if self.starts_type() {
                    let ty = self.parse_type()?;
                    self.expect_punct(")")?;
                    let inner = self.parse_unary()?;
                    return Ok(Expr::Cast(ty, Box::new(inner)));
                }
                self.pos = save_pos;
                self.expansions = save_exp;
                self.parse_postfix()
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.parse_primary()?;
        loop {
            match self.peek() {
                Some(Tok::Punct("[")) => {
                    self.bump();
                    let idx = self.parse_expr()?;
                    self.expect_punct("]")?;
                    e = Expr::Index(Box::new(e), Box::new(idx));
                }
                Some(Tok::Punct(".")) => {
                    self.bump();
                    let (field, _) = self.expect_ident()?;
                    e = Expr::Member(Box::new(e), field);
                }
                Some(Tok::Punct("->")) => {
                    self.bump();
                    let (field, _) = self.expect_ident()?;
                    e = Expr::Arrow(Box::new(e), field);
                }
                Some(Tok::Punct("(")) => {
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek() != Some(Tok::Punct(")")) {
                        loop {
                            args.push(self.parse_expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    e = match e {
                        Expr::Ident(name) => Expr::Call(name, args),
                        other => Expr::CallPtr(Box::new(other), args),
                    };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let loc = self.cur_loc();
        match self.bump().map(|t| t.tok) {
            Some(Tok::IntLit(v)) => Ok(Expr::IntLit(v)),
            Some(Tok::FloatLit(v, _)) => Ok(Expr::FloatLit(v)),
            Some(Tok::CharLit(c)) => Ok(Expr::CharLit(c)),
            Some(Tok::StrLit(s)) => Ok(Expr::StrLit(s)),
            Some(Tok::Ident(s)) => {
                if let Some((_, what)) = REJECTED_KEYWORDS.iter().find(|(k, _)| *k == s) {
                    return self.unsupported(loc, *what);
                }
                if KEYWORDS.contains(&s.as_str()) {
                    return self.err(loc, format!("unexpected keyword `{s}` in expression"));
                }
                Ok(Expr::Ident(s))
            }
            Some(Tok::Punct("(")) => {
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => self.err(loc, format!("expected expression, found {}", describe(other))),
        }
    }

    /// Best-effort source slice from a token offset to the current position.
    fn slice_since(&self, start_tok: usize) -> String {
        let start = &self.toks[start_tok].loc;
        let end = self
            .toks
            .get(self.pos.saturating_sub(1))
            .map(|t| t.loc)
            .unwrap_or(*start);
        slice_lines(self.src, start.line, end.line)
    }
}

fn describe(t: Option<Tok>) -> String {
    match t {
        None => "end of input".to_string(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::IntLit(v)) => format!("`{v}`"),
        Some(Tok::FloatLit(v, _)) => format!("`{v}`"),
        Some(Tok::CharLit(c)) => format!("char literal `{c}`"),
        Some(Tok::StrLit(_)) => "string literal".to_string(),
        Some(Tok::Punct(p)) => format!("`{p}`"),
        Some(Tok::Directive(_)) => "preprocessor directive".to_string(),
    }
}

fn slice_lines(src: &str, start_line: u32, end_line: u32) -> String {
    let mut out = String::new();
    for (i, line) in src.lines().enumerate() {
        let n = (i + 1) as u32;
        if n >= start_line && n <= end_line {
            out.push_str(line);
            out.push('\n');
        }
        if n > end_line {
            break;
        }
    }
    out.trim_end().to_string()
}

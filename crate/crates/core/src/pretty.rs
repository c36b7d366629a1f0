//! Pretty printer for the restricted C AST. `parse(pretty(parse(x)))` must
//! yield a structurally equal AST; the printer re-emits `#define` lines so a
//! printed project is self-contained.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ast::{Expr, ProgramAst, Stmt, TranslationUnit, UnaryOp, UnitDecl};
use crate::ctype::CType;

pub fn print_program(ast: &ProgramAst) -> String {
    let mut out = String::new();
    for unit in &ast.units {
        out.push_str(&print_unit(unit));
        out.push('\n');
    }
    out
}

pub fn print_unit(unit: &TranslationUnit) -> String {
    match &unit.decl {
        UnitDecl::Macro { name, body } => format!("#define {name} {body}\n"),
        UnitDecl::Struct(s) => {
            let mut out = format!("struct {} {{\n", s.tag);
            for f in &s.fields {
                out.push_str(&format!("    {};\n", declarator(&f.ty, &f.name)));
            }
            out.push_str("};\n");
            out
        }
        UnitDecl::Typedef { name, ty } => match ty {
            CType::Struct { tag } => format!("typedef struct {tag} {name};\n"),
            other => format!("typedef {} {name};\n", type_name(other)),
        },
        UnitDecl::Global { name, ty, init } => {
            format!("{} = {};\n", declarator(ty, name), print_expr(init))
        }
        UnitDecl::Function(f) => {
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| match &p.ty {
                    CType::FunctionPointer { params, ret } => {
                        let ps: Vec<String> = params.iter().map(type_name).collect();
                        format!("{} (*{})({})", type_name(ret), p.name, ps.join(", "))
                    }
                    ty => declarator(ty, &p.name),
                })
                .collect();
            let mut out = format!(
                "{} {}({}) {{\n",
                type_name(&f.ret),
                f.name,
                if params.is_empty() {
                    String::from("void")
                } else {
                    params.join(", ")
                }
            );
            for s in &f.body {
                print_stmt(s, 1, &mut out);
            }
            out.push_str("}\n");
            out
        }
    }
}

fn type_name(ty: &CType) -> String {
    match ty {
        CType::Void => String::from("void"),
        CType::Primitive { prim } => match prim.name() {
            "uint" => String::from("unsigned int"),
            "uchar" => String::from("unsigned char"),
            other => String::from(other),
        },
        CType::Pointer { inner } => format!("{}*", type_name(inner)),
        CType::Struct { tag } => format!("struct {tag}"),
        CType::FunctionPointer { params, ret } => {
            let ps: Vec<String> = params.iter().map(type_name).collect();
            format!("{} (*)({})", type_name(ret), ps.join(", "))
        }
    }
}

fn declarator(ty: &CType, name: &str) -> String {
    format!("{} {}", type_name(ty), name)
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    match stmt {
        Stmt::Decl {
            name,
            ty,
            array_len,
            init,
        } => {
            indent(depth, out);
            if let Some(len) = array_len {
                out.push_str(&format!("{} {}[{}];\n", type_name(ty), name, print_expr(len)));
            } else if let Some(e) = init {
                out.push_str(&format!("{} = {};\n", declarator(ty, name), print_expr(e)));
            } else {
                out.push_str(&format!("{};\n", declarator(ty, name)));
            }
        }
        Stmt::Assign { target, value } => {
            indent(depth, out);
            out.push_str(&format!("{} = {};\n", print_expr(target), print_expr(value)));
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => {
            indent(depth, out);
            out.push_str(&format!("if ({}) {{\n", print_expr(cond)));
            for s in then_body {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            if else_body.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in else_body {
                    print_stmt(s, depth + 1, out);
                }
                indent(depth, out);
                out.push_str("}\n");
            }
        }
        Stmt::While { cond, body } => {
            indent(depth, out);
            out.push_str(&format!("while ({}) {{\n", print_expr(cond)));
            for s in body {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::For {
            init,
            cond,
            step,
            body,
        } => {
            indent(depth, out);
            let i = init
                .as_ref()
                .map(|s| print_simple_stmt(s))
                .unwrap_or_default();
            let c = cond.as_ref().map(print_expr).unwrap_or_default();
            let st = step
                .as_ref()
                .map(|s| print_simple_stmt(s))
                .unwrap_or_default();
            out.push_str(&format!("for ({i}; {c}; {st}) {{\n"));
            for s in body {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::Return(e) => {
            indent(depth, out);
            match e {
                Some(e) => out.push_str(&format!("return {};\n", print_expr(e))),
                None => out.push_str("return;\n"),
            }
        }
        Stmt::Break => {
            indent(depth, out);
            out.push_str("break;\n");
        }
        Stmt::Continue => {
            indent(depth, out);
            out.push_str("continue;\n");
        }
        Stmt::ExprStmt(e) => {
            indent(depth, out);
            out.push_str(&format!("{};\n", print_expr(e)));
        }
        Stmt::Block(b) => {
            indent(depth, out);
            out.push_str("{\n");
            for s in b {
                print_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
    }
}

fn print_simple_stmt(stmt: &Stmt) -> String {
    match stmt {
        Stmt::Decl { name, ty, init, .. } => match init {
            Some(e) => format!("{} = {}", declarator(ty, name), print_expr(e)),
            None => declarator(ty, name),
        },
        Stmt::Assign { target, value } => {
            format!("{} = {}", print_expr(target), print_expr(value))
        }
        Stmt::ExprStmt(e) => print_expr(e),
        other => {
            // Only simple statements appear in for clauses.
            let mut s = String::new();
            print_stmt(other, 0, &mut s);
            s.trim_end().into()
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::IntLit(v) => format!("{v}"),
        Expr::FloatLit(v) => {
            if v.fract() == 0.0 && v.is_finite() {
                format!("{v:.1}")
            } else {
                format!("{v}")
            }
        }
        Expr::CharLit(c) => match *c as u8 {
            b'\n' => String::from("'\\n'"),
            b'\t' => String::from("'\\t'"),
            0 => String::from("'\\0'"),
            b'\\' => String::from("'\\\\'"),
            b'\'' => String::from("'\\''"),
            ch if ch.is_ascii_graphic() || ch == b' ' => format!("'{}'", ch as char),
            ch => format!("{}", ch as i8),
        },
        Expr::StrLit(bytes) => {
            let mut s = String::from("\"");
            for b in bytes {
                match *b {
                    b'\n' => s.push_str("\\n"),
                    b'\t' => s.push_str("\\t"),
                    0 => s.push_str("\\0"),
                    b'"' => s.push_str("\\\""),
                    b'\\' => s.push_str("\\\\"),
                    ch => s.push(ch as char),
                }
            }
            s.push('"');
            s
        }
        Expr::Ident(n) => n.clone(),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
                UnaryOp::Deref => "*",
                UnaryOp::AddrOf => "&",
            };
            format!("{sym}({})", print_expr(inner))
        }
        Expr::Binary(op, a, b) => {
            format!("({} {} {})", print_expr(a), op.symbol(), print_expr(b))
        }
        Expr::Index(a, i) => format!("{}[{}]", print_postfix_base(a), print_expr(i)),
        Expr::Member(a, f) => format!("{}.{}", print_postfix_base(a), f),
        Expr::Arrow(a, f) => format!("{}->{}", print_postfix_base(a), f),
        Expr::Call(name, args) => {
            let a: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", a.join(", "))
        }
        Expr::CallPtr(callee, args) => {
            let a: Vec<String> = args.iter().map(print_expr).collect();
            format!("({})({})", print_expr(callee), a.join(", "))
        }
        Expr::Cast(ty, inner) => format!("({})({})", type_name(ty), print_expr(inner)),
        Expr::SizeOf(ty) => format!("sizeof({})", type_name(ty)),
    }
}

fn print_postfix_base(e: &Expr) -> String {
    match e {
        Expr::Ident(_) | Expr::Index(..) | Expr::Member(..) | Expr::Arrow(..) | Expr::Call(..) => {
            print_expr(e)
        }
        other => format!("({})", print_expr(other)),
    }
}

//! The instrumented abstract machine: executes a parsed project while
//! tracking every allocation in the bounds table and capturing a serialized
//! I/O example for every project-function call.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::{BinOp, Expr, FunctionDef, ProgramAst, Stmt, UnaryOp, UnitDecl};
use crate::ctype::{CType, Prim};
use crate::interp::memory::{AllocId, BoundsTable, Region, RtVal};
use crate::interp::serial::{
    elem_size_of, materialize, serialize_rt, zero_value, MaterializeScope, SerializeError,
    SnapshotScope,
};
use crate::parse::is_builtin;
use crate::pretty::print_expr;
use crate::specs::IoExample;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    OutOfBounds,
    UseAfterFree,
    NullDeref,
    DoubleFree,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeError {
    Fault { kind: FaultKind, location: String },
    AssertFailure { location: String },
    DivByZero { location: String },
    TypeError { message: String, location: String },
    StepLimit,
    StackOverflow,
    Serialize(SerializeError),
    Entry(String),
}

impl core::fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RuntimeError::Fault { kind, location } => {
                let k = match kind {
                    FaultKind::OutOfBounds => "out-of-bounds access",
                    FaultKind::UseAfterFree => "use after free",
                    FaultKind::NullDeref => "null dereference",
                    FaultKind::DoubleFree => "double free",
                };
                write!(f, "{k} at {location}")
            }
            RuntimeError::AssertFailure { location } => write!(f, "assertion failed at {location}"),
            RuntimeError::DivByZero { location } => write!(f, "division by zero at {location}"),
            RuntimeError::TypeError { message, location } => {
                write!(f, "type error at {location}: {message}")
            }
            RuntimeError::StepLimit => write!(f, "step limit exceeded"),
            RuntimeError::StackOverflow => write!(f, "call depth limit exceeded"),
            RuntimeError::Serialize(e) => write!(f, "{e}"),
            RuntimeError::Entry(m) => write!(f, "entry input mismatch: {m}"),
        }
    }
}

type RtResult<T> = Result<T, RuntimeError>;

/// One captured project-function call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallEvent {
    pub io: IoExample,
    pub depth: u32,
    /// Function-pointer parameters observed bound to named functions.
    pub fnptr_bindings: Vec<(String, String)>,
    /// Observed argument types: pointer args carry the backing allocation's
    /// element type at call entry, function pointers the full signature of
    /// the bound function.
    pub observed_types: Vec<CType>,
}

/// Result of one instrumented execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub entry: String,
    pub inputs: Vec<Value>,
    pub calls: Vec<CallEvent>,
}

impl ExecutionTrace {
    /// The entry call's example (always `call_id` 0).
    pub fn entry_example(&self) -> Option<&IoExample> {
        self.calls.iter().map(|c| &c.io).find(|io| io.call_id == 0)
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(RtVal),
}

#[derive(Debug, Clone)]
struct Place {
    alloc: AllocId,
    idx: u64,
    field_path: Vec<usize>,
}

struct Frame {
    func: String,
    depth: u32,
    scopes: Vec<BTreeMap<String, Local>>,
    stack_allocs: Vec<AllocId>,
}

#[derive(Debug, Clone)]
struct Local {
    alloc: AllocId,
    is_array: bool,
}

/// Interpreter configuration plus program indexes.
pub struct Interpreter<'p> {
    program: &'p ProgramAst,
    functions: BTreeMap<String, &'p FunctionDef>,
    structs: BTreeMap<String, crate::ast::StructDef>,
    step_limit: u64,
    max_depth: u32,
}

impl<'p> Interpreter<'p> {
    pub fn new(program: &'p ProgramAst) -> Interpreter<'p> {
        let functions = program
            .functions()
            .map(|f| (f.name.clone(), f))
            .collect();
        let structs = program
            .units
            .iter()
            .filter_map(|u| u.as_struct().map(|s| (s.tag.clone(), s.clone())))
            .collect();
        Interpreter {
            program,
            functions,
            structs,
            step_limit: 20_000_000,
            max_depth: 200,
        }
    }

    pub fn with_step_limit(mut self, limit: u64) -> Interpreter<'p> {
        self.step_limit = limit;
        self
    }

    pub fn structs(&self) -> &BTreeMap<String, crate::ast::StructDef> {
        &self.structs
    }

    /// Execute `entry` on serialized inputs, capturing one I/O example per
    /// project-function call. Faults abort the trace and mark the input
    /// invalid.
    pub fn run(&self, entry: &str, inputs: &[Value]) -> RtResult<ExecutionTrace> {
        let fun = self
            .functions
            .get(entry)
            .ok_or_else(|| RuntimeError::Entry(format!("no function `{entry}`")))?;
        if fun.params.len() != inputs.len() {
            return Err(RuntimeError::Entry(format!(
                "`{entry}` takes {} arguments, {} inputs given",
                fun.params.len(),
                inputs.len()
            )));
        }
        let mut m = Machine {
            interp: self,
            mem: BoundsTable::new(),
            globals: BTreeMap::new(),
            calls: Vec::new(),
            next_call_id: 0,
            steps: 0,
        };
        m.init_globals()?;
        let mut scope = MaterializeScope::default();
        let mut args = Vec::new();
        for (p, v) in fun.params.iter().zip(inputs.iter()) {
            let rt = materialize(v, &p.ty, &mut m.mem, &self.structs, &mut scope)
                .map_err(|e| RuntimeError::Entry(e.0))?;
            args.push(rt);
        }
        m.call_function(entry, args, 0)?;
        Ok(ExecutionTrace {
            entry: entry.to_string(),
            inputs: inputs.to_vec(),
            calls: m.calls,
        })
    }

    /// Replay a single function on materialized pre-state arguments; returns
    /// the post-state arguments and return value. This is the self-consistency
    /// oracle for captured I/O examples.
    pub fn replay(&self, function: &str, pre_args: &[Value]) -> RtResult<(Vec<Value>, Value)> {
        let fun = self
            .functions
            .get(function)
            .ok_or_else(|| RuntimeError::Entry(format!("no function `{function}`")))?;
        if fun.params.len() != pre_args.len() {
            return Err(RuntimeError::Entry("arity mismatch".to_string()));
        }
        let mut m = Machine {
            interp: self,
            mem: BoundsTable::new(),
            globals: BTreeMap::new(),
            calls: Vec::new(),
            next_call_id: 0,
            steps: 0,
        };
        m.init_globals()?;
        let mut scope = MaterializeScope::default();
        let mut args = Vec::new();
        for (p, v) in fun.params.iter().zip(pre_args.iter()) {
            let rt = materialize(v, &p.ty, &mut m.mem, &self.structs, &mut scope)
                .map_err(|e| RuntimeError::Entry(e.0))?;
            args.push(rt);
        }
        m.call_function(function, args, 0)?;
        let ev = m
            .calls
            .iter()
            .find(|c| c.io.call_id == 0)
            .expect("entry call recorded");
        Ok((ev.io.post_args.clone(), ev.io.return_value.clone()))
    }
}

struct Machine<'p, 'i> {
    interp: &'i Interpreter<'p>,
    mem: BoundsTable,
    globals: BTreeMap<String, Local>,
    calls: Vec<CallEvent>,
    next_call_id: u64,
    steps: u64,
}

impl<'p, 'i> Machine<'p, 'i> {
    fn tick(&mut self) -> RtResult<()> {
        self.steps += 1;
        if self.steps > self.interp.step_limit {
            return Err(RuntimeError::StepLimit);
        }
        Ok(())
    }

    fn init_globals(&mut self) -> RtResult<()> {
        let globals: Vec<_> = self
            .interp
            .program
            .units
            .iter()
            .filter_map(|u| match &u.decl {
                UnitDecl::Global { name, ty, init } => Some((name, ty, init)),
                _ => None,
            })
            .collect();
        for (name, ty, init) in globals {
            let mut frame = Frame {
                func: "<global>".to_string(),
                depth: 0,
                scopes: alloc::vec![BTreeMap::new()],
                stack_allocs: Vec::new(),
            };
            let v = self.eval(&mut frame, init)?;
            let v = self.convert(v, ty, "<global init>")?;
            let zero = zero_value(ty, &self.interp.structs).ok_or_else(|| {
                RuntimeError::TypeError {
                    message: "global of unsupported type".to_string(),
                    location: name.to_string(),
                }
            })?;
            let size = elem_size_of(ty, &self.interp.structs).unwrap_or(1);
            let id = self.mem.allocate(ty.clone(), 1, size, Region::Stack, zero);
            self.mem.record_mut(id).expect("fresh").cells[0] = v;
            self.globals.insert(
                name.to_string(),
                Local {
                    alloc: id,
                    is_array: false,
                },
            );
        }
        Ok(())
    }

    // -- call machinery ------------------------------------------------------

    fn call_function(&mut self, name: &str, args: Vec<RtVal>, depth: u32) -> RtResult<RtVal> {
        if depth >= self.interp.max_depth {
            return Err(RuntimeError::StackOverflow);
        }
        let fun = self
            .interp
            .functions
            .get(name)
            .ok_or_else(|| RuntimeError::TypeError {
                message: format!("call to unknown function `{name}`"),
                location: name.to_string(),
            })?;
        if fun.params.len() != args.len() {
            return Err(RuntimeError::TypeError {
                message: format!(
                    "`{name}` takes {} arguments, {} given",
                    fun.params.len(),
                    args.len()
                ),
                location: name.to_string(),
            });
        }
        // Convert to parameter types before anything is observed.
        let mut conv_args = Vec::new();
        for (p, a) in fun.params.iter().zip(args.into_iter()) {
            conv_args.push(self.convert(a, &p.ty, name)?);
        }

        let call_id = self.next_call_id;
        self.next_call_id += 1;

        // Pre-state snapshot.
        let mut pre_scope = SnapshotScope::new();
        let mut pre = Vec::new();
        for a in &conv_args {
            pre.push(
                serialize_rt(a, &self.mem, &self.interp.structs, &mut pre_scope)
                    .map_err(RuntimeError::Serialize)?,
            );
        }
        let fnptr_bindings: Vec<(String, String)> = fun
            .params
            .iter()
            .zip(conv_args.iter())
            .filter_map(|(p, a)| match (&p.ty, a) {
                (CType::FunctionPointer { .. }, RtVal::Fn { name: g }) => {
                    Some((p.name.clone(), g.clone()))
                }
                _ => None,
            })
            .collect();
        let observed_types: Vec<CType> = conv_args
            .iter()
            .map(|a| self.observed_type(a))
            .collect();
        let event_idx = self.calls.len();
        self.calls.push(CallEvent {
            io: IoExample {
                function: name.to_string(),
                call_id,
                pre_args: pre,
                post_args: Vec::new(),
                return_value: Value::void(),
            },
            depth,
            fnptr_bindings,
            observed_types,
        });

        // Bind parameters to fresh stack slots.
        let mut frame = Frame {
            func: name.to_string(),
            depth,
            scopes: alloc::vec![BTreeMap::new()],
            stack_allocs: Vec::new(),
        };
        for (p, a) in fun.params.iter().zip(conv_args.iter()) {
            self.bind_local(&mut frame, &p.name, &p.ty, a.clone(), name)?;
        }

        let flow = self.exec_block(&mut frame, &fun.body, depth)?;
        let ret = match flow {
            Flow::Return(v) => {
                if matches!(fun.ret, CType::Void) {
                    RtVal::Void
                } else {
                    self.convert(v, &fun.ret, name)?
                }
            }
            _ => RtVal::Void,
        };

        // Release this frame's stack slots before observing the post state so
        // escaped pointers to locals surface as serialization errors.
        for id in frame.stack_allocs.drain(..) {
            self.mem.free(id);
        }

        let mut post_scope = SnapshotScope::new();
        let mut post = Vec::new();
        for a in &conv_args {
            post.push(
                serialize_rt(a, &self.mem, &self.interp.structs, &mut post_scope)
                    .map_err(RuntimeError::Serialize)?,
            );
        }
        let ret_val = serialize_rt(&ret, &self.mem, &self.interp.structs, &mut post_scope)
            .map_err(RuntimeError::Serialize)?;
        let ev = &mut self.calls[event_idx];
        ev.io.post_args = post;
        ev.io.return_value = ret_val;
        Ok(ret)
    }

    /// The dynamically observed type of an argument value: pointers report
    /// the backing allocation's element type (recovering the first-cast type
    /// of raw `malloc` blocks), function pointers the bound function's full
    /// signature.
    fn observed_type(&self, v: &RtVal) -> CType {
        match v {
            RtVal::Int { ty, .. } | RtVal::Float { ty, .. } => CType::prim(*ty),
            RtVal::Null { ty } => CType::ptr(ty.clone()),
            RtVal::Ptr { alloc, .. } => {
                let elem = self
                    .mem
                    .record(*alloc)
                    .map(|r| r.element_type.clone())
                    .unwrap_or(CType::Void);
                CType::ptr(elem)
            }
            RtVal::Fn { name } => match self.interp.functions.get(name) {
                Some(f) => CType::fn_ptr(f.param_types(), f.ret.clone()),
                None => CType::fn_ptr(Vec::new(), CType::Void),
            },
            RtVal::StructV { tag, .. } => CType::Struct { tag: tag.clone() },
            RtVal::Void => CType::Void,
        }
    }

    fn bind_local(
        &mut self,
        frame: &mut Frame,
        name: &str,
        ty: &CType,
        value: RtVal,
        loc: &str,
    ) -> RtResult<()> {
        let zero = zero_value(ty, &self.interp.structs).ok_or_else(|| RuntimeError::TypeError {
            message: format!("cannot allocate local of type `{}`", ty.render()),
            location: loc.to_string(),
        });
        // Function-pointer locals hold the value directly via a 1-cell record
        // of pointer size; zero_value has no fnptr default, so seed with the
        // value itself.
        let (zero, seed) = match zero {
            Ok(z) => (z, Some(value)),
            Err(_) if matches!(ty, CType::FunctionPointer { .. }) => (value.clone(), Some(value)),
            Err(e) => return Err(e),
        };
        let size = elem_size_of(ty, &self.interp.structs).unwrap_or(8);
        let id = self.mem.allocate(ty.clone(), 1, size, Region::Stack, zero);
        if let Some(v) = seed {
            self.mem.record_mut(id).expect("fresh").cells[0] = v;
        }
        frame.stack_allocs.push(id);
        frame
            .scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), Local {
                alloc: id,
                is_array: false,
            });
        Ok(())
    }

    // -- statements ----------------------------------------------------------

    fn exec_block(&mut self, frame: &mut Frame, stmts: &[Stmt], depth: u32) -> RtResult<Flow> {
        frame.scopes.push(BTreeMap::new());
        let mut flow = Flow::Normal;
        for s in stmts {
            flow = self.exec_stmt(frame, s, depth)?;
            if !matches!(flow, Flow::Normal) {
                break;
            }
        }
        frame.scopes.pop();
        Ok(flow)
    }

    fn exec_stmt(&mut self, frame: &mut Frame, stmt: &Stmt, depth: u32) -> RtResult<Flow> {
        self.tick()?;
        match stmt {
            Stmt::Decl {
                name,
                ty,
                array_len,
                init,
            } => {
                if let Some(len_expr) = array_len {
                    let len = self.eval(frame, len_expr)?;
                    let len = self.as_index(&len, &frame.func, len_expr)?;
                    let zero = zero_value(ty, &self.interp.structs).ok_or_else(|| {
                        RuntimeError::TypeError {
                            message: "array of unsupported element type".to_string(),
                            location: frame.func.clone(),
                        }
                    })?;
                    let size = elem_size_of(ty, &self.interp.structs).unwrap_or(1);
                    let id = self.mem.allocate(ty.clone(), len, size, Region::Stack, zero);
                    frame.stack_allocs.push(id);
                    frame.scopes.last_mut().expect("scope").insert(
                        name.clone(),
                        Local {
                            alloc: id,
                            is_array: true,
                        },
                    );
                    return Ok(Flow::Normal);
                }
                let value = match init {
                    Some(e) => {
                        let v = self.eval(frame, e)?;
                        self.convert(v, ty, &frame.func)?
                    }
                    None => zero_value(ty, &self.interp.structs).ok_or_else(|| {
                        RuntimeError::TypeError {
                            message: format!("cannot default-init `{}`", ty.render()),
                            location: frame.func.clone(),
                        }
                    })?,
                };
                self.bind_local(frame, name, ty, value, &frame.func.clone())?;
                Ok(Flow::Normal)
            }
            Stmt::Assign { target, value } => {
                let v = self.eval(frame, value)?;
                let place = self.place(frame, target)?;
                self.write_place(&place, v, &frame.func, target)?;
                Ok(Flow::Normal)
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let c = self.eval(frame, cond)?;
                if self.truthy(&c) {
                    self.exec_block(frame, then_body, depth)
                } else {
                    self.exec_block(frame, else_body, depth)
                }
            }
            Stmt::While { cond, body } => loop {
                let c = self.eval(frame, cond)?;
                if !self.truthy(&c) {
                    return Ok(Flow::Normal);
                }
                match self.exec_block(frame, body, depth)? {
                    Flow::Break => return Ok(Flow::Normal),
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    Flow::Normal | Flow::Continue => {}
                }
            },
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                frame.scopes.push(BTreeMap::new());
                if let Some(s) = init {
                    self.exec_stmt(frame, s, depth)?;
                }
                let flow = loop {
                    if let Some(c) = cond {
                        let v = self.eval(frame, c)?;
                        if !self.truthy(&v) {
                            break Flow::Normal;
                        }
                    }
                    match self.exec_block(frame, body, depth)? {
                        Flow::Break => break Flow::Normal,
                        Flow::Return(v) => break Flow::Return(v),
                        Flow::Normal | Flow::Continue => {}
                    }
                    if let Some(s) = step {
                        self.exec_stmt(frame, s, depth)?;
                    }
                };
                frame.scopes.pop();
                Ok(flow)
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(frame, e)?,
                    None => RtVal::Void,
                };
                Ok(Flow::Return(v))
            }
            Stmt::Break => Ok(Flow::Break),
            Stmt::Continue => Ok(Flow::Continue),
            Stmt::ExprStmt(e) => {
                self.eval(frame, e)?;
                Ok(Flow::Normal)
            }
            Stmt::Block(b) => self.exec_block(frame, b, depth),
        }
    }

    // -- expressions ---------------------------------------------------------

    fn eval(&mut self, frame: &mut Frame, expr: &Expr) -> RtResult<RtVal> {
        self.tick()?;
        match expr {
            Expr::IntLit(v) => Ok(RtVal::Int {
                v: *v,
                ty: Prim::Int,
            }),
            Expr::FloatLit(v) => Ok(RtVal::Float {
                v: *v,
                ty: Prim::Double,
            }),
            Expr::CharLit(c) => Ok(RtVal::Int {
                v: *c as i64,
                ty: Prim::Char,
            }),
            Expr::StrLit(bytes) => {
                let id = self.mem.allocate(
                    CType::prim(Prim::Char),
                    bytes.len() as u64 + 1,
                    1,
                    Region::Heap,
                    RtVal::Int {
                        v: 0,
                        ty: Prim::Char,
                    },
                );
                let rec = self.mem.record_mut(id).expect("fresh");
                for (i, b) in bytes.iter().enumerate() {
                    rec.cells[i] = RtVal::Int {
                        v: *b as i8 as i64,
                        ty: Prim::Char,
                    };
                }
                Ok(RtVal::Ptr {
                    alloc: id,
                    offset: 0,
                    ty: CType::prim(Prim::Char),
                })
            }
            Expr::Ident(name) => self.read_var(frame, name, expr),
            Expr::Unary(op, inner) => match op {
                UnaryOp::Neg => {
                    let v = self.eval(frame, inner)?;
                    self.negate(v, &frame.func, expr)
                }
                UnaryOp::Not => {
                    let v = self.eval(frame, inner)?;
                    Ok(RtVal::Int {
                        v: if self.truthy(&v) { 0 } else { 1 },
                        ty: Prim::Int,
                    })
                }
                UnaryOp::Deref => {
                    let place = self.place(frame, expr)?;
                    self.read_place(&place, &frame.func, expr)
                }
                UnaryOp::AddrOf => {
                    let place = self.place(frame, inner)?;
                    if !place.field_path.is_empty() {
                        return Err(RuntimeError::TypeError {
                            message: "address-of a struct field is unsupported".to_string(),
                            location: self.loc(&frame.func, expr),
                        });
                    }
                    let rec = self.mem.record(place.alloc).expect("place record");
                    Ok(RtVal::Ptr {
                        alloc: place.alloc,
                        offset: place.idx,
                        ty: rec.element_type.clone(),
                    })
                }
            },
            Expr::Binary(op, a, b) => {
                if op.is_logical() {
                    let lhs = self.eval(frame, a)?;
                    let lt = self.truthy(&lhs);
                    return Ok(match (op, lt) {
                        (BinOp::And, false) => RtVal::Int { v: 0, ty: Prim::Int },
                        (BinOp::Or, true) => RtVal::Int { v: 1, ty: Prim::Int },
                        _ => {
                            let rhs = self.eval(frame, b)?;
                            RtVal::Int {
                                v: if self.truthy(&rhs) { 1 } else { 0 },
                                ty: Prim::Int,
                            }
                        }
                    });
                }
                let lhs = self.eval(frame, a)?;
                let rhs = self.eval(frame, b)?;
                self.binop(*op, lhs, rhs, &frame.func, expr)
            }
            Expr::Index(..) | Expr::Member(..) | Expr::Arrow(..) => {
                let place = self.place(frame, expr)?;
                self.read_place(&place, &frame.func, expr)
            }
            Expr::Call(name, args) => {
                // Local function-pointer variables shadow project functions.
                let fn_from_var = self.lookup_local(frame, name).map(|l| l.alloc).and_then(|id| {
                    let rec = self.mem.record(id)?;
                    match rec.cells.first() {
                        Some(RtVal::Fn { name }) => Some(name.clone()),
                        _ => None,
                    }
                });
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.eval(frame, a)?);
                }
                if let Some(target) = fn_from_var {
                    return self.call_function(&target, vals, frame.depth + 1);
                }
                if self.interp.functions.contains_key(name) {
                    return self.call_function(name, vals, frame.depth + 1);
                }
                if is_builtin(name) {
                    return self.call_builtin(name, vals, &frame.func, expr);
                }
                Err(RuntimeError::TypeError {
                    message: format!("call to unknown function `{name}`"),
                    location: self.loc(&frame.func, expr),
                })
            }
            Expr::CallPtr(callee, args) => {
                let f = self.eval(frame, callee)?;
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.eval(frame, a)?);
                }
                match f {
                    RtVal::Fn { name } => {
                        self.call_function(&name, vals, frame.depth + 1)
                    }
                    RtVal::Null { .. } => Err(RuntimeError::Fault {
                        kind: FaultKind::NullDeref,
                        location: self.loc(&frame.func, expr),
                    }),
                    _ => Err(RuntimeError::TypeError {
                        message: "callee is not a function pointer".to_string(),
                        location: self.loc(&frame.func, expr),
                    }),
                }
            }
            Expr::Cast(ty, inner) => {
                let v = self.eval(frame, inner)?;
                self.convert(v, ty, &frame.func)
            }
            Expr::SizeOf(ty) => {
                let size = elem_size_of(ty, &self.interp.structs).ok_or_else(|| {
                    RuntimeError::TypeError {
                        message: format!("sizeof of incomplete type `{}`", ty.render()),
                        location: frame.func.clone(),
                    }
                })?;
                Ok(RtVal::Int {
                    v: size as i64,
                    ty: Prim::SizeT,
                })
            }
        }
    }

    fn lookup_local<'f>(&self, frame: &'f Frame, name: &str) -> Option<&'f Local> {
        frame.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn read_var(&mut self, frame: &mut Frame, name: &str, expr: &Expr) -> RtResult<RtVal> {
        if let Some(local) = self.lookup_local(frame, name).cloned() {
            let rec = self.mem.record(local.alloc).expect("local record");
            if local.is_array {
                return Ok(RtVal::Ptr {
                    alloc: local.alloc,
                    offset: 0,
                    ty: rec.element_type.clone(),
                });
            }
            return Ok(rec.cells[0].clone());
        }
        if let Some(g) = self.globals.get(name).cloned() {
            let rec = self.mem.record(g.alloc).expect("global record");
            return Ok(rec.cells[0].clone());
        }
        if self.interp.functions.contains_key(name) {
            return Ok(RtVal::Fn {
                name: name.to_string(),
            });
        }
        Err(RuntimeError::TypeError {
            message: format!("unknown identifier `{name}`"),
            location: self.loc(&frame.func, expr),
        })
    }

    // -- places ---------------------------------------------------------------

    fn place(&mut self, frame: &mut Frame, expr: &Expr) -> RtResult<Place> {
        match expr {
            Expr::Ident(name) => {
                if let Some(local) = self.lookup_local(frame, name).cloned() {
                    if local.is_array {
                        return Err(RuntimeError::TypeError {
                            message: format!("array `{name}` is not assignable"),
                            location: frame.func.clone(),
                        });
                    }
                    return Ok(Place {
                        alloc: local.alloc,
                        idx: 0,
                        field_path: Vec::new(),
                    });
                }
                if let Some(g) = self.globals.get(name).cloned() {
                    return Ok(Place {
                        alloc: g.alloc,
                        idx: 0,
                        field_path: Vec::new(),
                    });
                }
                Err(RuntimeError::TypeError {
                    message: format!("unknown identifier `{name}`"),
                    location: self.loc(&frame.func, expr),
                })
            }
            Expr::Unary(UnaryOp::Deref, inner) => {
                let v = self.eval(frame, inner)?;
                self.pointer_place(v, 0, &frame.func, expr)
            }
            Expr::Index(base, idx) => {
                let v = self.eval(frame, base)?;
                let i = self.eval(frame, idx)?;
                let delta = self.as_signed_index(&i, &frame.func, idx)?;
                self.pointer_place(v, delta, &frame.func, expr)
            }
            Expr::Member(base, field) => {
                let mut place = self.place(frame, base)?;
                let fidx = self.field_index_at(&place, field, &frame.func, expr)?;
                place.field_path.push(fidx);
                Ok(place)
            }
            Expr::Arrow(base, field) => {
                let v = self.eval(frame, base)?;
                let mut place = self.pointer_place(v, 0, &frame.func, expr)?;
                let fidx = self.field_index_at(&place, field, &frame.func, expr)?;
                place.field_path.push(fidx);
                Ok(place)
            }
            other => Err(RuntimeError::TypeError {
                message: format!("`{}` is not an lvalue", print_expr(other)),
                location: frame.func.clone(),
            }),
        }
    }

    fn pointer_place(&self, v: RtVal, delta: i64, func: &str, expr: &Expr) -> RtResult<Place> {
        match v {
            RtVal::Ptr { alloc, offset, .. } => {
                let idx = offset as i64 + delta;
                if idx < 0 {
                    return Err(RuntimeError::Fault {
                        kind: FaultKind::OutOfBounds,
                        location: self.loc(func, expr),
                    });
                }
                Ok(Place {
                    alloc,
                    idx: idx as u64,
                    field_path: Vec::new(),
                })
            }
            RtVal::Null { .. } => Err(RuntimeError::Fault {
                kind: FaultKind::NullDeref,
                location: self.loc(func, expr),
            }),
            other => Err(RuntimeError::TypeError {
                message: format!("cannot dereference `{}`", other.type_render()),
                location: self.loc(func, expr),
            }),
        }
    }

    fn field_index_at(
        &self,
        place: &Place,
        field: &str,
        func: &str,
        expr: &Expr,
    ) -> RtResult<usize> {
        // Resolve the struct type at the current path position.
        let rec = self.mem.record(place.alloc).ok_or_else(|| RuntimeError::TypeError {
            message: "dangling place".to_string(),
            location: self.loc(func, expr),
        })?;
        let mut ty = rec.element_type.clone();
        for step in &place.field_path {
            let CType::Struct { tag } = &ty else {
                return Err(RuntimeError::TypeError {
                    message: "member access on non-struct".to_string(),
                    location: self.loc(func, expr),
                });
            };
            let def = self.interp.structs.get(tag).ok_or_else(|| RuntimeError::TypeError {
                message: format!("unknown struct `{tag}`"),
                location: self.loc(func, expr),
            })?;
            ty = def.fields[*step].ty.clone();
        }
        let CType::Struct { tag } = &ty else {
            return Err(RuntimeError::TypeError {
                message: format!("member `{field}` on non-struct"),
                location: self.loc(func, expr),
            });
        };
        let def = self.interp.structs.get(tag).ok_or_else(|| RuntimeError::TypeError {
            message: format!("unknown struct `{tag}`"),
            location: self.loc(func, expr),
        })?;
        def.field_index(field).ok_or_else(|| RuntimeError::TypeError {
            message: format!("struct `{tag}` has no field `{field}`"),
            location: self.loc(func, expr),
        })
    }

    fn check_access(&self, place: &Place, func: &str, expr: &Expr) -> RtResult<()> {
        let rec = self.mem.record(place.alloc).ok_or_else(|| RuntimeError::TypeError {
            message: "dangling allocation".to_string(),
            location: self.loc(func, expr),
        })?;
        if rec.freed {
            return Err(RuntimeError::Fault {
                kind: FaultKind::UseAfterFree,
                location: self.loc(func, expr),
            });
        }
        if place.idx >= rec.element_count {
            return Err(RuntimeError::Fault {
                kind: FaultKind::OutOfBounds,
                location: self.loc(func, expr),
            });
        }
        Ok(())
    }

    fn read_place(&mut self, place: &Place, func: &str, expr: &Expr) -> RtResult<RtVal> {
        self.check_access(place, func, expr)?;
        let rec = self.mem.record(place.alloc).expect("checked");
        let mut v = &rec.cells[place.idx as usize];
        for step in &place.field_path {
            let RtVal::StructV { fields, .. } = v else {
                return Err(RuntimeError::TypeError {
                    message: "field path into non-struct cell".to_string(),
                    location: self.loc(func, expr),
                });
            };
            v = &fields[*step];
        }
        Ok(v.clone())
    }

    /// Declared type at a place, for assignment conversion.
    fn place_type(&self, place: &Place, func: &str, expr: &Expr) -> RtResult<CType> {
        let rec = self.mem.record(place.alloc).expect("checked");
        let mut ty = rec.element_type.clone();
        for step in &place.field_path {
            let CType::Struct { tag } = &ty else {
                return Err(RuntimeError::TypeError {
                    message: "field path into non-struct".to_string(),
                    location: self.loc(func, expr),
                });
            };
            let def = self.interp.structs.get(tag).expect("struct known");
            ty = def.fields[*step].ty.clone();
        }
        Ok(ty)
    }

    fn write_place(&mut self, place: &Place, value: RtVal, func: &str, expr: &Expr) -> RtResult<()> {
        self.check_access(place, func, expr)?;
        let ty = self.place_type(place, func, expr)?;
        let value = self.convert(value, &ty, func)?;
        let rec = self.mem.record_mut(place.alloc).expect("checked");
        let mut slot = &mut rec.cells[place.idx as usize];
        for step in &place.field_path {
            let RtVal::StructV { fields, .. } = slot else {
                return Err(RuntimeError::TypeError {
                    message: "field path into non-struct cell".to_string(),
                    location: func.to_string(),
                });
            };
            slot = &mut fields[*step];
        }
        *slot = value;
        Ok(())
    }

    // -- conversions and arithmetic -------------------------------------------

    fn truthy(&self, v: &RtVal) -> bool {
        match v {
            RtVal::Int { v, .. } => *v != 0,
            RtVal::Float { v, .. } => *v != 0.0,
            RtVal::Ptr { .. } | RtVal::Fn { .. } => true,
            RtVal::Null { .. } => false,
            RtVal::StructV { .. } | RtVal::Void => false,
        }
    }

    fn normalize_int(&self, v: i64, p: Prim) -> i64 {
        match p {
            Prim::Int => v as i32 as i64,
            Prim::UInt => v as u32 as i64,
            Prim::Char => v as i8 as i64,
            Prim::UChar => v as u8 as i64,
            Prim::SizeT => v, // stored as the two's-complement image of u64
            Prim::Float | Prim::Double => v,
        }
    }

    fn convert(&mut self, v: RtVal, ty: &CType, loc: &str) -> RtResult<RtVal> {
        let err = |m: String| RuntimeError::TypeError {
            message: m,
            location: loc.to_string(),
        };
        match (v, ty) {
            (v, CType::Void) => {
                let _ = v;
                Ok(RtVal::Void)
            }
            (RtVal::Int { v, .. }, CType::Primitive { prim }) if prim.is_float() => {
                let f = v as f64;
                Ok(RtVal::Float {
                    v: if *prim == Prim::Float { f as f32 as f64 } else { f },
                    ty: *prim,
                })
            }
            (RtVal::Int { v, .. }, CType::Primitive { prim }) => Ok(RtVal::Int {
                v: self.normalize_int(v, *prim),
                ty: *prim,
            }),
            (RtVal::Float { v, .. }, CType::Primitive { prim }) if prim.is_float() => {
                Ok(RtVal::Float {
                    v: if *prim == Prim::Float { v as f32 as f64 } else { v },
                    ty: *prim,
                })
            }
            (RtVal::Float { v, .. }, CType::Primitive { prim }) => {
                // Same saturating semantics as Rust `as` casts.
                let iv = match prim {
                    Prim::Int => v as i32 as i64,
                    Prim::UInt => v as u32 as i64,
                    Prim::Char => v as i8 as i64,
                    Prim::UChar => v as u8 as i64,
                    Prim::SizeT => v as u64 as i64,
                    _ => unreachable!(),
                };
                Ok(RtVal::Int { v: iv, ty: *prim })
            }
            (RtVal::Int { v, .. }, CType::Pointer { inner }) => {
                if v == 0 {
                    Ok(RtVal::Null {
                        ty: (**inner).clone(),
                    })
                } else {
                    Err(err("non-zero integer used as pointer".to_string()))
                }
            }
            (RtVal::Int { v, .. }, CType::FunctionPointer { .. }) if v == 0 => Ok(RtVal::Null {
                ty: CType::Void,
            }),
            (RtVal::Null { .. }, CType::Pointer { inner }) => Ok(RtVal::Null {
                ty: (**inner).clone(),
            }),
            (RtVal::Ptr { alloc, offset, ty: pty }, CType::Pointer { inner }) => {
                let want = (**inner).clone();
                if pty == want {
                    return Ok(RtVal::Ptr {
                        alloc,
                        offset,
                        ty: want,
                    });
                }
                if matches!(want, CType::Void) {
                    return Ok(RtVal::Ptr {
                        alloc,
                        offset,
                        ty: CType::Void,
                    });
                }
                // Retype an untyped allocation on its first cast.
                let rec = self.mem.record(alloc).ok_or_else(|| err("dangling cast".into()))?;
                if !rec.typed {
                    if offset != 0 {
                        return Err(err("cast of interior pointer".to_string()));
                    }
                    let size = elem_size_of(&want, &self.interp.structs)
                        .ok_or_else(|| err("unsized cast target".into()))?;
                    let zero = zero_value(&want, &self.interp.structs)
                        .ok_or_else(|| err("cast to unsupported element".into()))?;
                    if !self.mem.retype(alloc, want.clone(), size, zero) {
                        return Err(err("allocation size not divisible by element size".into()));
                    }
                    return Ok(RtVal::Ptr {
                        alloc,
                        offset,
                        ty: want,
                    });
                }
                if rec.element_type == want {
                    Ok(RtVal::Ptr {
                        alloc,
                        offset,
                        ty: want,
                    })
                } else {
                    Err(err(format!(
                        "pointer cast changes element type `{}` -> `{}` (type punning)",
                        rec.element_type.render(),
                        want.render()
                    )))
                }
            }
            (RtVal::Fn { name }, CType::FunctionPointer { params, ret }) => {
                let fun = self
                    .interp
                    .functions
                    .get(&name)
                    .ok_or_else(|| err(format!("unknown function `{name}`")))?;
                let sig_ok = fun.params.len() == params.len()
                    && fun
                        .params
                        .iter()
                        .zip(params.iter())
                        .all(|(p, t)| &p.ty == t)
                    && fun.ret == **ret;
                if sig_ok {
                    Ok(RtVal::Fn { name })
                } else {
                    Err(err(format!(
                        "function `{name}` does not match the pointer signature"
                    )))
                }
            }
            (RtVal::StructV { tag, fields }, CType::Struct { tag: want }) if tag == *want => {
                Ok(RtVal::StructV { tag, fields })
            }
            (v, ty) => Err(err(format!(
                "cannot convert `{}` to `{}`",
                v.type_render(),
                ty.render()
            ))),
        }
    }

    fn negate(&self, v: RtVal, func: &str, expr: &Expr) -> RtResult<RtVal> {
        match v {
            RtVal::Int { v, ty } => {
                let p = if matches!(ty, Prim::Char | Prim::UChar) {
                    Prim::Int
                } else {
                    ty
                };
                Ok(RtVal::Int {
                    v: self.normalize_int(v.wrapping_neg(), p),
                    ty: p,
                })
            }
            RtVal::Float { v, ty } => Ok(RtVal::Float { v: -v, ty }),
            other => Err(RuntimeError::TypeError {
                message: format!("cannot negate `{}`", other.type_render()),
                location: self.loc(func, expr),
            }),
        }
    }

    fn as_index(&self, v: &RtVal, func: &str, expr: &Expr) -> RtResult<u64> {
        match v {
            RtVal::Int { v, .. } if *v >= 0 => Ok(*v as u64),
            _ => Err(RuntimeError::TypeError {
                message: "expected a non-negative integer".to_string(),
                location: self.loc(func, expr),
            }),
        }
    }

    fn as_signed_index(&self, v: &RtVal, func: &str, expr: &Expr) -> RtResult<i64> {
        match v {
            RtVal::Int { v, .. } => Ok(*v),
            _ => Err(RuntimeError::TypeError {
                message: "index must be an integer".to_string(),
                location: self.loc(func, expr),
            }),
        }
    }

    fn binop(&self, op: BinOp, lhs: RtVal, rhs: RtVal, func: &str, expr: &Expr) -> RtResult<RtVal> {
        use RtVal::*;
        // Pointer arithmetic and comparison first.
        match (&lhs, &rhs) {
            (Ptr { .. } | Null { .. } | Fn { .. }, _) | (_, Ptr { .. } | Null { .. } | Fn { .. }) => {
                return self.pointer_binop(op, lhs, rhs, func, expr);
            }
            _ => {}
        }
        let (a_ty, b_ty) = match (&lhs, &rhs) {
            (Int { ty: a, .. } | Float { ty: a, .. }, Int { ty: b, .. } | Float { ty: b, .. }) => {
                (*a, *b)
            }
            _ => {
                return Err(RuntimeError::TypeError {
                    message: "non-numeric operands".to_string(),
                    location: self.loc(func, expr),
                })
            }
        };
        let result = promote(a_ty, b_ty);
        if op.is_comparison() {
            let outcome = if result.is_float() {
                let (x, y) = (self.to_f64(&lhs, result), self.to_f64(&rhs, result));
                compare_f64(op, x, y)
            } else if result == Prim::SizeT || result == Prim::UInt {
                let (x, y) = (self.to_u64(&lhs, result), self.to_u64(&rhs, result));
                compare_ord(op, x, y)
            } else {
                let (x, y) = (self.to_i64(&lhs), self.to_i64(&rhs));
                compare_ord(op, x, y)
            };
            return Ok(Int {
                v: outcome as i64,
                ty: Prim::Int,
            });
        }
        if result.is_float() {
            let x = self.to_f64(&lhs, result);
            let y = self.to_f64(&rhs, result);
            if matches!(op, BinOp::Rem) {
                return Err(RuntimeError::TypeError {
                    message: "`%` on floating operands".to_string(),
                    location: self.loc(func, expr),
                });
            }
            let r = if result == Prim::Float {
                let (xf, yf) = (x as f32, y as f32);
                let rf = match op {
                    BinOp::Add => xf + yf,
                    BinOp::Sub => xf - yf,
                    BinOp::Mul => xf * yf,
                    BinOp::Div => xf / yf,
                    _ => unreachable!(),
                };
                rf as f64
            } else {
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    _ => unreachable!(),
                }
            };
            return Ok(Float { v: r, ty: result });
        }
        // Integer math, wrapping in the promoted width.
        let x = self.to_i64(&lhs);
        let y = self.to_i64(&rhs);
        if matches!(op, BinOp::Div | BinOp::Rem) && y == 0 {
            return Err(RuntimeError::DivByZero {
                location: self.loc(func, expr),
            });
        }
        let wide = match op {
            BinOp::Add => x.wrapping_add(y),
            BinOp::Sub => x.wrapping_sub(y),
            BinOp::Mul => x.wrapping_mul(y),
            BinOp::Div => {
                if result == Prim::UInt || result == Prim::SizeT {
                    ((x as u64) / (y as u64)) as i64
                } else {
                    x.wrapping_div(y)
                }
            }
            BinOp::Rem => {
                if result == Prim::UInt || result == Prim::SizeT {
                    ((x as u64) % (y as u64)) as i64
                } else {
                    x.wrapping_rem(y)
                }
            }
            _ => unreachable!(),
        };
        Ok(Int {
            v: self.normalize_int(wide, result),
            ty: result,
        })
    }

    fn pointer_binop(
        &self,
        op: BinOp,
        lhs: RtVal,
        rhs: RtVal,
        func: &str,
        expr: &Expr,
    ) -> RtResult<RtVal> {
        use RtVal::*;
        let boolean = |b: bool| Int {
            v: b as i64,
            ty: Prim::Int,
        };
        match op {
            BinOp::Add | BinOp::Sub => match (lhs, rhs) {
                (Ptr { alloc, offset, ty }, Int { v, .. }) => {
                    let delta = if op == BinOp::Add { v } else { -v };
                    let idx = offset as i64 + delta;
                    if idx < 0 {
                        return Err(RuntimeError::Fault {
                            kind: FaultKind::OutOfBounds,
                            location: self.loc(func, expr),
                        });
                    }
                    Ok(Ptr {
                        alloc,
                        offset: idx as u64,
                        ty,
                    })
                }
                (Int { v, .. }, Ptr { alloc, offset, ty }) if op == BinOp::Add => {
                    let idx = offset as i64 + v;
                    if idx < 0 {
                        return Err(RuntimeError::Fault {
                            kind: FaultKind::OutOfBounds,
                            location: self.loc(func, expr),
                        });
                    }
                    Ok(Ptr {
                        alloc,
                        offset: idx as u64,
                        ty,
                    })
                }
                _ => Err(RuntimeError::TypeError {
                    message: "unsupported pointer arithmetic".to_string(),
                    location: self.loc(func, expr),
                }),
            },
            BinOp::Eq | BinOp::Ne => {
                let equal = match (&lhs, &rhs) {
                    (Ptr { alloc: a, offset: o1, .. }, Ptr { alloc: b, offset: o2, .. }) => {
                        a == b && o1 == o2
                    }
                    (Null { .. }, Null { .. }) => true,
                    (Ptr { .. }, Null { .. }) | (Null { .. }, Ptr { .. }) => false,
                    (Null { .. }, Int { v, .. }) | (Int { v, .. }, Null { .. }) => *v == 0,
                    (Ptr { .. }, Int { v, .. }) | (Int { v, .. }, Ptr { .. }) => {
                        if *v != 0 {
                            return Err(RuntimeError::TypeError {
                                message: "pointer compared to non-zero integer".to_string(),
                                location: self.loc(func, expr),
                            });
                        }
                        false
                    }
                    (Fn { name: a }, Fn { name: b }) => a == b,
                    (Fn { .. }, Int { v, .. }) | (Int { v, .. }, Fn { .. }) => {
                        if *v != 0 {
                            return Err(RuntimeError::TypeError {
                                message: "function pointer compared to non-zero integer"
                                    .to_string(),
                                location: self.loc(func, expr),
                            });
                        }
                        false
                    }
                    (Fn { .. }, Null { .. }) | (Null { .. }, Fn { .. }) => false,
                    _ => {
                        return Err(RuntimeError::TypeError {
                            message: "unsupported pointer comparison".to_string(),
                            location: self.loc(func, expr),
                        })
                    }
                };
                Ok(boolean(if op == BinOp::Eq { equal } else { !equal }))
            }
            _ => Err(RuntimeError::TypeError {
                message: format!("operator `{}` is not defined on pointers", op.symbol()),
                location: self.loc(func, expr),
            }),
        }
    }

    fn to_f64(&self, v: &RtVal, result: Prim) -> f64 {
        match v {
            RtVal::Float { v, ty } => {
                if *ty == Prim::Float && result == Prim::Float {
                    *v as f32 as f64
                } else {
                    *v
                }
            }
            RtVal::Int { v, .. } => *v as f64,
            _ => 0.0,
        }
    }

    fn to_i64(&self, v: &RtVal) -> i64 {
        match v {
            RtVal::Int { v, .. } => *v,
            RtVal::Float { v, .. } => *v as i64,
            _ => 0,
        }
    }

    fn to_u64(&self, v: &RtVal, _result: Prim) -> u64 {
        match v {
            RtVal::Int { v, ty } => match ty {
                Prim::SizeT => *v as u64,
                Prim::UInt => *v as u32 as u64,
                _ => *v as u64,
            },
            RtVal::Float { v, .. } => *v as u64,
            _ => 0,
        }
    }

    // -- builtins --------------------------------------------------------------

    fn call_builtin(
        &mut self,
        name: &str,
        mut args: Vec<RtVal>,
        func: &str,
        expr: &Expr,
    ) -> RtResult<RtVal> {
        let loc = self.loc(func, expr);
        let type_err = |m: &str| RuntimeError::TypeError {
            message: m.to_string(),
            location: loc.clone(),
        };
        match name {
            "malloc" => {
                if args.len() != 1 {
                    return Err(type_err("malloc takes one argument"));
                }
                let n = match &args[0] {
                    RtVal::Int { v, .. } if *v > 0 => *v as u64,
                    _ => return Err(type_err("malloc size must be a positive integer")),
                };
                let id = self.mem.allocate_raw(n);
                Ok(RtVal::Ptr {
                    alloc: id,
                    offset: 0,
                    ty: CType::Void,
                })
            }
            "free" => {
                if args.len() != 1 {
                    return Err(type_err("free takes one argument"));
                }
                match args.remove(0) {
                    RtVal::Null { .. } => Ok(RtVal::Void),
                    RtVal::Ptr { alloc, offset, .. } => {
                        if offset != 0 {
                            return Err(type_err("free of interior pointer"));
                        }
                        if self.mem.free(alloc) {
                            Ok(RtVal::Void)
                        } else {
                            Err(RuntimeError::Fault {
                                kind: FaultKind::DoubleFree,
                                location: loc,
                            })
                        }
                    }
                    _ => Err(type_err("free expects a pointer")),
                }
            }
            "min" => {
                if args.len() != 2 {
                    return Err(type_err("min takes two arguments"));
                }
                let b = args.pop().expect("two args");
                let a = args.pop().expect("two args");
                let lt = self.binop(BinOp::Lt, a.clone(), b.clone(), func, expr)?;
                Ok(if self.truthy(&lt) { a } else { b })
            }
            "toupper" => {
                if args.len() != 1 {
                    return Err(type_err("toupper takes one argument"));
                }
                match &args[0] {
                    RtVal::Int { v, .. } => {
                        let c = *v;
                        let up = if (97..=122).contains(&c) { c - 32 } else { c };
                        Ok(RtVal::Int {
                            v: up,
                            ty: Prim::Int,
                        })
                    }
                    _ => Err(type_err("toupper expects an integer")),
                }
            }
            "memcpy" => {
                if args.len() != 3 {
                    return Err(type_err("memcpy takes three arguments"));
                }
                let n = match &args[2] {
                    RtVal::Int { v, .. } if *v >= 0 => *v as u64,
                    _ => return Err(type_err("memcpy length must be non-negative")),
                };
                let (dst, src) = (args[0].clone(), args[1].clone());
                let (RtVal::Ptr { alloc: d, offset: doff, .. }, RtVal::Ptr { alloc: s, offset: soff, .. }) =
                    (dst.clone(), src)
                else {
                    return Err(type_err("memcpy expects pointer arguments"));
                };
                let (elem_ty, elem_size, scount, sfreed) = {
                    let srec = self.mem.record(s).ok_or_else(|| type_err("dangling source"))?;
                    let size = elem_size_of(&srec.element_type, &self.interp.structs)
                        .ok_or_else(|| type_err("unsized element"))?;
                    (srec.element_type.clone(), size, srec.element_count, srec.freed)
                };
                let (dcount, dfreed, d_elem) = {
                    let drec = self.mem.record(d).ok_or_else(|| type_err("dangling dest"))?;
                    (drec.element_count, drec.freed, drec.element_type.clone())
                };
                if sfreed || dfreed {
                    return Err(RuntimeError::Fault {
                        kind: FaultKind::UseAfterFree,
                        location: loc,
                    });
                }
                if d_elem != elem_ty {
                    return Err(type_err("memcpy between different element types"));
                }
                if elem_size == 0 || n % elem_size != 0 {
                    return Err(type_err("memcpy length not a multiple of element size"));
                }
                let count = n / elem_size;
                if soff + count > scount || doff + count > dcount {
                    return Err(RuntimeError::Fault {
                        kind: FaultKind::OutOfBounds,
                        location: loc,
                    });
                }
                let cells: Vec<RtVal> = {
                    let srec = self.mem.record(s).expect("checked");
                    srec.cells[soff as usize..(soff + count) as usize].to_vec()
                };
                let drec = self.mem.record_mut(d).expect("checked");
                for (i, c) in cells.into_iter().enumerate() {
                    drec.cells[doff as usize + i] = c;
                }
                Ok(dst)
            }
            "assert" => {
                if args.len() != 1 {
                    return Err(type_err("assert takes one argument"));
                }
                if self.truthy(&args[0]) {
                    Ok(RtVal::Void)
                } else {
                    Err(RuntimeError::AssertFailure { location: loc })
                }
            }
            "printf" => Ok(RtVal::Int {
                v: 0,
                ty: Prim::Int,
            }),
            other => Err(type_err(&format!("unknown builtin `{other}`"))),
        }
    }

    fn loc(&self, func: &str, expr: &Expr) -> String {
        format!("{func}: {}", print_expr(expr))
    }
}

/// C-ish usual arithmetic conversions over the supported prim set.
fn promote(a: Prim, b: Prim) -> Prim {
    fn rank(p: Prim) -> u8 {
        match p {
            Prim::Double => 6,
            Prim::Float => 5,
            Prim::SizeT => 4,
            Prim::UInt => 3,
            Prim::Int | Prim::Char | Prim::UChar => 2,
        }
    }
    let (ra, rb) = (rank(a), rank(b));
    let top = if ra >= rb { a } else { b };
    match top {
        Prim::Char | Prim::UChar => Prim::Int,
        other => other,
    }
}

fn compare_f64(op: BinOp, x: f64, y: f64) -> bool {
    match op {
        BinOp::Lt => x < y,
        BinOp::Le => x <= y,
        BinOp::Gt => x > y,
        BinOp::Ge => x >= y,
        BinOp::Eq => x == y,
        BinOp::Ne => x != y,
        _ => unreachable!(),
    }
}

fn compare_ord<T: PartialOrd + PartialEq>(op: BinOp, x: T, y: T) -> bool {
    match op {
        BinOp::Lt => x < y,
        BinOp::Le => x <= y,
        BinOp::Gt => x > y,
        BinOp::Ge => x >= y,
        BinOp::Eq => x == y,
        BinOp::Ne => x != y,
        _ => unreachable!(),
    }
}

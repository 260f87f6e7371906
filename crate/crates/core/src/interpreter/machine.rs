use std::collections::{BTreeMap, VecDeque};

use crate::program::{BinaryOp, Block, BlockId, DataType, Expr, FileOp, FileOpKind, Program, Stmt, UnaryOp};

use super::format::{parse_format, render, scan, Piece};
use super::memory::{Memory, Origin, Ptr, Value};
use super::{Fault, RunLimits};

/// Deepest chain of nested user function calls.
pub const MAX_CALL_DEPTH: usize = 512;

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

type Scope = Vec<(String, usize, DataType)>;

struct OpenFile {
    name: String,
    read: bool,
    write: bool,
    pos: usize,
    open: bool,
}

struct Place {
    obj: usize,
    off: i64,
    ty: DataType,
}

enum Num {
    I(i32),
    F(f64),
}

pub(super) struct Machine<'p> {
    mem: Memory,
    globals: Scope,
    frames: Vec<Vec<Scope>>,
    functions: BTreeMap<&'p str, &'p Block>,
    entry: &'p str,
    max_steps: u64,
    max_output: usize,
    pub steps: u64,
    pub stdout: Vec<u8>,
    stdin: VecDeque<String>,
    pub files: BTreeMap<String, Vec<u8>>,
    open: Vec<OpenFile>,
    pub current: Option<&'p BlockId>,
}

fn collect_functions<'p>(blocks: &'p [Block], out: &mut BTreeMap<&'p str, &'p Block>) {
    for b in blocks {
        if let Stmt::FunctionDef { name, .. } = &b.stmt {
            out.entry(name.as_str()).or_insert(b);
        }
        collect_functions(&b.children, out);
    }
}

impl<'p> Machine<'p> {
    pub fn new(program: &'p Program, limits: &RunLimits) -> Self {
        let mut functions = BTreeMap::new();
        collect_functions(&program.blocks, &mut functions);
        Machine {
            mem: Memory::new(program.struct_defs()),
            globals: Vec::new(),
            frames: Vec::new(),
            functions,
            entry: &program.entry_function,
            max_steps: limits.max_steps,
            max_output: limits.max_output_bytes,
            steps: 0,
            stdout: Vec::new(),
            stdin: limits.stdin_script.iter().cloned().collect(),
            files: limits
                .files
                .iter()
                .map(|(k, v)| (k.clone(), v.as_bytes().to_vec()))
                .collect(),
            open: Vec::new(),
            current: None,
        }
    }

    pub fn run(&mut self, program: &'p Program) -> Result<(), Fault> {
        for b in &program.blocks {
            if matches!(b.stmt, Stmt::Declaration { .. }) {
                self.exec(b)?;
            }
        }
        let entry = self.entry;
        self.call(entry, &[])?;
        Ok(())
    }

    fn tick(&mut self) -> Result<(), Fault> {
        if self.steps >= self.max_steps {
            return Err(Fault::StepLimit);
        }
        self.steps += 1;
        Ok(())
    }

    // ---- scopes ----

    fn push_scope(&mut self) {
        if let Some(f) = self.frames.last_mut() {
            f.push(Vec::new());
        }
    }

    fn pop_scope(&mut self) {
        if let Some(scope) = self.frames.last_mut().and_then(Vec::pop) {
            for (_, obj, _) in scope {
                self.mem.expire(obj);
            }
        }
    }

    fn declare(&mut self, name: &str, obj: usize, ty: DataType) {
        let entry = (name.to_string(), obj, ty);
        match self.frames.last_mut().and_then(|f| f.last_mut()) {
            Some(scope) => scope.push(entry),
            None => self.globals.push(entry),
        }
    }

    fn lookup(&self, name: &str) -> Result<Place, Fault> {
        let frame = self.frames.last().into_iter().flatten().rev();
        for scope in frame.chain(std::iter::once(&self.globals)) {
            if let Some((_, obj, ty)) = scope.iter().rev().find(|(n, _, _)| n == name) {
                return Ok(Place {
                    obj: *obj,
                    off: 0,
                    ty: ty.clone(),
                });
            }
        }
        Err(Fault::invalid(format!("`{name}` is not declared")))
    }

    // ---- values and places ----

    fn convert(&self, v: Value, ty: &DataType) -> Result<Vec<Value>, Fault> {
        let fail = |v: &Value| Fault::runtime(format!("cannot store {} in a `{ty}`", v.describe()));
        let cell = match (ty, v) {
            (DataType::Int, Value::Int(i)) => Value::Int(i),
            (DataType::Int, Value::Char(c)) => Value::Int(i32::from(c)),
            (DataType::Int, Value::Float(f)) => Value::Int(f as i32),
            (DataType::Float, Value::Int(i)) => Value::Float(f64::from(i)),
            (DataType::Float, Value::Char(c)) => Value::Float(f64::from(c)),
            (DataType::Float, Value::Float(f)) => Value::Float(f),
            (DataType::Char, Value::Int(i)) => Value::Char(i as u8),
            (DataType::Char, Value::Char(c)) => Value::Char(c),
            (DataType::Char, Value::Float(f)) => Value::Char(f as i32 as u8),
            (DataType::PointerTo(elem), Value::Ptr(p)) => Value::Ptr(Ptr {
                elem: (**elem).clone(),
                ..p
            }),
            (DataType::PointerTo(_) | DataType::FileHandle, Value::Null | Value::Int(0)) => Value::Null,
            (DataType::FileHandle, Value::File(id)) => Value::File(id),
            (DataType::StructRef(_), Value::Aggregate(cells)) => {
                return if cells.len() == self.mem.size_of(ty)? {
                    Ok(cells)
                } else {
                    Err(Fault::runtime(format!("struct value does not fit `{ty}`")))
                }
            }
            (_, v) => return Err(fail(&v)),
        };
        Ok(vec![cell])
    }

    fn store(&mut self, place: &Place, v: Value) -> Result<(), Fault> {
        let cells = self.convert(v, &place.ty)?;
        self.mem.write(place.obj, place.off, cells)
    }

    fn load(&self, place: &Place) -> Result<Value, Fault> {
        match &place.ty {
            DataType::ArrayOf(inner, _) => Ok(Value::Ptr(Ptr {
                obj: place.obj,
                off: place.off,
                elem: (**inner).clone(),
            })),
            DataType::StructRef(_) => {
                let n = self.mem.size_of(&place.ty)?;
                Ok(Value::Aggregate(self.mem.read(place.obj, place.off, n)?))
            }
            _ => self.mem.read_cell(place.obj, place.off),
        }
    }

    fn pointee(&self, v: Value) -> Result<Place, Fault> {
        match v {
            Value::Ptr(p) if p.elem == DataType::Void => {
                Err(Fault::runtime("a void* must be converted before it is dereferenced"))
            }
            Value::Ptr(p) => Ok(Place {
                obj: p.obj,
                off: p.off,
                ty: p.elem,
            }),
            Value::Null => Err(Fault::runtime("dereference of a NULL pointer")),
            other => Err(Fault::runtime(format!("cannot dereference {}", other.describe()))),
        }
    }

    fn offset(&self, p: Ptr, k: i64) -> Result<Value, Fault> {
        let stride = self.mem.size_of(&p.elem)? as i64;
        Ok(Value::Ptr(Ptr {
            off: p.off + k * stride,
            ..p
        }))
    }

    fn place(&mut self, e: &Expr) -> Result<Place, Fault> {
        match e {
            Expr::Var(name) => self.lookup(name),
            Expr::Deref(inner) => {
                let v = self.eval(inner)?;
                self.pointee(v)
            }
            Expr::Index(base, index) => {
                let b = self.eval(base)?;
                let i = self.eval(index)?;
                let k = i
                    .as_int()
                    .ok_or_else(|| Fault::runtime(format!("array index is {}", i.describe())))?;
                match b {
                    Value::Ptr(p) => {
                        let v = self.offset(p, i64::from(k))?;
                        self.pointee(v)
                    }
                    other => self.pointee(other),
                }
            }
            Expr::Member { base, field, arrow } => {
                let p = if *arrow {
                    let v = self.eval(base)?;
                    self.pointee(v)?
                } else {
                    self.place(base)?
                };
                let DataType::StructRef(name) = &p.ty else {
                    return Err(Fault::runtime(format!("`{}` is not a struct", p.ty)));
                };
                let (off, ty) = self.mem.field(name, field)?;
                Ok(Place {
                    obj: p.obj,
                    off: p.off + off as i64,
                    ty,
                })
            }
            other => Err(Fault::invalid(format!("`{other}` is not assignable"))),
        }
    }

    fn num(v: &Value) -> Option<Num> {
        match v {
            Value::Int(i) => Some(Num::I(*i)),
            Value::Char(c) => Some(Num::I(i32::from(*c))),
            Value::Float(f) => Some(Num::F(*f)),
            _ => None,
        }
    }

    fn binary(&self, op: BinaryOp, l: Value, r: Value) -> Result<Value, Fault> {
        use BinaryOp::*;
        let bad = |l: &Value, r: &Value| {
            Fault::runtime(format!("`{}` cannot combine {} and {}", op.symbol(), l.describe(), r.describe()))
        };
        let truth = |b: bool| Value::Int(i32::from(b));
        if op.is_comparison() {
            let ord = match (Self::num(&l), Self::num(&r)) {
                (Some(Num::I(a)), Some(Num::I(b))) => a.partial_cmp(&b),
                (Some(a), Some(b)) => {
                    let f = |n: Num| match n {
                        Num::I(i) => f64::from(i),
                        Num::F(f) => f,
                    };
                    f(a).partial_cmp(&f(b))
                }
                _ => match (&l, &r) {
                    (Value::Ptr(a), Value::Ptr(b)) if a.obj == b.obj => a.off.partial_cmp(&b.off),
                    (Value::Ptr(_), Value::Ptr(_)) if matches!(op, Eq | Ne) => {
                        return Ok(truth(op == Ne))
                    }
                    (Value::Ptr(_) | Value::File(_), Value::Null)
                    | (Value::Null, Value::Ptr(_) | Value::File(_))
                        if matches!(op, Eq | Ne) =>
                    {
                        return Ok(truth(op == Ne))
                    }
                    (Value::Null, Value::Null) => Some(std::cmp::Ordering::Equal),
                    (Value::File(a), Value::File(b)) if matches!(op, Eq | Ne) => {
                        return Ok(truth((a == b) == (op == Eq)))
                    }
                    _ => return Err(bad(&l, &r)),
                },
            };
            let Some(ord) = ord else {
                return Ok(truth(op == Ne));
            };
            return Ok(truth(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                Ge => ord.is_ge(),
                Eq => ord.is_eq(),
                _ => ord.is_ne(),
            }));
        }
        match (op, &l, &r) {
            (Add, Value::Ptr(p), k) | (Add, k, Value::Ptr(p)) if k.as_int().is_some() => {
                return self.offset(p.clone(), i64::from(k.as_int().unwrap_or(0)))
            }
            (Sub, Value::Ptr(p), k) if k.as_int().is_some() => {
                return self.offset(p.clone(), -i64::from(k.as_int().unwrap_or(0)))
            }
            (Sub, Value::Ptr(a), Value::Ptr(b)) if a.obj == b.obj => {
                let stride = self.mem.size_of(&a.elem)? as i64;
                return Ok(Value::Int(((a.off - b.off) / stride) as i32));
            }
            _ => {}
        }
        let zero = || Fault::runtime("division by zero");
        match (Self::num(&l), Self::num(&r)) {
            (Some(Num::I(a)), Some(Num::I(b))) => Ok(Value::Int(match op {
                Add => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Mul => a.wrapping_mul(b),
                Div if b == 0 => return Err(zero()),
                Div => a.wrapping_div(b),
                Rem if b == 0 => return Err(zero()),
                Rem => a.wrapping_rem(b),
                _ => return Err(bad(&l, &r)),
            })),
            (Some(a), Some(b)) => {
                let f = |n: Num| match n {
                    Num::I(i) => f64::from(i),
                    Num::F(f) => f,
                };
                let (a, b) = (f(a), f(b));
                Ok(Value::Float(match op {
                    Add => a + b,
                    Sub => a - b,
                    Mul => a * b,
                    Div if b == 0.0 => return Err(zero()),
                    Div => a / b,
                    _ => return Err(bad(&l, &r)),
                }))
            }
            _ => Err(bad(&l, &r)),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, Fault> {
        match e {
            Expr::Int(i) => Ok(Value::Int(*i as i32)),
            Expr::Float(f) => Ok(Value::Float(*f)),
            Expr::Char(c) => Ok(Value::Char(*c)),
            Expr::Str(s) => Ok(Value::Ptr(Ptr {
                obj: self.mem.literal(s),
                off: 0,
                elem: DataType::Char,
            })),
            Expr::Null => Ok(Value::Null),
            Expr::Var(_) | Expr::Deref(_) | Expr::Index(..) | Expr::Member { .. } => {
                let p = self.place(e)?;
                self.load(&p)
            }
            Expr::AddrOf(inner) => {
                let p = self.place(inner)?;
                Ok(Value::Ptr(Ptr {
                    obj: p.obj,
                    off: p.off,
                    elem: p.ty,
                }))
            }
            Expr::Unary(UnaryOp::Neg, inner) => match self.eval(inner)? {
                Value::Int(i) => Ok(Value::Int(i.wrapping_neg())),
                Value::Char(c) => Ok(Value::Int(-i32::from(c))),
                Value::Float(f) => Ok(Value::Float(-f)),
                other => Err(Fault::runtime(format!("cannot negate {}", other.describe()))),
            },
            Expr::Unary(UnaryOp::Not, inner) => {
                let t = self.eval(inner)?.truthy()?;
                Ok(Value::Int(i32::from(!t)))
            }
            Expr::Binary(BinaryOp::And, l, r) => {
                let v = self.eval(l)?.truthy()? && self.eval(r)?.truthy()?;
                Ok(Value::Int(i32::from(v)))
            }
            Expr::Binary(BinaryOp::Or, l, r) => {
                let v = self.eval(l)?.truthy()? || self.eval(r)?.truthy()?;
                Ok(Value::Int(i32::from(v)))
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                self.binary(*op, a, b)
            }
            Expr::Call(name, args) => self.call(name, args),
        }
    }

    // ---- calls ----

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Fault> {
        let float = |v: &Value| match Self::num(v) {
            Some(Num::I(i)) => Ok(f64::from(i)),
            Some(Num::F(f)) => Ok(f),
            None => Err(Fault::runtime(format!("`{name}` needs a number"))),
        };
        match (name, args.as_slice()) {
            ("abs", [v]) => v
                .as_int()
                .map(|i| Value::Int(i.wrapping_abs()))
                .ok_or_else(|| Fault::runtime("`abs` needs an integer")),
            ("fabs", [v]) => Ok(Value::Float(float(v)?.abs())),
            ("sqrt", [v]) => Ok(Value::Float(float(v)?.sqrt())),
            ("pow", [a, b]) => Ok(Value::Float(float(a)?.powf(float(b)?))),
            ("strlen", [Value::Ptr(p)]) => Ok(Value::Int(self.mem.c_string(p)?.len() as i32)),
            ("strlen", [_]) => Err(Fault::runtime("`strlen` needs a string")),
            _ => Err(Fault::invalid(format!("unknown function `{name}`"))),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Result<Value, Fault> {
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(a)?);
        }
        let Some(def) = self.functions.get(name).copied() else {
            return self.builtin(name, values);
        };
        let Stmt::FunctionDef {
            return_type,
            params,
            ..
        } = &def.stmt
        else {
            unreachable!("function table holds definitions only");
        };
        if params.len() != values.len() {
            return Err(Fault::invalid(format!("`{name}` called with the wrong number of arguments")));
        }
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(Fault::runtime(format!(
                "more than {MAX_CALL_DEPTH} nested calls (runaway recursion?)"
            )));
        }
        let mut scope = Vec::new();
        for (p, v) in params.iter().zip(values) {
            let obj = self.mem.alloc(self.mem.size_of(&p.ty)?, Origin::Stack)?;
            let cells = self.convert(v, &p.ty)?;
            self.mem.write(obj, 0, cells)?;
            scope.push((p.name.clone(), obj, p.ty.clone()));
        }
        self.frames.push(vec![scope]);
        let caller = self.current;
        let flow = self.exec_list(&def.children);
        if flow.is_ok() {
            self.current = caller;
        }
        if let Some(frame) = self.frames.pop() {
            for (_, obj, _) in frame.into_iter().flatten() {
                self.mem.expire(obj);
            }
        }
        match flow? {
            Flow::Return(v) if *return_type == DataType::Void => Ok(v),
            Flow::Return(v) => {
                let mut cells = self.convert(v, return_type)?;
                Ok(match return_type {
                    DataType::StructRef(_) => Value::Aggregate(cells),
                    _ => cells.remove(0),
                })
            }
            _ if *return_type == DataType::Void => Ok(Value::Void),
            _ if name == self.entry => Ok(Value::Int(0)),
            _ => Err(Fault::runtime(format!("`{name}` ended without returning a value"))),
        }
    }

    // ---- statements ----

    fn exec_list(&mut self, blocks: &'p [Block]) -> Result<Flow, Fault> {
        self.push_scope();
        let mut result = Ok(Flow::Normal);
        for b in blocks {
            match self.exec(b) {
                Ok(Flow::Normal) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        self.pop_scope();
        result
    }

    fn exec(&mut self, b: &'p Block) -> Result<Flow, Fault> {
        if matches!(b.stmt, Stmt::Else | Stmt::Case { .. }) {
            return Ok(Flow::Normal);
        }
        self.current = Some(&b.id);
        self.tick()?;
        match &b.stmt {
            Stmt::Declaration { name, ty, init } => {
                let obj = self.mem.alloc(self.mem.size_of(ty)?, Origin::Stack)?;
                match (ty, init) {
                    (DataType::ArrayOf(inner, n), Some(Expr::Str(s))) if **inner == DataType::Char => {
                        if s.len() + 1 > *n {
                            return Err(Fault::runtime(format!("\"{s}\" does not fit in `{ty}`")));
                        }
                        let mut cells: Vec<Value> = s.bytes().map(Value::Char).collect();
                        cells.resize(*n, Value::Char(0));
                        self.mem.write(obj, 0, cells)?;
                    }
                    (_, Some(e)) => {
                        let v = self.eval(e)?;
                        let place = Place {
                            obj,
                            off: 0,
                            ty: ty.clone(),
                        };
                        self.store(&place, v)?;
                    }
                    (_, None) => {}
                }
                self.declare(name, obj, ty.clone());
                Ok(Flow::Normal)
            }
            Stmt::Assignment { target, value } => {
                let value = value.as_ref().ok_or_else(|| Fault::invalid("assignment has no value"))?;
                let v = self.eval(value)?;
                let p = self.place(target)?;
                self.store(&p, v)?;
                Ok(Flow::Normal)
            }
            Stmt::If { cond } => {
                let t = self.condition(cond.as_ref())?;
                let split = b.children.iter().position(|c| matches!(c.stmt, Stmt::Else));
                let (then, otherwise) = match split {
                    Some(k) => (&b.children[..k], &b.children[k + 1..]),
                    None => (&b.children[..], &b.children[b.children.len()..]),
                };
                self.exec_list(if t { then } else { otherwise })
            }
            Stmt::Switch { on } => {
                let v = self.eval(on)?;
                let key = v
                    .as_int()
                    .ok_or_else(|| Fault::runtime(format!("switch on {}", v.describe())))?;
                let mut start = None;
                let mut default = None;
                for (k, c) in b.children.iter().enumerate() {
                    if let Stmt::Case { label } = &c.stmt {
                        match label {
                            None => default = default.or(Some(k)),
                            Some(l) => {
                                if self.eval(l)?.as_int() == Some(key) && start.is_none() {
                                    start = Some(k);
                                }
                            }
                        }
                    }
                }
                match start.or(default) {
                    Some(k) => match self.exec_list(&b.children[k + 1..])? {
                        Flow::Break => Ok(Flow::Normal),
                        other => Ok(other),
                    },
                    None => Ok(Flow::Normal),
                }
            }
            Stmt::ForLoop {
                var,
                init,
                cond,
                step,
            } => {
                let v = self.eval(init)?;
                let p = self.lookup(var)?;
                self.store(&p, v)?;
                loop {
                    if let Some(c) = cond {
                        if !self.eval(c)?.truthy()? {
                            return Ok(Flow::Normal);
                        }
                    }
                    match self.exec_list(&b.children)? {
                        Flow::Break => return Ok(Flow::Normal),
                        r @ Flow::Return(_) => return Ok(r),
                        _ => {}
                    }
                    self.current = Some(&b.id);
                    let v = self.eval(step)?;
                    let p = self.lookup(var)?;
                    self.store(&p, v)?;
                    self.tick()?;
                }
            }
            Stmt::WhileLoop { cond } => loop {
                if !self.condition(cond.as_ref())? {
                    return Ok(Flow::Normal);
                }
                match self.exec_list(&b.children)? {
                    Flow::Break => return Ok(Flow::Normal),
                    r @ Flow::Return(_) => return Ok(r),
                    _ => {}
                }
                self.current = Some(&b.id);
                self.tick()?;
            },
            Stmt::DoWhileLoop { cond } => loop {
                match self.exec_list(&b.children)? {
                    Flow::Break => return Ok(Flow::Normal),
                    r @ Flow::Return(_) => return Ok(r),
                    _ => {}
                }
                self.current = Some(&b.id);
                self.tick()?;
                if !self.condition(cond.as_ref())? {
                    return Ok(Flow::Normal);
                }
            },
            Stmt::FunctionDef { .. } | Stmt::StructDef { .. } | Stmt::Preprocessor { .. } => {
                Ok(Flow::Normal)
            }
            Stmt::FunctionCall { callee, args } => {
                self.call(callee, args)?;
                Ok(Flow::Normal)
            }
            Stmt::Return { value } => Ok(Flow::Return(match value {
                Some(e) => self.eval(e)?,
                None => Value::Void,
            })),
            Stmt::Break => Ok(Flow::Break),
            Stmt::Continue => Ok(Flow::Continue),
            Stmt::Output { format, args } => {
                let bytes = self.printf(format, args)?;
                self.emit(bytes)?;
                Ok(Flow::Normal)
            }
            Stmt::Input { format, args } => {
                self.scanf(format, args, None)?;
                Ok(Flow::Normal)
            }
            Stmt::FileOp(op) => {
                self.file_op(op)?;
                Ok(Flow::Normal)
            }
            Stmt::MemAlloc {
                target,
                elem_type,
                count,
            } => {
                let n = self.eval(count)?;
                let n = match n.as_int() {
                    Some(n) if n > 0 => n as usize,
                    Some(n) => return Err(Fault::runtime(format!("cannot allocate {n} elements"))),
                    None => return Err(Fault::runtime(format!("element count is {}", n.describe()))),
                };
                let cells = self
                    .mem
                    .size_of(elem_type)?
                    .checked_mul(n)
                    .ok_or_else(|| Fault::runtime("allocation is too large"))?;
                let obj = self.mem.alloc(cells, Origin::Heap)?;
                let p = self.place(target)?;
                let v = Value::Ptr(Ptr {
                    obj,
                    off: 0,
                    elem: elem_type.clone(),
                });
                self.store(&p, v)?;
                Ok(Flow::Normal)
            }
            Stmt::MemFree { target } => {
                match self.eval(target)? {
                    Value::Ptr(p) => self.mem.free(&p)?,
                    Value::Null => {}
                    other => return Err(Fault::runtime(format!("cannot free {}", other.describe()))),
                }
                Ok(Flow::Normal)
            }
            Stmt::Else | Stmt::Case { .. } => Ok(Flow::Normal),
        }
    }

    fn condition(&mut self, cond: Option<&Expr>) -> Result<bool, Fault> {
        let c = cond.ok_or_else(|| Fault::invalid("condition is missing"))?;
        self.eval(c)?.truthy()
    }

    // ---- input and output ----

    fn emit(&mut self, bytes: Vec<u8>) -> Result<(), Fault> {
        let room = self.max_output - self.stdout.len();
        if bytes.len() > room {
            self.stdout.extend_from_slice(&bytes[..room]);
            return Err(Fault::runtime(format!(
                "output exceeds the limit of {} bytes",
                self.max_output
            )));
        }
        self.stdout.extend(bytes);
        Ok(())
    }

    fn printf(&mut self, format: &str, args: &[Expr]) -> Result<Vec<u8>, Fault> {
        let mut out = Vec::new();
        let mut args = args.iter();
        for piece in parse_format(format) {
            match piece {
                Piece::Text(t) => out.extend(t),
                Piece::Spec(spec) => {
                    let arg = args
                        .next()
                        .ok_or_else(|| Fault::invalid("format has more conversions than arguments"))?;
                    let v = self.eval(arg)?;
                    let string = match (&v, spec) {
                        (Value::Ptr(p), 's') if p.elem == DataType::Char => Some(self.mem.c_string(p)?),
                        _ => None,
                    };
                    out.extend(render(spec, &v, string)?);
                }
            }
        }
        Ok(out)
    }

    fn next_token(&mut self, file: Option<usize>) -> Result<String, Fault> {
        let Some(id) = file else {
            return self.stdin.pop_front().ok_or_else(|| {
                Fault::runtime("the program reads more input than was provided")
            });
        };
        let f = &mut self.open[id];
        let data = self.files.get(&f.name).map(Vec::as_slice).unwrap_or(&[]);
        let mut pos = f.pos;
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= data.len() {
            return Err(Fault::runtime(format!("read past the end of `{}`", f.name)));
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        f.pos = pos;
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    }

    fn scanf(&mut self, format: &str, args: &[Expr], file: Option<usize>) -> Result<(), Fault> {
        let mut args = args.iter();
        for piece in parse_format(format) {
            let Piece::Spec(spec) = piece else { continue };
            let arg = args
                .next()
                .ok_or_else(|| Fault::invalid("format has more conversions than arguments"))?;
            let target = self.eval(arg)?;
            let Value::Ptr(p) = target else {
                return Err(Fault::runtime(format!(
                    "input needs the address of a variable (use &), got {}",
                    target.describe()
                )));
            };
            let token = self.next_token(file)?;
            if spec == 's' {
                let mut cells: Vec<Value> = token.bytes().map(Value::Char).collect();
                cells.push(Value::Char(0));
                if p.elem != DataType::Char {
                    return Err(Fault::runtime("%s needs a char array"));
                }
                self.mem.write(p.obj, p.off, cells)?;
            } else {
                let v = scan(spec, &token)?;
                let place = self.pointee(Value::Ptr(p))?;
                self.store(&place, v)?;
            }
        }
        Ok(())
    }

    fn handle(&mut self, name: &str, want_write: bool) -> Result<usize, Fault> {
        let p = self.lookup(name)?;
        match self.load(&p)? {
            Value::File(id) => {
                let f = &self.open[id];
                if !f.open {
                    Err(Fault::runtime(format!("`{name}` was already closed")))
                } else if want_write && !f.write {
                    Err(Fault::runtime(format!("`{}` is not open for writing", f.name)))
                } else if !want_write && !f.read {
                    Err(Fault::runtime(format!("`{}` is not open for reading", f.name)))
                } else {
                    Ok(id)
                }
            }
            Value::Null => Err(Fault::runtime(format!("`{name}` is NULL (the file did not open)"))),
            other => Err(Fault::runtime(format!("`{name}` holds {}, not a file", other.describe()))),
        }
    }

    fn file_op(&mut self, op: &FileOp) -> Result<(), Fault> {
        match op.op {
            FileOpKind::Open => {
                let path = op.path.as_ref().ok_or_else(|| Fault::invalid("open needs a path"))?;
                let name = match self.eval(path)? {
                    Value::Ptr(p) if p.elem == DataType::Char => {
                        String::from_utf8_lossy(&self.mem.c_string(&p)?).into_owned()
                    }
                    other => {
                        return Err(Fault::runtime(format!("file name is {}", other.describe())))
                    }
                };
                let mode = op.mode.as_deref().ok_or_else(|| Fault::invalid("open needs a mode"))?;
                let (read, write, truncate, create) = match mode {
                    "r" | "rb" => (true, false, false, false),
                    "w" | "wb" => (false, true, true, true),
                    "a" | "ab" => (false, true, false, true),
                    "r+" => (true, true, false, false),
                    "w+" => (true, true, true, true),
                    "a+" => (true, true, false, true),
                    other => return Err(Fault::runtime(format!("unknown file mode \"{other}\""))),
                };
                let exists = self.files.contains_key(&name);
                let value = if !exists && !create {
                    Value::Null
                } else {
                    if truncate || !exists {
                        self.files.insert(name.clone(), Vec::new());
                    }
                    self.open.push(OpenFile {
                        name,
                        read,
                        write,
                        pos: 0,
                        open: true,
                    });
                    Value::File(self.open.len() - 1)
                };
                let p = self.lookup(&op.handle)?;
                self.store(&p, value)
            }
            FileOpKind::Close => {
                let p = self.lookup(&op.handle)?;
                match self.load(&p)? {
                    Value::File(id) if self.open[id].open => {
                        self.open[id].open = false;
                        Ok(())
                    }
                    Value::File(_) => Err(Fault::runtime(format!("`{}` closed twice", op.handle))),
                    other => Err(Fault::runtime(format!("cannot close {}", other.describe()))),
                }
            }
            FileOpKind::Write => {
                let id = self.handle(&op.handle, true)?;
                let format = op.format.as_deref().unwrap_or("");
                let bytes = self.printf(format, &op.args)?;
                let max = self.max_output;
                let content = self.files.entry(self.open[id].name.clone()).or_default();
                if content.len() + bytes.len() > max {
                    return Err(Fault::runtime(format!("file exceeds the limit of {max} bytes")));
                }
                content.extend(bytes);
                Ok(())
            }
            FileOpKind::Read => {
                let id = self.handle(&op.handle, false)?;
                let format = op.format.as_deref().unwrap_or("");
                self.scanf(format, &op.args, Some(id))
            }
        }
    }
}

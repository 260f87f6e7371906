//! Static typing of embedded expressions.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    enumerate_nodes, BinaryOp, Block, BlockId, DataType, Expr, KindFilter, Param, Program, Stmt,
    UnaryOp,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub params: Vec<DataType>,
    pub ret: DataType,
}

/// Program-wide names: function signatures (including the built-in library)
/// and struct layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Globals {
    pub functions: BTreeMap<String, Signature>,
    pub structs: BTreeMap<String, Vec<Param>>,
}

fn builtin_functions() -> BTreeMap<String, Signature> {
    use DataType::*;
    let sig = |params: Vec<DataType>, ret: DataType| Signature { params, ret };
    BTreeMap::from([
        ("abs".to_string(), sig(vec![Int], Int)),
        ("fabs".to_string(), sig(vec![Float], Float)),
        ("sqrt".to_string(), sig(vec![Float], Float)),
        ("pow".to_string(), sig(vec![Float, Float], Float)),
        ("strlen".to_string(), sig(vec![DataType::pointer_to(Char)], Int)),
    ])
}

impl Globals {
    pub fn builtins() -> Self {
        Globals {
            functions: builtin_functions(),
            structs: BTreeMap::new(),
        }
    }

    /// Built-ins plus every function and struct defined in the program.
    /// Functions are visible everywhere regardless of definition order.
    pub fn for_program(program: &Program) -> Self {
        let mut g = Globals::builtins();
        g.structs = program.struct_defs();
        for n in enumerate_nodes(program, &KindFilter::All) {
            if let Stmt::FunctionDef {
                name,
                return_type,
                params,
            } = &n.block.stmt
            {
                g.functions.insert(
                    name.clone(),
                    Signature {
                        params: params.iter().map(|p| p.ty.clone()).collect(),
                        ret: return_type.clone(),
                    },
                );
            }
        }
        g
    }

    pub fn is_builtin(name: &str) -> bool {
        builtin_functions().contains_key(name)
    }
}

/// Names visible at one point of the program.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeEnv {
    vars: BTreeMap<String, DataType>,
    globals: Arc<Globals>,
}

impl Default for TypeEnv {
    fn default() -> Self {
        TypeEnv {
            vars: BTreeMap::new(),
            globals: Arc::new(Globals::builtins()),
        }
    }
}

impl TypeEnv {
    /// Variables only, with the built-in function library.
    pub fn from_vars(vars: impl IntoIterator<Item = (String, DataType)>) -> Self {
        TypeEnv {
            vars: vars.into_iter().collect(),
            ..TypeEnv::default()
        }
    }

    pub fn with_globals(globals: Arc<Globals>) -> Self {
        TypeEnv {
            vars: BTreeMap::new(),
            globals,
        }
    }

    pub fn var(&self, name: &str) -> Option<&DataType> {
        self.vars.get(name)
    }

    pub fn vars(&self) -> &BTreeMap<String, DataType> {
        &self.vars
    }

    pub fn function(&self, name: &str) -> Option<&Signature> {
        self.globals.functions.get(name)
    }

    pub fn globals(&self) -> &Globals {
        &self.globals
    }

    pub fn declare(&mut self, name: &str, ty: DataType) {
        self.vars.insert(name.to_string(), ty);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("`{0}` is not declared")]
    UnboundVariable(String),
    #[error("function `{0}` is not defined")]
    UnknownFunction(String),
    #[error("`{callee}` expects {expected} argument(s) but was given {found}")]
    ArityMismatch {
        callee: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {position} of `{callee}` should be {expected} but is {found}")]
    ArgumentMismatch {
        callee: String,
        position: usize,
        expected: DataType,
        found: DataType,
    },
    #[error("`{expr}` needs {expected} but has type {found}")]
    TypeMismatch {
        expected: String,
        found: DataType,
        expr: String,
    },
    #[error("`{ty}` has no member `{member}`")]
    UnknownMember { ty: DataType, member: String },
    #[error("`{0}` cannot be assigned to or addressed")]
    NotAnLvalue(String),
}

impl TypeError {
    /// Errors caused by a missing declaration rather than a misuse of types.
    pub fn is_missing_reference(&self) -> bool {
        matches!(self, TypeError::UnboundVariable(_) | TypeError::UnknownFunction(_))
    }

    /// Errors concerning how a function is called.
    pub fn is_call_error(&self) -> bool {
        matches!(
            self,
            TypeError::ArityMismatch { .. } | TypeError::ArgumentMismatch { .. }
        )
    }
}

fn mismatch(expected: &str, found: DataType, expr: &Expr) -> TypeError {
    TypeError::TypeMismatch {
        expected: expected.to_string(),
        found,
        expr: expr.to_string(),
    }
}

fn promote(a: &DataType, b: &DataType) -> DataType {
    if *a == DataType::Float || *b == DataType::Float {
        DataType::Float
    } else {
        DataType::Int
    }
}

/// Static type of `expr` in `env`. Mixed `int`/`float` arithmetic yields
/// `float`; comparisons and logical operators yield `int`.
pub fn infer_type(expr: &Expr, env: &TypeEnv) -> Result<DataType, TypeError> {
    match expr {
        Expr::Int(_) => Ok(DataType::Int),
        Expr::Float(_) => Ok(DataType::Float),
        Expr::Char(_) => Ok(DataType::Char),
        Expr::Str(_) => Ok(DataType::pointer_to(DataType::Char)),
        Expr::Null => Ok(DataType::pointer_to(DataType::Void)),
        Expr::Var(name) => env
            .var(name)
            .cloned()
            .ok_or_else(|| TypeError::UnboundVariable(name.clone())),
        Expr::Unary(op, inner) => {
            let t = infer_type(inner, env)?;
            match op {
                UnaryOp::Neg if t.is_numeric() => Ok(promote(&t, &DataType::Int)),
                UnaryOp::Neg => Err(mismatch("a number", t, inner)),
                UnaryOp::Not if t.is_scalar() => Ok(DataType::Int),
                UnaryOp::Not => Err(mismatch("a scalar value", t, inner)),
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let l = infer_type(lhs, env)?;
            let r = infer_type(rhs, env)?;
            infer_binary(*op, (&l, lhs), (&r, rhs))
        }
        Expr::Call(callee, args) => {
            let sig = env
                .function(callee)
                .cloned()
                .ok_or_else(|| TypeError::UnknownFunction(callee.clone()))?;
            if sig.params.len() != args.len() {
                return Err(TypeError::ArityMismatch {
                    callee: callee.clone(),
                    expected: sig.params.len(),
                    found: args.len(),
                });
            }
            for (i, (param, arg)) in sig.params.iter().zip(args).enumerate() {
                let found = infer_type(arg, env)?;
                if !param.accepts(&found) {
                    return Err(TypeError::ArgumentMismatch {
                        callee: callee.clone(),
                        position: i + 1,
                        expected: param.clone(),
                        found,
                    });
                }
            }
            Ok(sig.ret)
        }
        Expr::AddrOf(inner) => {
            if !inner.is_lvalue() {
                return Err(TypeError::NotAnLvalue(inner.to_string()));
            }
            Ok(DataType::pointer_to(infer_type(inner, env)?))
        }
        Expr::Deref(inner) => match infer_type(inner, env)?.decayed() {
            DataType::PointerTo(t) if *t != DataType::Void => Ok(*t),
            other => Err(mismatch("a typed pointer", other, inner)),
        },
        Expr::Index(base, index) => {
            let b = infer_type(base, env)?;
            let i = infer_type(index, env)?;
            if !i.is_integral() {
                return Err(mismatch("an integer index", i, index));
            }
            match b.decayed() {
                DataType::PointerTo(t) if *t != DataType::Void => Ok(*t),
                other => Err(mismatch("an array or pointer", other, base)),
            }
        }
        Expr::Member { base, field, arrow } => {
            let b = infer_type(base, env)?;
            let record = match (&b, arrow) {
                (DataType::StructRef(name), false) => name,
                (DataType::PointerTo(inner), true) => match inner.as_ref() {
                    DataType::StructRef(name) => name,
                    _ => return Err(mismatch("a pointer to a struct", b.clone(), base)),
                },
                (_, true) => return Err(mismatch("a pointer to a struct", b.clone(), base)),
                (_, false) => return Err(mismatch("a struct", b.clone(), base)),
            };
            env.globals
                .structs
                .get(record)
                .and_then(|fields| fields.iter().find(|f| f.name == *field))
                .map(|f| f.ty.clone())
                .ok_or_else(|| TypeError::UnknownMember {
                    ty: b.clone(),
                    member: field.clone(),
                })
        }
    }
}

fn infer_binary(
    op: BinaryOp,
    (l, lhs): (&DataType, &Expr),
    (r, rhs): (&DataType, &Expr),
) -> Result<DataType, TypeError> {
    use BinaryOp::*;
    let both_numeric = l.is_numeric() && r.is_numeric();
    match op {
        Add | Sub if both_numeric => Ok(promote(l, r)),
        Add | Sub if l.is_address() && r.is_integral() => Ok(l.decayed()),
        Add if l.is_integral() && r.is_address() => Ok(r.decayed()),
        Sub if l.is_address() && r.is_address() && l.equivalent(r) => Ok(DataType::Int),
        Add | Sub => Err(if l.is_numeric() || l.is_address() {
            mismatch("a compatible operand", r.clone(), rhs)
        } else {
            mismatch("a number or pointer", l.clone(), lhs)
        }),
        Mul | Div if both_numeric => Ok(promote(l, r)),
        Mul | Div => Err(if l.is_numeric() {
            mismatch("a number", r.clone(), rhs)
        } else {
            mismatch("a number", l.clone(), lhs)
        }),
        Rem if l.is_integral() && r.is_integral() => Ok(DataType::Int),
        Rem => Err(if l.is_integral() {
            mismatch("an integer", r.clone(), rhs)
        } else {
            mismatch("an integer", l.clone(), lhs)
        }),
        Lt | Le | Gt | Ge | Eq | Ne => {
            let null_file = |a: &DataType, b: &DataType| {
                *a == DataType::FileHandle && *b == DataType::pointer_to(DataType::Void)
            };
            if both_numeric
                || (l.is_address() && r.is_address() && l.equivalent(r))
                || (matches!(op, Eq | Ne) && (null_file(l, r) || null_file(r, l)))
            {
                Ok(DataType::Int)
            } else {
                Err(mismatch(&format!("a value comparable with {l}"), r.clone(), rhs))
            }
        }
        And | Or => {
            if !l.is_scalar() {
                Err(mismatch("a scalar value", l.clone(), lhs))
            } else if !r.is_scalar() {
                Err(mismatch("a scalar value", r.clone(), rhs))
            } else {
                Ok(DataType::Int)
            }
        }
    }
}

/// Variables in scope immediately before each block, by pre-order index.
#[derive(Debug, Clone)]
pub struct ScopeIndex {
    envs: Vec<TypeEnv>,
    globals: Arc<Globals>,
}

impl ScopeIndex {
    /// Scoping follows C: top-level declarations are visible to later
    /// definitions, each container opens a nested scope, function
    /// parameters are visible in the body, and an `Else` marker restarts
    /// the scope of its `If`.
    pub fn build(program: &Program) -> Self {
        let globals = Arc::new(Globals::for_program(program));
        let mut envs = Vec::with_capacity(program.block_count());
        let mut top = TypeEnv::with_globals(globals.clone());
        for block in &program.blocks {
            Self::visit(block, &mut top, &mut envs);
        }
        ScopeIndex { envs, globals }
    }

    fn visit(block: &Block, env: &mut TypeEnv, envs: &mut Vec<TypeEnv>) {
        envs.push(env.clone());
        match &block.stmt {
            Stmt::Declaration { name, ty, .. } => env.declare(name, ty.clone()),
            Stmt::FunctionDef { params, .. } => {
                let mut inner = env.clone();
                for p in params {
                    inner.declare(&p.name, p.ty.clone());
                }
                for child in &block.children {
                    Self::visit(child, &mut inner, envs);
                }
            }
            Stmt::If { .. } => {
                let mut inner = env.clone();
                for child in &block.children {
                    if matches!(child.stmt, Stmt::Else) {
                        inner = env.clone();
                    }
                    Self::visit(child, &mut inner, envs);
                }
            }
            _ => {
                let mut inner = env.clone();
                for child in &block.children {
                    Self::visit(child, &mut inner, envs);
                }
            }
        }
    }

    /// Scope before the block at pre-order position `index`.
    pub fn at(&self, index: usize) -> &TypeEnv {
        &self.envs[index]
    }

    pub fn globals(&self) -> &Globals {
        &self.globals
    }
}

/// One expression that fails to type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeIssue {
    pub block_id: BlockId,
    pub attr: String,
    pub error: TypeError,
}

/// Types every expression of the program in its scope. An empty result
/// means the program "compiles".
pub fn typecheck_program(program: &Program) -> Vec<TypeIssue> {
    let scopes = ScopeIndex::build(program);
    let mut issues = Vec::new();
    for node in enumerate_nodes(program, &KindFilter::All) {
        let env = scopes.at(node.index);
        let mut push = |attr: &str, error: TypeError| {
            issues.push(TypeIssue {
                block_id: node.block.id.clone(),
                attr: attr.to_string(),
                error,
            })
        };
        let stmt = &node.block.stmt;
        if let Stmt::FunctionCall { callee, args } = stmt {
            if let Err(e) = infer_type(&Expr::Call(callee.clone(), args.clone()), env) {
                push("args", e);
            }
        } else {
            for (attr, expr) in stmt.expressions() {
                if let Err(e) = infer_type(expr, env) {
                    push(attr, e);
                }
            }
        }
        for name in stmt.named_variables() {
            if env.var(name).is_none() {
                push("var", TypeError::UnboundVariable(name.to_string()));
            }
        }
        match stmt {
            Stmt::Assignment { target, .. } | Stmt::MemAlloc { target, .. }
                if !target.is_lvalue() =>
            {
                push("target", TypeError::NotAnLvalue(target.to_string()))
            }
            _ => {}
        }
    }
    issues
}

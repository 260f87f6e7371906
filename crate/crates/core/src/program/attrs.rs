use std::borrow::Cow;
use std::fmt::Write;

use super::{DataType, Expr, Param, Stmt};

/// Uniform read-only view of one block attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue<'a> {
    /// A name: variable, function, struct or file handle.
    Ident(&'a str),
    /// Free text such as a format string or preprocessor directive.
    Text(&'a str),
    Expr(&'a Expr),
    Exprs(&'a [Expr]),
    Type(Cow<'a, DataType>),
    Params(&'a [Param]),
}

impl AttrValue<'_> {
    /// Canonical text used for equality comparisons in rules and in
    /// feedback placeholders.
    pub fn text(&self) -> String {
        match self {
            AttrValue::Ident(s) | AttrValue::Text(s) => s.to_string(),
            AttrValue::Expr(e) => e.to_string(),
            AttrValue::Exprs(es) => {
                let mut out = String::new();
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{e}");
                }
                out
            }
            AttrValue::Type(t) => t.to_string(),
            AttrValue::Params(ps) => {
                let mut out = String::new();
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{} {}", p.ty, p.name);
                }
                out
            }
        }
    }
}

/// Attribute names exposed by each statement kind, in canonical order.
pub(crate) fn attr_names(stmt: &Stmt) -> &'static [&'static str] {
    match stmt {
        Stmt::Declaration { .. } => &["name", "type", "init"],
        Stmt::Assignment { .. } => &["target", "value"],
        Stmt::If { .. } | Stmt::WhileLoop { .. } | Stmt::DoWhileLoop { .. } => &["cond"],
        Stmt::Else | Stmt::Break | Stmt::Continue => &[],
        Stmt::Switch { .. } => &["on"],
        Stmt::Case { .. } => &["value"],
        Stmt::ForLoop { .. } => &["var", "init", "cond", "step"],
        Stmt::FunctionDef { .. } => &["name", "return_type", "params"],
        Stmt::FunctionCall { .. } => &["callee", "args"],
        Stmt::Return { .. } => &["value"],
        Stmt::Preprocessor { .. } => &["directive"],
        Stmt::StructDef { .. } => &["name", "fields"],
        Stmt::FileOp(_) => &["op", "handle", "path", "mode", "format", "args"],
        Stmt::MemAlloc { .. } => &["target", "type", "count", "result"],
        Stmt::MemFree { .. } => &["target"],
        Stmt::Output { .. } | Stmt::Input { .. } => &["format", "args"],
    }
}

pub(crate) fn attr<'a>(stmt: &'a Stmt, name: &str) -> Option<AttrValue<'a>> {
    use AttrValue as A;
    let opt = |e: &'a Option<Expr>| e.as_ref().map(A::Expr);
    match (stmt, name) {
        (Stmt::Declaration { name, .. }, "name") => Some(A::Ident(name)),
        (Stmt::Declaration { ty, .. }, "type") => Some(A::Type(Cow::Borrowed(ty))),
        (Stmt::Declaration { init, .. }, "init") => opt(init),
        (Stmt::Assignment { target, .. }, "target") => Some(A::Expr(target)),
        (Stmt::Assignment { value, .. }, "value") => opt(value),
        (
            Stmt::If { cond } | Stmt::WhileLoop { cond } | Stmt::DoWhileLoop { cond },
            "cond",
        ) => opt(cond),
        (Stmt::Switch { on }, "on") => Some(A::Expr(on)),
        (Stmt::Case { label }, "value") => opt(label),
        (Stmt::ForLoop { var, .. }, "var") => Some(A::Ident(var)),
        (Stmt::ForLoop { init, .. }, "init") => Some(A::Expr(init)),
        (Stmt::ForLoop { cond, .. }, "cond") => opt(cond),
        (Stmt::ForLoop { step, .. }, "step") => Some(A::Expr(step)),
        (Stmt::FunctionDef { name, .. }, "name") => Some(A::Ident(name)),
        (Stmt::FunctionDef { return_type, .. }, "return_type") => {
            Some(A::Type(Cow::Borrowed(return_type)))
        }
        (Stmt::FunctionDef { params, .. }, "params") => Some(A::Params(params)),
        (Stmt::FunctionCall { callee, .. }, "callee") => Some(A::Ident(callee)),
        (Stmt::FunctionCall { args, .. }, "args") => Some(A::Exprs(args)),
        (Stmt::Return { value }, "value") => opt(value),
        (Stmt::Preprocessor { directive }, "directive") => Some(A::Text(directive)),
        (Stmt::StructDef { name, .. }, "name") => Some(A::Ident(name)),
        (Stmt::StructDef { fields, .. }, "fields") => Some(A::Params(fields)),
        (Stmt::FileOp(f), "op") => Some(A::Text(f.op.as_str())),
        (Stmt::FileOp(f), "handle") => Some(A::Ident(&f.handle)),
        (Stmt::FileOp(f), "path") => opt(&f.path),
        (Stmt::FileOp(f), "mode") => f.mode.as_deref().map(A::Text),
        (Stmt::FileOp(f), "format") => f.format.as_deref().map(A::Text),
        (Stmt::FileOp(f), "args") => f.format.as_ref().map(|_| A::Exprs(&f.args)),
        (Stmt::MemAlloc { target, .. }, "target") => Some(A::Expr(target)),
        (Stmt::MemAlloc { elem_type, .. }, "type") => Some(A::Type(Cow::Borrowed(elem_type))),
        (Stmt::MemAlloc { count, .. }, "count") => Some(A::Expr(count)),
        (Stmt::MemAlloc { elem_type, .. }, "result") => {
            Some(A::Type(Cow::Owned(DataType::pointer_to(elem_type.clone()))))
        }
        (Stmt::MemFree { target }, "target") => Some(A::Expr(target)),
        (Stmt::Output { format, .. } | Stmt::Input { format, .. }, "format") => {
            Some(A::Text(format))
        }
        (Stmt::Output { args, .. } | Stmt::Input { args, .. }, "args") => Some(A::Exprs(args)),
        _ => None,
    }
}

/// Conversion specifiers (`%d %f %c %s`) in a format string, in order.
/// `%%` is a literal percent sign and is skipped.
pub fn format_specifiers(format: &str) -> Vec<char> {
    let mut out = Vec::new();
    let mut chars = format.chars();
    while let Some(c) = chars.next() {
        if c == '%' {
            match chars.next() {
                Some('%') | None => {}
                Some(spec) => out.push(spec),
            }
        }
    }
    out
}

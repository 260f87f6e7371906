//! Conditions a program must meet before it can run.

use crate::program::{
    format_specifiers, typecheck_program, DataType, validate_program, Block, FileOpKind, Program, Stmt,
    TemplateRegistry,
};

use super::InterpreterError;

fn invalid(block: Option<&Block>, reason: impl Into<String>) -> InterpreterError {
    InterpreterError::InvalidProgram {
        block_id: block.map(|b| b.id.0.clone()),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Default)]
struct Ctx {
    in_function: bool,
    in_loop: bool,
    in_switch: bool,
    returns_void: bool,
}

fn check_block(b: &Block, ctx: Ctx) -> Result<(), InterpreterError> {
    let fail = |reason: &str| Err(invalid(Some(b), reason));
    let mut inner = ctx;
    match &b.stmt {
        Stmt::Assignment { value: None, .. } => return fail("assignment has no value"),
        Stmt::If { cond: None } | Stmt::WhileLoop { cond: None } | Stmt::DoWhileLoop { cond: None } => {
            return fail("condition is missing")
        }
        Stmt::Break if !(ctx.in_loop || ctx.in_switch) => {
            return fail("break outside of a loop or switch")
        }
        Stmt::Continue if !ctx.in_loop => return fail("continue outside of a loop"),
        Stmt::Return { .. } if !ctx.in_function => return fail("return outside of a function"),
        Stmt::Return { value: Some(_) } if ctx.returns_void => {
            return fail("a void function cannot return a value")
        }
        Stmt::Return { value: None } if !ctx.returns_void => return fail("return needs a value"),
        Stmt::FunctionDef { .. } if ctx.in_function => {
            return fail("functions cannot be defined inside functions")
        }
        Stmt::FileOp(op) => match op.op {
            FileOpKind::Open if op.path.is_none() || op.mode.is_none() => {
                return fail("open needs a path and a mode")
            }
            FileOpKind::Read | FileOpKind::Write if op.format.is_none() => {
                return fail("file read/write needs a format")
            }
            _ => {}
        },
        Stmt::FunctionDef { return_type, .. } => {
            inner.in_function = true;
            inner.returns_void = *return_type == DataType::Void;
        }
        Stmt::ForLoop { .. } | Stmt::WhileLoop { .. } | Stmt::DoWhileLoop { .. } => {
            inner.in_loop = true
        }
        Stmt::Switch { .. } => inner.in_switch = true,
        _ => {}
    }
    if let Some((format, args)) = b.stmt.format() {
        let n = format_specifiers(format).len();
        if n != args.len() {
            return Err(invalid(
                Some(b),
                format!("format expects {n} argument(s) but {} given", args.len()),
            ));
        }
    }
    if !ctx.in_function
        && !matches!(
            b.stmt,
            Stmt::Declaration { .. }
                | Stmt::FunctionDef { .. }
                | Stmt::StructDef { .. }
                | Stmt::Preprocessor { .. }
        )
    {
        return fail("only declarations and definitions may appear outside functions");
    }
    b.children.iter().try_for_each(|c| check_block(c, inner))
}

pub fn precheck(program: &Program) -> Result<(), InterpreterError> {
    let report = validate_program(program, None, &TemplateRegistry::builtin());
    if let Some(d) = report.defects.first() {
        return Err(InterpreterError::InvalidProgram {
            block_id: d.block_id.clone(),
            reason: d.to_string(),
        });
    }
    if let Some(issue) = typecheck_program(program).into_iter().next() {
        return Err(InterpreterError::InvalidProgram {
            block_id: Some(issue.block_id.0),
            reason: format!("{}: {}", issue.attr, issue.error),
        });
    }
    let entry = program
        .entry()
        .ok_or_else(|| invalid(None, format!("no top-level function `{}`", program.entry_function)))?;
    if let Stmt::FunctionDef { params, .. } = &entry.stmt {
        if !params.is_empty() {
            return Err(invalid(Some(entry), "the entry function cannot take parameters"));
        }
    }
    program.blocks.iter().try_for_each(|b| check_block(b, Ctx::default()))
}

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{parse_expr, CodecError};
use crate::program::{
    Block, BlockId, BlockKind, DataType, Expr, FileOp, FileOpKind, Param, Program, Stmt,
    TemplateRegistry,
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolution {
    blocks: Vec<RawBlock>,
    #[serde(default)]
    entry: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    id: String,
    kind: String,
    #[serde(default)]
    attrs: Map<String, Value>,
    #[serde(default)]
    children: Vec<RawBlock>,
    #[serde(default)]
    layer: Option<String>,
}

/// Parses a `.sol.json` document with the built-in layer registry.
pub fn parse_solution(document: &str) -> Result<Program, CodecError> {
    parse_solution_with(document, &TemplateRegistry::builtin())
}

/// Parses a solution whose blocks may reference custom layers in `registry`.
pub fn parse_solution_with(
    document: &str,
    registry: &TemplateRegistry,
) -> Result<Program, CodecError> {
    if document.trim().is_empty() {
        return Ok(Program::default());
    }
    let raw: RawSolution = serde_json::from_str(document).map_err(CodecError::from_json)?;
    convert(raw, registry)
}

pub(crate) fn solution_from_value(
    value: Value,
    registry: &TemplateRegistry,
) -> Result<Program, CodecError> {
    let raw: RawSolution = serde_json::from_value(value).map_err(CodecError::from_json)?;
    convert(raw, registry)
}

fn convert(raw: RawSolution, registry: &TemplateRegistry) -> Result<Program, CodecError> {
    let blocks = raw
        .blocks
        .into_iter()
        .map(|b| block(b, registry))
        .collect::<Result<_, _>>()?;
    let mut program = Program::new(blocks);
    if let Some(entry) = raw.entry {
        program.entry_function = entry;
    }
    Ok(program)
}

fn block(raw: RawBlock, registry: &TemplateRegistry) -> Result<Block, CodecError> {
    let kind = BlockKind::from_name(&raw.kind)
        .ok_or_else(|| CodecError::UnknownBlockKind(raw.kind.clone()))?;
    let mut attrs = Attrs {
        id: &raw.id,
        map: raw.attrs,
    };
    let stmt = stmt(kind, &mut attrs)?;
    attrs.finish()?;
    let layer = match &raw.layer {
        None => TemplateRegistry::builtin_layer(kind),
        Some(name) => registry
            .layer(name)
            .ok_or_else(|| CodecError::UnknownLayer {
                block_id: raw.id.clone(),
                template: name.clone(),
            })?,
    };
    let children = raw
        .children
        .into_iter()
        .map(|c| block(c, registry))
        .collect::<Result<_, _>>()?;
    Ok(Block {
        id: BlockId(raw.id),
        layer,
        stmt,
        children,
    })
}

/// Attribute map of one block; every key must be consumed.
struct Attrs<'a> {
    id: &'a str,
    map: Map<String, Value>,
}

impl Attrs<'_> {
    fn invalid(&self, message: String) -> CodecError {
        CodecError::InvalidAttribute {
            block_id: self.id.to_string(),
            message,
        }
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<String>, CodecError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(format!("`{key}` must be a string"))),
        }
    }

    fn str(&mut self, key: &str) -> Result<String, CodecError> {
        self.opt_str(key)?
            .ok_or_else(|| self.invalid(format!("missing attribute `{key}`")))
    }

    fn expr_text(&self, key: &str, text: &str) -> Result<Expr, CodecError> {
        parse_expr(text).map_err(|e| CodecError::ExpressionParse {
            block_id: self.id.to_string(),
            attr: key.to_string(),
            message: e.to_string(),
        })
    }

    fn expr(&mut self, key: &str) -> Result<Expr, CodecError> {
        let text = self.str(key)?;
        self.expr_text(key, &text)
    }

    /// Missing or blank means no expression.
    fn opt_expr(&mut self, key: &str) -> Result<Option<Expr>, CodecError> {
        match self.opt_str(key)? {
            Some(text) if !text.trim().is_empty() => self.expr_text(key, &text).map(Some),
            _ => Ok(None),
        }
    }

    fn ty(&mut self, key: &str) -> Result<DataType, CodecError> {
        let text = self.str(key)?;
        text.parse()
            .map_err(|e: crate::program::TypeParseError| self.invalid(e.to_string()))
    }

    fn exprs(&mut self, key: &str) -> Result<Vec<Expr>, CodecError> {
        match self.map.remove(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => self.expr_text(key, s),
                    _ => Err(self.invalid(format!("`{key}` must hold strings"))),
                })
                .collect(),
            Some(_) => Err(self.invalid(format!("`{key}` must be an array"))),
        }
    }

    fn params(&mut self, key: &str) -> Result<Vec<Param>, CodecError> {
        match self.map.remove(key) {
            None => Ok(Vec::new()),
            Some(v) => serde_json::from_value(v)
                .map_err(|e| self.invalid(format!("`{key}`: {e}"))),
        }
    }

    fn finish(self) -> Result<(), CodecError> {
        match self.map.keys().next() {
            Some(k) => Err(self.invalid(format!("unknown attribute `{k}`"))),
            None => Ok(()),
        }
    }
}

fn stmt(kind: BlockKind, a: &mut Attrs) -> Result<Stmt, CodecError> {
    Ok(match kind {
        BlockKind::Declaration => Stmt::Declaration {
            name: a.str("name")?,
            ty: a.ty("type")?,
            init: a.opt_expr("init")?,
        },
        BlockKind::Assignment => Stmt::Assignment {
            target: a.expr("target")?,
            value: a.opt_expr("value")?,
        },
        BlockKind::If => Stmt::If {
            cond: a.opt_expr("cond")?,
        },
        BlockKind::Else => Stmt::Else,
        BlockKind::Switch => Stmt::Switch { on: a.expr("on")? },
        BlockKind::Case => Stmt::Case {
            label: a.opt_expr("value")?,
        },
        BlockKind::ForLoop => Stmt::ForLoop {
            var: a.str("var")?,
            init: a.expr("init")?,
            cond: a.opt_expr("cond")?,
            step: a.expr("step")?,
        },
        BlockKind::WhileLoop => Stmt::WhileLoop {
            cond: a.opt_expr("cond")?,
        },
        BlockKind::DoWhileLoop => Stmt::DoWhileLoop {
            cond: a.opt_expr("cond")?,
        },
        BlockKind::FunctionDef => Stmt::FunctionDef {
            name: a.str("name")?,
            return_type: a.ty("return_type")?,
            params: a.params("params")?,
        },
        BlockKind::FunctionCall => Stmt::FunctionCall {
            callee: a.str("callee")?,
            args: a.exprs("args")?,
        },
        BlockKind::Return => Stmt::Return {
            value: a.opt_expr("value")?,
        },
        BlockKind::Preprocessor => Stmt::Preprocessor {
            directive: a.str("directive")?,
        },
        BlockKind::StructDef => Stmt::StructDef {
            name: a.str("name")?,
            fields: a.params("fields")?,
        },
        BlockKind::FileOp => {
            let op = match a.str("op")?.as_str() {
                "open" => FileOpKind::Open,
                "close" => FileOpKind::Close,
                "write" => FileOpKind::Write,
                "read" => FileOpKind::Read,
                other => return Err(a.invalid(format!("unknown file operation `{other}`"))),
            };
            Stmt::FileOp(FileOp {
                op,
                handle: a.str("handle")?,
                path: a.opt_expr("path")?,
                mode: a.opt_str("mode")?,
                format: a.opt_str("format")?,
                args: a.exprs("args")?,
            })
        }
        BlockKind::MemAlloc => Stmt::MemAlloc {
            target: a.expr("target")?,
            elem_type: a.ty("type")?,
            count: a.expr("count")?,
        },
        BlockKind::MemFree => Stmt::MemFree {
            target: a.expr("target")?,
        },
        BlockKind::Output => Stmt::Output {
            format: a.str("format")?,
            args: a.exprs("args")?,
        },
        BlockKind::Input => Stmt::Input {
            format: a.str("format")?,
            args: a.exprs("args")?,
        },
        BlockKind::Break => Stmt::Break,
        BlockKind::Continue => Stmt::Continue,
    })
}

fn exprs_value(es: &[Expr]) -> Value {
    Value::Array(es.iter().map(|e| Value::String(e.to_string())).collect())
}

fn attrs_value(stmt: &Stmt) -> Map<String, Value> {
    let mut m = Map::new();
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    fn s(x: impl ToString) -> Value {
        Value::String(x.to_string())
    }
    match stmt {
        Stmt::Declaration { name, ty, init } => {
            put("name", s(name));
            put("type", s(ty));
            if let Some(e) = init {
                put("init", s(e));
            }
        }
        Stmt::Assignment { target, value } => {
            put("target", s(target));
            if let Some(e) = value {
                put("value", s(e));
            }
        }
        Stmt::If { cond } | Stmt::WhileLoop { cond } | Stmt::DoWhileLoop { cond } => {
            if let Some(e) = cond {
                put("cond", s(e));
            }
        }
        Stmt::Switch { on } => put("on", s(on)),
        Stmt::Case { label } => {
            if let Some(e) = label {
                put("value", s(e));
            }
        }
        Stmt::ForLoop {
            var,
            init,
            cond,
            step,
        } => {
            put("var", s(var));
            put("init", s(init));
            if let Some(e) = cond {
                put("cond", s(e));
            }
            put("step", s(step));
        }
        Stmt::FunctionDef {
            name,
            return_type,
            params,
        } => {
            put("name", s(name));
            put("return_type", s(return_type));
            put("params", serde_json::to_value(params).expect("params serialize"));
        }
        Stmt::FunctionCall { callee, args } => {
            put("callee", s(callee));
            put("args", exprs_value(args));
        }
        Stmt::Return { value } => {
            if let Some(e) = value {
                put("value", s(e));
            }
        }
        Stmt::Preprocessor { directive } => put("directive", s(directive)),
        Stmt::StructDef { name, fields } => {
            put("name", s(name));
            put("fields", serde_json::to_value(fields).expect("fields serialize"));
        }
        Stmt::FileOp(f) => {
            put("op", s(f.op.as_str()));
            put("handle", s(&f.handle));
            if let Some(p) = &f.path {
                put("path", s(p));
            }
            if let Some(mode) = &f.mode {
                put("mode", s(mode));
            }
            if let Some(format) = &f.format {
                put("format", s(format));
            }
            if !f.args.is_empty() {
                put("args", exprs_value(&f.args));
            }
        }
        Stmt::MemAlloc {
            target,
            elem_type,
            count,
        } => {
            put("target", s(target));
            put("type", s(elem_type));
            put("count", s(count));
        }
        Stmt::MemFree { target } => put("target", s(target)),
        Stmt::Output { format, args } | Stmt::Input { format, args } => {
            put("format", s(format));
            put("args", exprs_value(args));
        }
        Stmt::Else | Stmt::Break | Stmt::Continue => {}
    }
    m
}

fn block_value(b: &Block) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), Value::String(b.id.0.clone()));
    m.insert("kind".into(), Value::String(b.kind().as_str().into()));
    if b.layer != TemplateRegistry::builtin_layer(b.kind()) {
        m.insert("layer".into(), Value::String(b.layer.template_name.clone()));
    }
    m.insert("attrs".into(), Value::Object(attrs_value(&b.stmt)));
    m.insert(
        "children".into(),
        Value::Array(b.children.iter().map(block_value).collect()),
    );
    Value::Object(m)
}

pub(crate) fn solution_to_value(program: &Program) -> Value {
    let mut v = json!({ "blocks": program.blocks.iter().map(block_value).collect::<Vec<_>>() });
    if program.entry_function != "main" {
        v["entry"] = Value::String(program.entry_function.clone());
    }
    v
}

/// Canonical text: sorted keys, two-space indentation, trailing newline.
pub fn serialize_solution(program: &Program) -> String {
    let mut out = serde_json::to_string_pretty(&solution_to_value(program))
        .expect("solution values always serialize");
    out.push('\n');
    out
}

//! Structured representation of student solutions: a tree of typed blocks
//! ("layers") carrying embedded expressions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

mod attrs;
mod expr;
mod nodes;
mod template;
mod types;
mod typing;
mod validate;

pub use attrs::{format_specifiers, AttrValue};
pub(crate) use attrs::attr_names;
pub use expr::{BinaryOp, Expr, ExprNodeKind, UnaryOp, MAX_EXPR_DEPTH};
pub use nodes::{enumerate_nodes, KindFilter, NodeRef};
pub use template::{FieldType, LayerClass, Template, TemplateError, TemplateRegistry};
pub use types::{is_identifier, DataType, TypeParseError, MAX_POINTER_DEPTH};
pub use typing::{
    infer_type, typecheck_program, Globals, ScopeIndex, Signature, TypeEnv, TypeError, TypeIssue,
};
pub use validate::{validate_program, Defect, DefectKind, ValidationReport};


/// Every kind of block the workspace offers.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum BlockKind {
    Declaration,
    Assignment,
    If,
    Else,
    Switch,
    Case,
    ForLoop,
    WhileLoop,
    DoWhileLoop,
    FunctionDef,
    FunctionCall,
    Return,
    Preprocessor,
    StructDef,
    FileOp,
    MemAlloc,
    MemFree,
    Output,
    Input,
    Break,
    Continue,
}

impl BlockKind {
    pub const ALL: [BlockKind; 21] = [
        BlockKind::Declaration,
        BlockKind::Assignment,
        BlockKind::If,
        BlockKind::Else,
        BlockKind::Switch,
        BlockKind::Case,
        BlockKind::ForLoop,
        BlockKind::WhileLoop,
        BlockKind::DoWhileLoop,
        BlockKind::FunctionDef,
        BlockKind::FunctionCall,
        BlockKind::Return,
        BlockKind::Preprocessor,
        BlockKind::StructDef,
        BlockKind::FileOp,
        BlockKind::MemAlloc,
        BlockKind::MemFree,
        BlockKind::Output,
        BlockKind::Input,
        BlockKind::Break,
        BlockKind::Continue,
    ];

    /// Kinds that may own child blocks.
    pub fn is_container(self) -> bool {
        matches!(
            self,
            BlockKind::If
                | BlockKind::Switch
                | BlockKind::ForLoop
                | BlockKind::WhileLoop
                | BlockKind::DoWhileLoop
                | BlockKind::FunctionDef
        )
    }

    pub fn is_loop(self) -> bool {
        matches!(
            self,
            BlockKind::ForLoop | BlockKind::WhileLoop | BlockKind::DoWhileLoop
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Declaration => "Declaration",
            BlockKind::Assignment => "Assignment",
            BlockKind::If => "If",
            BlockKind::Else => "Else",
            BlockKind::Switch => "Switch",
            BlockKind::Case => "Case",
            BlockKind::ForLoop => "ForLoop",
            BlockKind::WhileLoop => "WhileLoop",
            BlockKind::DoWhileLoop => "DoWhileLoop",
            BlockKind::FunctionDef => "FunctionDef",
            BlockKind::FunctionCall => "FunctionCall",
            BlockKind::Return => "Return",
            BlockKind::Preprocessor => "Preprocessor",
            BlockKind::StructDef => "StructDef",
            BlockKind::FileOp => "FileOp",
            BlockKind::MemAlloc => "MemAlloc",
            BlockKind::MemFree => "MemFree",
            BlockKind::Output => "Output",
            BlockKind::Input => "Input",
            BlockKind::Break => "Break",
            BlockKind::Continue => "Continue",
        }
    }

    pub fn from_name(name: &str) -> Option<BlockKind> {
        BlockKind::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Authoring-time stable block identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub String);

impl BlockId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for BlockId {
    fn from(s: &str) -> Self {
        BlockId(s.to_string())
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTag {
    pub class: LayerClass,
    pub template_name: String,
}

/// A named, typed slot: function parameter or struct field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: DataType,
}

impl Param {
    pub fn new(name: &str, ty: DataType) -> Self {
        Param {
            name: name.to_string(),
            ty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileOpKind {
    Open,
    Close,
    Write,
    Read,
}

impl FileOpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FileOpKind::Open => "open",
            FileOpKind::Close => "close",
            FileOpKind::Write => "write",
            FileOpKind::Read => "read",
        }
    }
}

/// File operation on a virtual file through a `FILE*` variable.
///
/// `open` uses `path` and `mode`; `write` and `read` use `format` and `args`
/// with `fprintf`/`fscanf` conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct FileOp {
    pub op: FileOpKind,
    pub handle: String,
    pub path: Option<Expr>,
    pub mode: Option<String>,
    pub format: Option<String>,
    pub args: Vec<Expr>,
}

/// Kind-specific attributes of a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Declaration {
        name: String,
        ty: DataType,
        init: Option<Expr>,
    },
    Assignment {
        target: Expr,
        value: Option<Expr>,
    },
    If {
        cond: Option<Expr>,
    },
    /// Marker inside an `If`: children after it form the else-branch.
    Else,
    Switch {
        on: Expr,
    },
    /// Marker inside a `Switch`; `None` is the default label.
    Case {
        label: Option<Expr>,
    },
    /// `for (var = init; cond; var = step)`.
    ForLoop {
        var: String,
        init: Expr,
        cond: Option<Expr>,
        step: Expr,
    },
    WhileLoop {
        cond: Option<Expr>,
    },
    DoWhileLoop {
        cond: Option<Expr>,
    },
    FunctionDef {
        name: String,
        return_type: DataType,
        params: Vec<Param>,
    },
    FunctionCall {
        callee: String,
        args: Vec<Expr>,
    },
    Return {
        value: Option<Expr>,
    },
    Preprocessor {
        directive: String,
    },
    StructDef {
        name: String,
        fields: Vec<Param>,
    },
    FileOp(FileOp),
    MemAlloc {
        target: Expr,
        elem_type: DataType,
        count: Expr,
    },
    MemFree {
        target: Expr,
    },
    Output {
        format: String,
        args: Vec<Expr>,
    },
    Input {
        format: String,
        args: Vec<Expr>,
    },
    Break,
    Continue,
}

impl Stmt {
    pub fn kind(&self) -> BlockKind {
        match self {
            Stmt::Declaration { .. } => BlockKind::Declaration,
            Stmt::Assignment { .. } => BlockKind::Assignment,
            Stmt::If { .. } => BlockKind::If,
            Stmt::Else => BlockKind::Else,
            Stmt::Switch { .. } => BlockKind::Switch,
            Stmt::Case { .. } => BlockKind::Case,
            Stmt::ForLoop { .. } => BlockKind::ForLoop,
            Stmt::WhileLoop { .. } => BlockKind::WhileLoop,
            Stmt::DoWhileLoop { .. } => BlockKind::DoWhileLoop,
            Stmt::FunctionDef { .. } => BlockKind::FunctionDef,
            Stmt::FunctionCall { .. } => BlockKind::FunctionCall,
            Stmt::Return { .. } => BlockKind::Return,
            Stmt::Preprocessor { .. } => BlockKind::Preprocessor,
            Stmt::StructDef { .. } => BlockKind::StructDef,
            Stmt::FileOp(_) => BlockKind::FileOp,
            Stmt::MemAlloc { .. } => BlockKind::MemAlloc,
            Stmt::MemFree { .. } => BlockKind::MemFree,
            Stmt::Output { .. } => BlockKind::Output,
            Stmt::Input { .. } => BlockKind::Input,
            Stmt::Break => BlockKind::Break,
            Stmt::Continue => BlockKind::Continue,
        }
    }

    /// Every expression carried by this statement, labelled by attribute name.
    pub fn expressions(&self) -> Vec<(&'static str, &Expr)> {
        fn opt<'a>(name: &'static str, e: &'a Option<Expr>, out: &mut Vec<(&'static str, &'a Expr)>) {
            if let Some(e) = e {
                out.push((name, e));
            }
        }
        let mut out = Vec::new();
        match self {
            Stmt::Declaration { init, .. } => opt("init", init, &mut out),
            Stmt::Assignment { target, value } => {
                out.push(("target", target));
                opt("value", value, &mut out);
            }
            Stmt::If { cond } | Stmt::WhileLoop { cond } | Stmt::DoWhileLoop { cond } => {
                opt("cond", cond, &mut out)
            }
            Stmt::Switch { on } => out.push(("on", on)),
            Stmt::Case { label } => opt("value", label, &mut out),
            Stmt::ForLoop {
                init, cond, step, ..
            } => {
                out.push(("init", init));
                opt("cond", cond, &mut out);
                out.push(("step", step));
            }
            Stmt::FunctionCall { args, .. } | Stmt::Output { args, .. } | Stmt::Input { args, .. } => {
                out.extend(args.iter().map(|a| ("args", a)))
            }
            Stmt::Return { value } => opt("value", value, &mut out),
            Stmt::FileOp(f) => {
                opt("path", &f.path, &mut out);
                out.extend(f.args.iter().map(|a| ("args", a)));
            }
            Stmt::MemAlloc { target, count, .. } => {
                out.push(("target", target));
                out.push(("count", count));
            }
            Stmt::MemFree { target } => out.push(("target", target)),
            Stmt::Else
            | Stmt::FunctionDef { .. }
            | Stmt::Preprocessor { .. }
            | Stmt::StructDef { .. }
            | Stmt::Break
            | Stmt::Continue => {}
        }
        out
    }

    /// Variable names the statement refers to outside of expressions.
    pub fn named_variables(&self) -> Vec<&str> {
        match self {
            Stmt::ForLoop { var, .. } => vec![var.as_str()],
            Stmt::FileOp(f) => vec![f.handle.as_str()],
            _ => Vec::new(),
        }
    }

    /// Every data type written in the statement.
    pub fn types(&self) -> Vec<&DataType> {
        match self {
            Stmt::Declaration { ty, .. } => vec![ty],
            Stmt::FunctionDef {
                return_type,
                params,
                ..
            } => std::iter::once(return_type)
                .chain(params.iter().map(|p| &p.ty))
                .collect(),
            Stmt::StructDef { fields, .. } => fields.iter().map(|p| &p.ty).collect(),
            Stmt::MemAlloc { elem_type, .. } => vec![elem_type],
            _ => Vec::new(),
        }
    }

    /// Format string for `printf`/`scanf` style statements.
    pub fn format(&self) -> Option<(&str, &[Expr])> {
        match self {
            Stmt::Output { format, args } | Stmt::Input { format, args } => {
                Some((format.as_str(), args.as_slice()))
            }
            Stmt::FileOp(FileOp {
                format: Some(format),
                args,
                ..
            }) => Some((format.as_str(), args.as_slice())),
            _ => None,
        }
    }
}

/// One element of the workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub layer: LayerTag,
    pub stmt: Stmt,
    pub children: Vec<Block>,
}

impl Block {
    /// Builds a block tagged with the built-in layer for its kind.
    pub fn new(id: &str, stmt: Stmt) -> Self {
        let layer = TemplateRegistry::builtin_layer(stmt.kind());
        Block {
            id: BlockId::from(id),
            layer,
            stmt,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<Block>) -> Self {
        self.children = children;
        self
    }

    pub fn kind(&self) -> BlockKind {
        self.stmt.kind()
    }

    pub fn attr(&self, name: &str) -> Option<AttrValue<'_>> {
        attrs::attr(&self.stmt, name)
    }

    /// Total number of blocks in this subtree, including self.
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Block::count).sum::<usize>()
    }
}

/// A complete solution: the unit students submit.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub blocks: Vec<Block>,
    pub entry_function: String,
}

impl Default for Program {
    fn default() -> Self {
        Program {
            blocks: Vec::new(),
            entry_function: "main".to_string(),
        }
    }
}

impl Program {
    pub fn new(blocks: Vec<Block>) -> Self {
        Program {
            blocks,
            ..Program::default()
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.iter().map(Block::count).sum()
    }

    /// Struct declarations by name; the first definition of a name wins.
    pub fn struct_defs(&self) -> BTreeMap<String, Vec<Param>> {
        let mut out = BTreeMap::new();
        for n in enumerate_nodes(self, &KindFilter::only([BlockKind::StructDef])) {
            if let Stmt::StructDef { name, fields } = &n.block.stmt {
                out.entry(name.clone()).or_insert_with(|| fields.clone());
            }
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&Block> {
        enumerate_nodes(self, &KindFilter::All)
            .into_iter()
            .find(|n| n.block.id.as_str() == id)
            .map(|n| n.block)
    }

    /// The entry function definition (searched at top level only).
    pub fn entry(&self) -> Option<&Block> {
        self.blocks.iter().find(|b| {
            matches!(&b.stmt, Stmt::FunctionDef { name, .. } if *name == self.entry_function)
        })
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{
    enumerate_nodes, is_identifier, Block, BlockKind, Expr, KindFilter, Program, Stmt,
    TemplateRegistry, MAX_EXPR_DEPTH, MAX_POINTER_DEPTH,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefectKind {
    MissingEntryFunction { name: String },
    DuplicateEntryFunction { name: String },
    /// Positions are child-index paths from the root, e.g. `0/2/1`.
    DuplicateId { first: String, second: String },
    EmptyId,
    UnknownTemplate { template: String },
    LayerKindMismatch { template: String },
    DisallowedLayer { template: String },
    UnexpectedChildren,
    UnresolvedStruct { name: String },
    PointerTooDeep { ty: String },
    ExpressionTooDeep { attr: String },
    MisplacedElse,
    MisplacedCase,
    NonConstantCaseLabel,
    InvalidIdentifier { name: String },
}

/// One structural problem, attached to the offending block when there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Defect {
    pub block_id: Option<String>,
    #[serde(flatten)]
    pub kind: DefectKind,
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = &self.block_id {
            write!(f, "block `{id}`: ")?;
        }
        match &self.kind {
            DefectKind::MissingEntryFunction { name } => write!(f, "no function `{name}` defined"),
            DefectKind::DuplicateEntryFunction { name } => {
                write!(f, "function `{name}` defined more than once")
            }
            DefectKind::DuplicateId { first, second } => {
                write!(f, "id used at both {first} and {second}")
            }
            DefectKind::EmptyId => write!(f, "empty block id"),
            DefectKind::UnknownTemplate { template } => write!(f, "unknown layer `{template}`"),
            DefectKind::LayerKindMismatch { template } => {
                write!(f, "layer `{template}` does not apply to this kind of block")
            }
            DefectKind::DisallowedLayer { template } => {
                write!(f, "layer `{template}` is not available in this exercise")
            }
            DefectKind::UnexpectedChildren => write!(f, "only control blocks may contain blocks"),
            DefectKind::UnresolvedStruct { name } => write!(f, "struct `{name}` is not defined"),
            DefectKind::PointerTooDeep { ty } => write!(f, "type `{ty}` nests pointers too deeply"),
            DefectKind::ExpressionTooDeep { attr } => write!(f, "expression `{attr}` is too deep"),
            DefectKind::MisplacedElse => write!(f, "else must appear once, directly inside an if"),
            DefectKind::MisplacedCase => write!(f, "case labels belong directly inside a switch"),
            DefectKind::NonConstantCaseLabel => write!(f, "case label must be a constant"),
            DefectKind::InvalidIdentifier { name } => write!(f, "`{name}` is not a valid name"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub defects: Vec<Defect>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }

    fn push(&mut self, block: Option<&Block>, kind: DefectKind) {
        self.defects.push(Defect {
            block_id: block.map(|b| b.id.0.clone()),
            kind,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.defects.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Structural legality of a workspace. `allowed_layers` of `None` permits
/// every registered layer.
pub fn validate_program(
    program: &Program,
    allowed_layers: Option<&BTreeSet<String>>,
    registry: &TemplateRegistry,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    let entries = enumerate_nodes(program, &KindFilter::only([BlockKind::FunctionDef]))
        .into_iter()
        .filter(|n| matches!(&n.block.stmt, Stmt::FunctionDef { name, .. } if *name == program.entry_function))
        .count();
    match entries {
        0 => report.push(
            None,
            DefectKind::MissingEntryFunction {
                name: program.entry_function.clone(),
            },
        ),
        1 => {}
        _ => report.push(
            None,
            DefectKind::DuplicateEntryFunction {
                name: program.entry_function.clone(),
            },
        ),
    }

    let mut seen: BTreeMap<&str, String> = BTreeMap::new();
    let structs = program.struct_defs();
    walk(&program.blocks, &mut String::new(), &mut |block, path| {
        if block.id.0.is_empty() {
            report.push(Some(block), DefectKind::EmptyId);
        } else if let Some(first) = seen.get(block.id.as_str()) {
            report.push(
                Some(block),
                DefectKind::DuplicateId {
                    first: first.clone(),
                    second: path.to_string(),
                },
            );
        } else {
            seen.insert(block.id.as_str(), path.to_string());
        }
        check_block(block, allowed_layers, registry, &structs, &mut report);
    });
    top_level_marker_defects(program, &mut report);
    report
}

fn walk<'p>(blocks: &'p [Block], path: &mut String, visit: &mut dyn FnMut(&'p Block, &str)) {
    for (i, b) in blocks.iter().enumerate() {
        let len = path.len();
        if !path.is_empty() {
            path.push('/');
        }
        path.push_str(&i.to_string());
        visit(b, path);
        walk(&b.children, path, visit);
        path.truncate(len);
    }
}

fn check_block(
    block: &Block,
    allowed: Option<&BTreeSet<String>>,
    registry: &TemplateRegistry,
    structs: &BTreeMap<String, Vec<super::Param>>,
    report: &mut ValidationReport,
) {
    let template = &block.layer.template_name;
    match registry.lookup(template) {
        None => report.push(
            Some(block),
            DefectKind::UnknownTemplate {
                template: template.clone(),
            },
        ),
        Some(t) if !t.binds_block_kinds.contains(&block.kind()) => report.push(
            Some(block),
            DefectKind::LayerKindMismatch {
                template: template.clone(),
            },
        ),
        Some(_) => {}
    }
    if let Some(allowed) = allowed {
        if !allowed.contains(template) {
            report.push(
                Some(block),
                DefectKind::DisallowedLayer {
                    template: template.clone(),
                },
            );
        }
    }
    if !block.kind().is_container() && !block.children.is_empty() {
        report.push(Some(block), DefectKind::UnexpectedChildren);
    }

    for ty in block.stmt.types() {
        for name in ty.struct_names() {
            if !structs.contains_key(name) {
                report.push(
                    Some(block),
                    DefectKind::UnresolvedStruct {
                        name: name.to_string(),
                    },
                );
            }
        }
        if ty.pointer_depth() > MAX_POINTER_DEPTH {
            report.push(Some(block), DefectKind::PointerTooDeep { ty: ty.to_string() });
        }
    }
    for (attr, expr) in block.stmt.expressions() {
        if expr.depth() > MAX_EXPR_DEPTH {
            report.push(
                Some(block),
                DefectKind::ExpressionTooDeep {
                    attr: attr.to_string(),
                },
            );
        }
    }

    let mut names: Vec<&str> = block.stmt.named_variables();
    match &block.stmt {
        Stmt::Declaration { name, .. }
        | Stmt::FunctionDef { name, .. }
        | Stmt::StructDef { name, .. } => names.push(name),
        Stmt::FunctionCall { callee, .. } => names.push(callee),
        _ => {}
    }
    if let Stmt::FunctionDef { params: fields, .. } | Stmt::StructDef { fields, .. } = &block.stmt {
        names.extend(fields.iter().map(|p| p.name.as_str()));
    }
    for name in names {
        if !is_identifier(name) {
            report.push(
                Some(block),
                DefectKind::InvalidIdentifier {
                    name: name.to_string(),
                },
            );
        }
    }

    if let Stmt::Case { label: Some(l) } = &block.stmt {
        if !matches!(l, Expr::Int(_) | Expr::Char(_)) {
            report.push(Some(block), DefectKind::NonConstantCaseLabel);
        }
    }

    // Markers: Else only directly under If (at most once), Case only under Switch.
    let elses = block
        .children
        .iter()
        .filter(|c| matches!(c.stmt, Stmt::Else))
        .count();
    for child in &block.children {
        match child.stmt {
            Stmt::Else if block.kind() != BlockKind::If || elses > 1 => {
                report.push(Some(child), DefectKind::MisplacedElse)
            }
            Stmt::Case { .. } if block.kind() != BlockKind::Switch => {
                report.push(Some(child), DefectKind::MisplacedCase)
            }
            _ => {}
        }
    }
}

/// Top-level markers have no parent to check against.
fn top_level_marker_defects(program: &Program, report: &mut ValidationReport) {
    for b in &program.blocks {
        match b.stmt {
            Stmt::Else => report.push(Some(b), DefectKind::MisplacedElse),
            Stmt::Case { .. } => report.push(Some(b), DefectKind::MisplacedCase),
            _ => {}
        }
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BlockKind, LayerTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerClass {
    /// Standard statements: data types, `printf`, `scanf` and the like.
    Basic,
    /// Control structures and algorithm skeletons.
    Advanced,
}

/// Semantic type of a template field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Identifier,
    Expression,
    OptionalExpression,
    ExpressionList,
    DataType,
    ParamList,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    pub layer_class: LayerClass,
    pub required_fields: Vec<(String, FieldType)>,
    pub binds_block_kinds: BTreeSet<BlockKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{0}` is already registered")]
    DuplicateTemplate(String),
    #[error("template `{template}` declares field `{field}` twice")]
    DuplicateField { template: String, field: String },
}

/// Lookup table of layer templates. Built once, read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

fn builtin_spec(kind: BlockKind) -> (&'static str, LayerClass, &'static [(&'static str, FieldType)]) {
    use FieldType::*;
    use LayerClass::*;
    match kind {
        BlockKind::Declaration => (
            "declaration",
            Basic,
            &[("name", Identifier), ("type", DataType), ("init", OptionalExpression)],
        ),
        BlockKind::Assignment => (
            "assignment",
            Basic,
            &[("target", Expression), ("value", OptionalExpression)],
        ),
        BlockKind::If => ("if_else", Advanced, &[("cond", OptionalExpression)]),
        BlockKind::Else => ("else_branch", Advanced, &[]),
        BlockKind::Switch => ("switch", Advanced, &[("on", Expression)]),
        BlockKind::Case => ("case_label", Advanced, &[("value", OptionalExpression)]),
        BlockKind::ForLoop => (
            "for_loop",
            Advanced,
            &[
                ("var", Identifier),
                ("init", Expression),
                ("cond", OptionalExpression),
                ("step", Expression),
            ],
        ),
        BlockKind::WhileLoop => ("while_loop", Advanced, &[("cond", OptionalExpression)]),
        BlockKind::DoWhileLoop => ("do_while_loop", Advanced, &[("cond", OptionalExpression)]),
        BlockKind::FunctionDef => (
            "function_def",
            Advanced,
            &[("name", Identifier), ("return_type", DataType), ("params", ParamList)],
        ),
        BlockKind::FunctionCall => (
            "function_call",
            Basic,
            &[("callee", Identifier), ("args", ExpressionList)],
        ),
        BlockKind::Return => ("return", Basic, &[("value", OptionalExpression)]),
        BlockKind::Preprocessor => ("preprocessor", Basic, &[("directive", Text)]),
        BlockKind::StructDef => (
            "struct_def",
            Advanced,
            &[("name", Identifier), ("fields", ParamList)],
        ),
        BlockKind::FileOp => ("file_op", Basic, &[("op", Text), ("handle", Identifier)]),
        BlockKind::MemAlloc => (
            "malloc_call",
            Basic,
            &[("target", Expression), ("type", DataType), ("count", Expression)],
        ),
        BlockKind::MemFree => ("free_call", Basic, &[("target", Expression)]),
        BlockKind::Output => (
            "printf_call",
            Basic,
            &[("format", Text), ("args", ExpressionList)],
        ),
        BlockKind::Input => (
            "scanf_call",
            Basic,
            &[("format", Text), ("args", ExpressionList)],
        ),
        BlockKind::Break => ("break", Basic, &[]),
        BlockKind::Continue => ("continue", Basic, &[]),
    }
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        TemplateRegistry {
            templates: BTreeMap::new(),
        }
    }

    /// Registry holding one built-in template per block kind.
    pub fn builtin() -> Self {
        let mut reg = TemplateRegistry::empty();
        for kind in BlockKind::ALL {
            reg.register(Self::builtin_template(kind))
                .expect("built-in templates are distinct");
        }
        reg
    }

    pub fn builtin_template(kind: BlockKind) -> Template {
        let (name, class, fields) = builtin_spec(kind);
        Template {
            name: name.to_string(),
            layer_class: class,
            required_fields: fields.iter().map(|(f, t)| (f.to_string(), *t)).collect(),
            binds_block_kinds: BTreeSet::from([kind]),
        }
    }

    pub fn builtin_layer(kind: BlockKind) -> LayerTag {
        let (name, class, _) = builtin_spec(kind);
        LayerTag {
            class,
            template_name: name.to_string(),
        }
    }

    pub fn register(&mut self, template: Template) -> Result<(), TemplateError> {
        if self.templates.contains_key(&template.name) {
            return Err(TemplateError::DuplicateTemplate(template.name));
        }
        let mut seen = BTreeSet::new();
        for (field, _) in &template.required_fields {
            if !seen.insert(field) {
                return Err(TemplateError::DuplicateField {
                    template: template.name.clone(),
                    field: field.clone(),
                });
            }
        }
        self.templates.insert(template.name.clone(), template);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub fn layer(&self, name: &str) -> Option<LayerTag> {
        self.lookup(name).map(|t| LayerTag {
            class: t.layer_class,
            template_name: t.name.clone(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        TemplateRegistry::builtin()
    }
}

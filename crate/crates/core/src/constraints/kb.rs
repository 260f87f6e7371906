use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::predicate::{Relevance, Satisfaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleCategory {
    SolutionMethods,
    MissingReferences,
    Pointer,
    Memory,
    File,
    Functions,
    DataTypes,
    Syntax,
}

impl RuleCategory {
    pub const ALL: [RuleCategory; 8] = [
        RuleCategory::SolutionMethods,
        RuleCategory::MissingReferences,
        RuleCategory::Pointer,
        RuleCategory::Memory,
        RuleCategory::File,
        RuleCategory::Functions,
        RuleCategory::DataTypes,
        RuleCategory::Syntax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleCategory::SolutionMethods => "SolutionMethods",
            RuleCategory::MissingReferences => "MissingReferences",
            RuleCategory::Pointer => "Pointer",
            RuleCategory::Memory => "Memory",
            RuleCategory::File => "File",
            RuleCategory::Functions => "Functions",
            RuleCategory::DataTypes => "DataTypes",
            RuleCategory::Syntax => "Syntax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == name)
    }
}

impl fmt::Display for RuleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptedTemplates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub novice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terse: Option<String>,
}

/// Message templates. Placeholders: `{a}` (block id), `{a.attr}`
/// (attribute text), `{a.attr:type}` (attribute type), `{a.kind}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackTemplates {
    pub elaborated: String,
    /// Hint showing the correct construct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<String>,
    #[serde(default)]
    pub adapted: AdaptedTemplates,
}

impl FeedbackTemplates {
    fn all(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.elaborated.as_str())
            .chain(self.correct.as_deref())
            .chain(self.adapted.novice.as_deref())
            .chain(self.adapted.standard.as_deref())
            .chain(self.adapted.terse.as_deref())
    }
}

/// Placeholder bodies (`a.value`) in a template, in order.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub category: RuleCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub cr: Relevance,
    pub cs: Satisfaction,
    pub feedback: FeedbackTemplates,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    pub constraints: Vec<Constraint>,
    pub tag_vocabulary: BTreeSet<String>,
    pub version: String,
}

impl KnowledgeBase {
    pub fn get(&self, id: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum KbError {
    #[error("{doc}: rule {}: {message}", rule_id.as_deref().unwrap_or("?"))]
    RuleParseError {
        doc: String,
        rule_id: Option<String>,
        message: String,
    },
    #[error("rule id `{rule_id}` is defined more than once")]
    DuplicateRuleId { rule_id: String },
    #[error("rule `{rule_id}`: unknown category `{category}`")]
    UnknownCategory { rule_id: String, category: String },
    #[error("rule `{rule_id}`: `{binding}` is not bound by the relevance pattern")]
    UnboundBindingInCs { rule_id: String, binding: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    tags: BTreeSet<String>,
    rules: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    category: String,
    #[serde(default)]
    description: Option<String>,
    cr: Relevance,
    cs: Satisfaction,
    feedback: FeedbackTemplates,
    #[serde(default = "enabled_default")]
    enabled: bool,
}

fn enabled_default() -> bool {
    true
}

/// Loads and merges rule documents given as `(name, text)` pairs.
pub fn load_knowledge_base(documents: &[(&str, &str)]) -> Result<KnowledgeBase, KbError> {
    let mut kb = KnowledgeBase::default();
    let mut versions: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut cr_tags: Vec<(String, String, String)> = Vec::new();
    for (doc, text) in documents {
        let parse_err = |rule_id: Option<String>, message: String| KbError::RuleParseError {
            doc: doc.to_string(),
            rule_id,
            message,
        };
        let raw: RawDoc =
            serde_json::from_str(text).map_err(|e| parse_err(None, e.to_string()))?;
        if let Some(v) = raw.version {
            if !versions.contains(&v) {
                versions.push(v);
            }
        }
        kb.tag_vocabulary.extend(raw.tags);
        for value in raw.rules {
            let id_hint = value.get("id").and_then(Value::as_str).map(str::to_string);
            let rule: RawRule = serde_json::from_value(value)
                .map_err(|e| parse_err(id_hint.clone(), e.to_string()))?;
            let category =
                RuleCategory::from_name(&rule.category).ok_or_else(|| KbError::UnknownCategory {
                    rule_id: rule.id.clone(),
                    category: rule.category.clone(),
                })?;
            if !seen.insert(rule.id.clone()) {
                return Err(KbError::DuplicateRuleId { rule_id: rule.id });
            }
            let constraint = Constraint {
                id: rule.id,
                category,
                description: rule.description,
                cr: rule.cr,
                cs: rule.cs,
                feedback: rule.feedback,
                enabled: rule.enabled,
            };
            check_bindings(&constraint).map_err(|e| match e {
                BindingIssue::Parse(message) => parse_err(Some(constraint.id.clone()), message),
                BindingIssue::Unbound(binding) => KbError::UnboundBindingInCs {
                    rule_id: constraint.id.clone(),
                    binding,
                },
            })?;
            for tag in &constraint.cr.tags {
                cr_tags.push((doc.to_string(), constraint.id.clone(), tag.clone()));
            }
            kb.constraints.push(constraint);
        }
    }
    if let Some((doc, id, tag)) = cr_tags
        .into_iter()
        .find(|(_, _, t)| !kb.tag_vocabulary.contains(t))
    {
        return Err(KbError::RuleParseError {
            doc,
            rule_id: Some(id),
            message: format!("tag `{tag}` is not in the tag vocabulary"),
        });
    }
    kb.version = if versions.is_empty() {
        "unversioned".to_string()
    } else {
        versions.join("+")
    };
    Ok(kb)
}

enum BindingIssue {
    Parse(String),
    Unbound(String),
}

fn check_bindings(c: &Constraint) -> Result<(), BindingIssue> {
    let mut bound: Vec<&str> = Vec::new();
    for m in &c.cr.matchers {
        if m.bind.is_empty() || m.bind.contains(['.', ':', '{', '}', '@']) {
            return Err(BindingIssue::Parse(format!("invalid binding name `{}`", m.bind)));
        }
        if bound.contains(&m.bind.as_str()) {
            return Err(BindingIssue::Parse(format!("binding `{}` declared twice", m.bind)));
        }
        let mut refs = Vec::new();
        m.preds.iter().for_each(|p| p.bindings(&mut refs));
        if let Some(r) = refs.iter().find(|r| !bound.contains(r)) {
            return Err(BindingIssue::Parse(format!(
                "matcher `{}` refers to `{r}`, which is not bound by an earlier matcher",
                m.bind
            )));
        }
        bound.push(&m.bind);
    }
    if let Some(b) = c.cs.bindings().into_iter().find(|b| !bound.contains(b)) {
        return Err(BindingIssue::Unbound(b.to_string()));
    }
    for template in c.feedback.all() {
        for p in placeholders(template) {
            let binding = p.split(['.', ':']).next().unwrap_or("");
            if !bound.contains(&binding) {
                return Err(BindingIssue::Parse(format!(
                    "feedback placeholder `{{{p}}}` names an unbound block"
                )));
            }
        }
    }
    Ok(())
}

/// Rule count per category; every category is present.
pub fn kb_stats(kb: &KnowledgeBase) -> BTreeMap<RuleCategory, usize> {
    let mut counts: BTreeMap<RuleCategory, usize> =
        RuleCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for c in &kb.constraints {
        *counts.entry(c.category).or_default() += 1;
    }
    counts
}

/// The rule files shipped with the crate, as `(file name, contents)`.
pub const STARTER_DOCUMENTS: [(&str, &str); 8] = [
    (
        "solution_methods.rules.json",
        include_str!("../../kb/solution_methods.rules.json"),
    ),
    (
        "missing_references.rules.json",
        include_str!("../../kb/missing_references.rules.json"),
    ),
    ("pointer.rules.json", include_str!("../../kb/pointer.rules.json")),
    ("memory.rules.json", include_str!("../../kb/memory.rules.json")),
    ("file.rules.json", include_str!("../../kb/file.rules.json")),
    ("functions.rules.json", include_str!("../../kb/functions.rules.json")),
    ("data_types.rules.json", include_str!("../../kb/data_types.rules.json")),
    ("syntax.rules.json", include_str!("../../kb/syntax.rules.json")),
];

pub fn starter_kb() -> KnowledgeBase {
    load_knowledge_base(&STARTER_DOCUMENTS).expect("shipped rule files are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULE: &str = r#"{"id": "r1", "category": "Syntax",
        "cr": {"match": [{"bind": "a", "kind": ["Assignment"]}]},
        "cs": {"present": "a.value"},
        "feedback": {"elaborated": "{a.target} needs a value"}}"#;

    fn doc(rules: &str) -> String {
        format!(r#"{{"version": "t", "rules": [{rules}]}}"#)
    }

    #[test]
    fn duplicate_ids_across_documents() {
        let d = doc(RULE);
        let err = load_knowledge_base(&[("one", &d), ("two", &d)]).unwrap_err();
        assert_eq!(err, KbError::DuplicateRuleId { rule_id: "r1".into() });
    }

    #[test]
    fn unbound_cs_binding() {
        let d = doc(&RULE.replace("a.value", "b.value"));
        let err = load_knowledge_base(&[("one", &d)]).unwrap_err();
        assert_eq!(
            err,
            KbError::UnboundBindingInCs {
                rule_id: "r1".into(),
                binding: "b".into()
            }
        );
    }

    #[test]
    fn unknown_category_and_parse_errors() {
        let d = doc(&RULE.replace("Syntax", "Style"));
        assert!(matches!(
            load_knowledge_base(&[("one", &d)]),
            Err(KbError::UnknownCategory { .. })
        ));
        let d = doc(&RULE.replace("\"cs\"", "\"cz\""));
        assert!(matches!(
            load_knowledge_base(&[("one", &d)]),
            Err(KbError::RuleParseError { rule_id: Some(ref id), .. }) if id == "r1"
        ));
        let d = doc(&RULE.replace("{a.target}", "{z.target}"));
        assert!(matches!(
            load_knowledge_base(&[("one", &d)]),
            Err(KbError::RuleParseError { .. })
        ));
    }

    #[test]
    fn stats_sum_to_total() {
        assert!(kb_stats(&KnowledgeBase::default()).values().all(|n| *n == 0));
        let kb = starter_kb();
        let stats = kb_stats(&kb);
        assert_eq!(stats.len(), 8);
        assert_eq!(stats.values().sum::<usize>(), kb.len());
        assert!(stats.values().all(|n| *n >= 1));
        assert!(kb.len() >= 40);
        assert!(kb.tag_vocabulary.contains("applies-function-over-range"));
    }
}

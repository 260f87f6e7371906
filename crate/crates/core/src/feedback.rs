//! Turns violations into student-facing messages in one of four styles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraints::{KnowledgeBase, RuleCategory, Violation};
use crate::program::BlockId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeedbackKind {
    /// Correct/incorrect only.
    #[serde(rename = "response")]
    KnowledgeOfResponse,
    /// Incorrect, plus what the correct construct looks like.
    #[serde(rename = "correct")]
    KnowledgeOfCorrectResponse,
    #[serde(rename = "elaborated")]
    Elaborated,
    /// Elaborated text chosen by the student's learning level.
    #[serde(rename = "adapted")]
    Adapted,
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 4] = [
        FeedbackKind::KnowledgeOfResponse,
        FeedbackKind::KnowledgeOfCorrectResponse,
        FeedbackKind::Elaborated,
        FeedbackKind::Adapted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::KnowledgeOfResponse => "response",
            FeedbackKind::KnowledgeOfCorrectResponse => "correct",
            FeedbackKind::Elaborated => "elaborated",
            FeedbackKind::Adapted => "adapted",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

/// Learning-level tier used by adapted feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Novice,
    Standard,
    Terse,
}

impl Tier {
    /// Below 40 novice, below 80 standard, otherwise terse.
    pub fn for_level(level: f64) -> Tier {
        if level < 40.0 {
            Tier::Novice
        } else if level < 80.0 {
            Tier::Standard
        } else {
            Tier::Terse
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeedbackMessage {
    /// Absent on whole-solution messages.
    pub constraint_id: Option<String>,
    pub category: Option<RuleCategory>,
    pub kind: FeedbackKind,
    pub text: String,
    pub target_block_ids: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeedbackError {
    #[error("rule `{constraint_id}` has no {} feedback", kind.as_str())]
    MissingTemplate {
        constraint_id: String,
        kind: FeedbackKind,
    },
    #[error("learning level {0} is outside 0..100")]
    LevelOutOfRange(f64),
}

pub const ALL_SATISFIED: &str = "Correct: your solution satisfies all constraints.";
pub const INCORRECT: &str = "Incorrect: your solution violates at least one constraint.";

/// Replaces `{key}` placeholders with explanation values; unknown keys
/// render as `?`.
pub fn fill_template(template: &str, data: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                out.push_str(data.get(key).map_or("?", String::as_str));
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn targets(v: &Violation) -> Vec<BlockId> {
    let mut ids: Vec<BlockId> = Vec::new();
    for id in &v.binding_order {
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    ids
}

pub fn render_feedback(
    violations: &[Violation],
    kind: FeedbackKind,
    learning_level: f64,
    kb: &KnowledgeBase,
) -> Result<Vec<FeedbackMessage>, FeedbackError> {
    if !(0.0..=100.0).contains(&learning_level) {
        return Err(FeedbackError::LevelOutOfRange(learning_level));
    }
    let whole = |text: &str, ids: Vec<BlockId>| FeedbackMessage {
        constraint_id: None,
        category: None,
        kind,
        text: text.to_string(),
        target_block_ids: ids,
    };
    if violations.is_empty() {
        return Ok(vec![whole(ALL_SATISFIED, Vec::new())]);
    }
    if kind == FeedbackKind::KnowledgeOfResponse {
        let mut ids = Vec::new();
        for v in violations {
            for id in targets(v) {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        return Ok(vec![whole(INCORRECT, ids)]);
    }
    let tier = Tier::for_level(learning_level);
    violations
        .iter()
        .map(|v| {
            let missing = || FeedbackError::MissingTemplate {
                constraint_id: v.constraint_id.clone(),
                kind,
            };
            let templates = &kb.get(&v.constraint_id).ok_or_else(missing)?.feedback;
            let template = match kind {
                FeedbackKind::KnowledgeOfCorrectResponse => {
                    templates.correct.as_deref().ok_or_else(missing)?
                }
                FeedbackKind::Adapted => match tier {
                    Tier::Novice => templates.adapted.novice.as_deref(),
                    Tier::Standard => templates.adapted.standard.as_deref(),
                    Tier::Terse => templates.adapted.terse.as_deref(),
                }
                .unwrap_or(&templates.elaborated),
                _ => &templates.elaborated,
            };
            Ok(FeedbackMessage {
                constraint_id: Some(v.constraint_id.clone()),
                category: Some(v.category),
                kind,
                text: fill_template(template, &v.explanation_data),
                target_block_ids: targets(v),
            })
        })
        .collect()
}

/// Violation count per category; all eight categories are present.
pub fn summarize(violations: &[Violation]) -> BTreeMap<RuleCategory, usize> {
    let mut out: BTreeMap<RuleCategory, usize> =
        RuleCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for v in violations {
        *out.entry(v.category).or_default() += 1;
    }
    out
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::solution::{solution_from_value, solution_to_value};
use super::CodecError;
use crate::feedback::FeedbackKind;
use crate::lessons;
use crate::program::{validate_program, Program, TemplateRegistry};

/// Teacher-set limits for the learning score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringLimits {
    pub time_limit_seconds: u64,
    pub feedback_limit: u64,
}

impl ScoringLimits {
    pub fn new(time_limit_seconds: u64, feedback_limit: u64) -> Result<Self, CodecError> {
        if time_limit_seconds == 0 || feedback_limit == 0 {
            return Err(CodecError::InvalidExercise(
                "scoring limits must be strictly positive".into(),
            ));
        }
        Ok(ScoringLimits {
            time_limit_seconds,
            feedback_limit,
        })
    }
}

/// Per-exercise switch for one knowledge-base rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleOverride {
    pub id: String,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exercise {
    pub id: String,
    pub lesson_id: String,
    pub problem_text: String,
    pub allowed_layers: BTreeSet<String>,
    pub problem_tags: BTreeSet<String>,
    pub reference_solution: Program,
    pub scoring_limits: ScoringLimits,
    pub rule_overrides: Vec<RuleOverride>,
    /// When present, a clean solution must also print exactly this.
    pub expected_stdout: Option<String>,
    /// Input tokens fed to the reference run and to submissions by default.
    pub stdin: Vec<String>,
    /// Feedback style for this exercise; the course default applies otherwise.
    pub feedback_kind: Option<FeedbackKind>,
}

impl Exercise {
    /// Override for rule `id`, if the exercise sets one.
    pub fn rule_enabled(&self, id: &str) -> Option<bool> {
        self.rule_overrides
            .iter()
            .rev()
            .find(|o| o.id == id)
            .map(|o| o.enabled)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExercise {
    id: String,
    lesson_id: String,
    problem_text: String,
    allowed_layers: BTreeSet<String>,
    #[serde(default)]
    problem_tags: BTreeSet<String>,
    reference_solution: Value,
    scoring_limits: ScoringLimits,
    #[serde(default)]
    rule_overrides: Vec<RuleOverride>,
    #[serde(default)]
    expected_stdout: Option<String>,
    #[serde(default)]
    stdin: Vec<String>,
    #[serde(default)]
    feedback_kind: Option<FeedbackKind>,
}

/// Parses an `.exercise.json` document. Tags must come from `vocabulary`.
pub fn parse_exercise(
    document: &str,
    vocabulary: &BTreeSet<String>,
) -> Result<Exercise, CodecError> {
    let raw: RawExercise = serde_json::from_str(document).map_err(CodecError::from_json)?;
    let registry = TemplateRegistry::builtin();
    if raw.id.trim().is_empty() {
        return Err(CodecError::InvalidExercise("exercise id is empty".into()));
    }
    if !lessons::is_lesson(&raw.lesson_id) {
        return Err(CodecError::UnknownLesson(raw.lesson_id));
    }
    let limits = ScoringLimits::new(
        raw.scoring_limits.time_limit_seconds,
        raw.scoring_limits.feedback_limit,
    )?;
    if let Some(tag) = raw.problem_tags.iter().find(|t| !vocabulary.contains(*t)) {
        return Err(CodecError::UnknownTag(tag.clone()));
    }
    if let Some(layer) = raw
        .allowed_layers
        .iter()
        .find(|l| registry.lookup(l).is_none())
    {
        return Err(CodecError::InvalidExercise(format!(
            "unknown layer `{layer}` in allowed_layers"
        )));
    }
    let reference = solution_from_value(raw.reference_solution, &registry)?;
    let report = validate_program(&reference, Some(&raw.allowed_layers), &registry);
    if !report.is_valid() {
        return Err(CodecError::InvalidReferenceSolution(report));
    }
    Ok(Exercise {
        id: raw.id,
        lesson_id: raw.lesson_id,
        problem_text: raw.problem_text,
        allowed_layers: raw.allowed_layers,
        problem_tags: raw.problem_tags,
        reference_solution: reference,
        scoring_limits: limits,
        rule_overrides: raw.rule_overrides,
        expected_stdout: raw.expected_stdout,
        stdin: raw.stdin,
        feedback_kind: raw.feedback_kind,
    })
}

pub fn exercise_to_value(ex: &Exercise) -> Value {
    let mut v = serde_json::json!({
        "id": ex.id,
        "lesson_id": ex.lesson_id,
        "problem_text": ex.problem_text,
        "allowed_layers": ex.allowed_layers,
        "problem_tags": ex.problem_tags,
        "reference_solution": solution_to_value(&ex.reference_solution),
        "scoring_limits": ex.scoring_limits,
        "rule_overrides": ex.rule_overrides,
        "stdin": ex.stdin,
    });
    if let Some(out) = &ex.expected_stdout {
        v["expected_stdout"] = Value::String(out.clone());
    }
    if let Some(kind) = ex.feedback_kind {
        v["feedback_kind"] = serde_json::to_value(kind).expect("kind serializes");
    }
    v
}

/// Canonical exercise text; parses back to an equal exercise.
pub fn serialize_exercise(ex: &Exercise) -> String {
    let mut out = serde_json::to_string_pretty(&exercise_to_value(ex)).expect("serializable");
    out.push('\n');
    out
}

//! The "Compile" button: validate, check constraints, explain, and run the
//! program once it is clean.

use serde::Serialize;

use crate::codec::Exercise;
use crate::constraints::{evaluate, KnowledgeBase, Violation};
use crate::feedback::{render_feedback, FeedbackError, FeedbackKind, FeedbackMessage};
use crate::interpreter::{
    compare_output, run, InterpreterError, OutputComparison, RunLimits, RunStatus, RuntimeOutcome,
};
use crate::program::{typecheck_program, validate_program, Defect, Program, TemplateRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeNote {
    pub block_id: String,
    pub attr: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub violations: Vec<Violation>,
    pub type_issues: Vec<TypeNote>,
    pub feedback: Vec<FeedbackMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<RuntimeOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_error: Option<InterpreterError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_check: Option<OutputComparison>,
    /// No violations, a normal run, and the expected output when the
    /// exercise declares one.
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("solution does not validate: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Defect>),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    /// Used when the exercise does not pick a feedback style.
    pub default_feedback: FeedbackKind,
    pub learning_level: f64,
    /// Replaces the exercise's input tokens when set.
    pub stdin: Option<Vec<String>>,
    pub max_steps: u64,
    pub max_output_bytes: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        let limits = RunLimits::default();
        PipelineOptions {
            default_feedback: FeedbackKind::Elaborated,
            learning_level: 50.0,
            stdin: None,
            max_steps: limits.max_steps,
            max_output_bytes: limits.max_output_bytes,
        }
    }
}

pub fn evaluate_solution(
    exercise: &Exercise,
    program: &Program,
    kb: &KnowledgeBase,
    options: &PipelineOptions,
) -> Result<Evaluation, PipelineError> {
    let layers = (!exercise.allowed_layers.is_empty()).then_some(&exercise.allowed_layers);
    let report = validate_program(program, layers, &TemplateRegistry::builtin());
    if !report.is_valid() {
        return Err(PipelineError::Invalid(report.defects));
    }
    let type_issues = typecheck_program(program)
        .into_iter()
        .map(|i| TypeNote {
            block_id: i.block_id.0,
            attr: i.attr,
            message: i.error.to_string(),
        })
        .collect();
    let violations = evaluate(program, exercise, kb);
    let kind = exercise.feedback_kind.unwrap_or(options.default_feedback);
    let feedback = render_feedback(&violations, kind, options.learning_level, kb)?;
    let mut eval = Evaluation {
        violations,
        type_issues,
        feedback,
        runtime: None,
        run_error: None,
        output_check: None,
        completed: false,
    };
    if !eval.violations.is_empty() {
        return Ok(eval);
    }
    let limits = RunLimits {
        max_steps: options.max_steps,
        max_output_bytes: options.max_output_bytes,
        stdin_script: options.stdin.clone().unwrap_or_else(|| exercise.stdin.clone()),
        ..RunLimits::default()
    };
    match run(program, &limits) {
        Ok(outcome) => {
            let check = exercise
                .expected_stdout
                .as_ref()
                .map(|e| compare_output(&outcome, e.as_bytes()));
            eval.completed = outcome.status == RunStatus::Completed
                && check.as_ref().is_none_or(|c| *c == OutputComparison::Equal);
            eval.output_check = check;
            eval.runtime = Some(outcome);
        }
        Err(e) => eval.run_error = Some(e),
    }
    Ok(eval)
}

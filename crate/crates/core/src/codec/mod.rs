//! JSON file and wire formats for solutions (`.sol.json`) and exercises
//! (`.exercise.json`), plus the embedded expression parser.

use serde::Serialize;

mod exercise;
mod expr_parser;
mod solution;

pub use exercise::{
    exercise_to_value, parse_exercise, serialize_exercise, Exercise, RuleOverride, ScoringLimits,
};
pub use expr_parser::{parse_expr, ExprParseError};
pub use solution::{parse_solution, parse_solution_with, serialize_solution};

use crate::program::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail", rename_all = "snake_case")]
pub enum CodecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown block kind `{0}`")]
    UnknownBlockKind(String),
    #[error("block `{block_id}`: cannot parse `{attr}`: {message}")]
    ExpressionParse {
        block_id: String,
        attr: String,
        message: String,
    },
    #[error("block `{block_id}`: {message}")]
    InvalidAttribute { block_id: String, message: String },
    #[error("block `{block_id}`: unknown layer `{template}`")]
    UnknownLayer { block_id: String, template: String },
    #[error("reference solution is invalid: {0}")]
    InvalidReferenceSolution(ValidationReport),
    #[error("unknown problem tag `{0}`")]
    UnknownTag(String),
    #[error("unknown lesson `{0}`")]
    UnknownLesson(String),
    #[error("{0}")]
    InvalidExercise(String),
}

impl CodecError {
    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        CodecError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

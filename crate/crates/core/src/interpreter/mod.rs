//! Bounded tree-walking execution of programs, for the "Compile" and
//! runtime-screen views. Everything happens in memory: files are a map of
//! names to bytes and the heap is simulated, so use-after-free and double
//! free surface as runtime errors instead of undefined behaviour.

mod format;
mod machine;
mod memory;
mod precheck;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::program::Program;

pub use format::format_float;
pub use machine::MAX_CALL_DEPTH;
pub use memory::{MAX_HEAP_CELLS, MAX_OBJECT_CELLS};

pub const DEFAULT_MAX_STEPS: u64 = 100_000;
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunLimits {
    pub max_steps: u64,
    pub max_output_bytes: usize,
    /// Whitespace-free tokens consumed one per input conversion.
    pub stdin_script: Vec<String>,
    /// Virtual files present before the run starts.
    pub files: BTreeMap<String, String>,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_steps: DEFAULT_MAX_STEPS,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
            stdin_script: Vec::new(),
            files: BTreeMap::new(),
        }
    }
}

impl RunLimits {
    pub fn with_stdin(tokens: &[&str]) -> Self {
        RunLimits {
            stdin_script: tokens.iter().map(|t| t.to_string()).collect(),
            ..RunLimits::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    StepLimitExceeded,
    RuntimeError { message: String, block_id: Option<String> },
}

fn lossy<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&String::from_utf8_lossy(bytes))
}

fn lossy_map<S: Serializer>(files: &BTreeMap<String, Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(files.iter().map(|(k, v)| (k, String::from_utf8_lossy(v))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeOutcome {
    #[serde(flatten)]
    pub status: RunStatus,
    #[serde(serialize_with = "lossy")]
    pub stdout: Vec<u8>,
    pub steps_used: u64,
    #[serde(serialize_with = "lossy_map")]
    pub virtual_files: BTreeMap<String, Vec<u8>>,
}

impl RuntimeOutcome {
    pub fn stdout_text(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum InterpreterError {
    #[error("{}{reason}", block_id.as_ref().map(|b| format!("block `{b}`: ")).unwrap_or_default())]
    InvalidProgram {
        block_id: Option<String>,
        reason: String,
    },
    #[error("limits must be positive")]
    InvalidLimits,
}

/// Why execution stopped early.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Fault {
    Runtime(String),
    StepLimit,
    /// A precondition the static checks should have caught.
    Invalid(String),
}

impl Fault {
    pub(crate) fn runtime(msg: impl Into<String>) -> Fault {
        Fault::Runtime(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Fault {
        Fault::Invalid(msg.into())
    }
}

/// Stack given to the interpreter thread; deep recursion in student code
/// must hit the call-depth limit well before this runs out.
const STACK_BYTES: usize = 256 << 20;

/// Executes the entry function. Programs that do not validate or type-check
/// are rejected before anything runs.
pub fn run(program: &Program, limits: &RunLimits) -> Result<RuntimeOutcome, InterpreterError> {
    if limits.max_steps == 0 || limits.max_output_bytes == 0 {
        return Err(InterpreterError::InvalidLimits);
    }
    precheck::precheck(program)?;
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("interpreter".into())
            .stack_size(STACK_BYTES)
            .spawn_scoped(s, || execute(program, limits))
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

fn execute(program: &Program, limits: &RunLimits) -> Result<RuntimeOutcome, InterpreterError> {
    let mut m = machine::Machine::new(program, limits);
    let result = m.run(program);
    let status = match result {
        Ok(()) => RunStatus::Completed,
        Err(Fault::StepLimit) => RunStatus::StepLimitExceeded,
        Err(Fault::Runtime(message)) => RunStatus::RuntimeError {
            message,
            block_id: m.current.map(|b| b.0.clone()),
        },
        Err(Fault::Invalid(reason)) => {
            return Err(InterpreterError::InvalidProgram {
                block_id: m.current.map(|b| b.0.clone()),
                reason,
            })
        }
    };
    Ok(RuntimeOutcome {
        status,
        stdout: m.stdout,
        steps_used: m.steps,
        virtual_files: m.files,
    })
}

/// Bytes shown on each side of the first mismatch.
pub const CONTEXT_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum OutputComparison {
    Equal,
    Mismatch {
        offset: usize,
        expected_context: String,
        actual_context: String,
    },
}

pub fn compare_output(outcome: &RuntimeOutcome, expected: &[u8]) -> OutputComparison {
    compare_bytes(&outcome.stdout, expected)
}

pub fn compare_bytes(actual: &[u8], expected: &[u8]) -> OutputComparison {
    let offset = actual
        .iter()
        .zip(expected)
        .position(|(a, e)| a != e)
        .unwrap_or(actual.len().min(expected.len()));
    if offset == actual.len() && offset == expected.len() {
        return OutputComparison::Equal;
    }
    let window = |b: &[u8]| {
        let start = offset.saturating_sub(CONTEXT_BYTES);
        let end = (offset + CONTEXT_BYTES).min(b.len());
        String::from_utf8_lossy(&b[start.min(end)..end]).into_owned()
    };
    OutputComparison::Mismatch {
        offset,
        expected_context: window(expected),
        actual_context: window(actual),
    }
}

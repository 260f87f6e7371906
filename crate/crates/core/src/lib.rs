//! Constraint-based tutoring for a C-like teaching language.
//!
//! Student programs are block trees ([`program`]) stored as JSON
//! ([`codec`]). They are checked against a knowledge base of
//! relevance/satisfaction constraints ([`constraints`]), explained through
//! several feedback styles ([`feedback`]) and executed in a bounded
//! interpreter ([`interpreter`]). Learning events feed per-student averages
//! ([`performance`]) that drive the adaptive quiz chooser ([`itest`]);
//! term grades and cohort statistics live in [`grading`].

pub mod program;
pub mod codec;
pub mod constraints;
pub mod feedback;
pub mod grading;
pub mod interpreter;
pub mod lessons;
pub mod itest;
pub mod performance;
pub mod pipeline;

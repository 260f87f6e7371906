//! Knowledge base of ⟨Cr, Cs⟩ constraints and the evaluator that checks
//! student programs against it.
//!
//! A constraint is relevant to each combination of blocks its relevance
//! pattern binds (provided the exercise carries the required tags); every
//! binding for which the satisfaction predicate fails is a [`Violation`].

mod engine;
mod kb;
mod predicate;

pub use engine::{
    check_constraint, evaluate, evaluate_in, sort_violations, BindingResult, EvalContext,
    ProgramFacts, Violation,
};
pub use kb::{
    kb_stats, load_knowledge_base, placeholders, starter_kb, AdaptedTemplates, Constraint,
    FeedbackTemplates, KbError, KnowledgeBase, RuleCategory, STARTER_DOCUMENTS,
};
pub use predicate::{
    AttrPred, CountQuery, Matcher, NodeQuery, Ref, Relevance, Satisfaction, Scope, TypeClass,
};

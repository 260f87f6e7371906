//! Command-line tool: batch evaluation, knowledge-base checks, quiz
//! simulation, cohort reports and the HTTP service.
//!
//! Exit status: 0 success (no violations), 1 violations or lint failures,
//! 2 unusable input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tutor_core::feedback::FeedbackKind;

#[derive(Debug, Parser)]
#[command(name = "tutor-cli", version, about = "Constraint-based tutor tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Feedback {
    Response,
    Correct,
    Elaborated,
    Adapted,
}

impl From<Feedback> for FeedbackKind {
    fn from(f: Feedback) -> Self {
        match f {
            Feedback::Response => FeedbackKind::KnowledgeOfResponse,
            Feedback::Correct => FeedbackKind::KnowledgeOfCorrectResponse,
            Feedback::Elaborated => FeedbackKind::Elaborated,
            Feedback::Adapted => FeedbackKind::Adapted,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KbArgs {
    /// Rule files to load instead of the bundled starter rules.
    #[arg(long = "kb", value_name = "PATH", num_args = 1..)]
    pub kb: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a solution against an exercise and run it when clean.
    Eval {
        exercise: PathBuf,
        solution: PathBuf,
        #[command(flatten)]
        kb: KbArgs,
        /// Overrides the exercise's feedback style.
        #[arg(long, value_enum)]
        feedback: Option<Feedback>,
        /// Learning level used by adapted feedback.
        #[arg(long, default_value_t = 50.0, value_parser = parse_level)]
        level: f64,
        /// Reserved; evaluation is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Input token for the program; repeat for several.
        #[arg(long = "input", value_name = "TOKEN")]
        input: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Load rule files and report problems.
    LintKb {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Rule counts per category.
    KbStats {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the question chooser repeatedly and trace priorities.
    QuizSim {
        /// A `.questions.json` document.
        #[arg(long)]
        bank: PathBuf,
        /// Student model or averages as JSON; the default level applies when absent.
        #[arg(long)]
        student: Option<PathBuf>,
        #[arg(long)]
        lesson: String,
        /// Number of successive quizzes.
        #[arg(short = 'n', long, default_value_t = 1)]
        rounds: usize,
        #[arg(long)]
        questions_per_quiz: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Cohort comparison from stored grades or group summaries.
    Report {
        /// JSON array of {group, visa, final_exam, activity_averages?}.
        #[arg(long, conflicts_with = "summary")]
        grades: Option<PathBuf>,
        /// Two group names, first minus second.
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
        /// `name=n,mean,stdev`; give exactly two.
        #[arg(long, num_args = 1)]
        summary: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the HTTP service.
    Serve {
        /// Config file; defaults to the TUTOR_CONFIG variable.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=100.0).contains(&v) {
        Ok(v)
    } else {
        Err("level must be in 0..100".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match commands::run(cli.command, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};
use tutor_core::codec::{parse_exercise, parse_solution};
use tutor_core::constraints::{kb_stats, load_knowledge_base, starter_kb, KnowledgeBase, RuleCategory, STARTER_DOCUMENTS};
use tutor_core::feedback::summarize;
use tutor_core::grading::{
    cohort_report, t_test_independent, ActivityAverages, GradeRecord, GradingPolicy, SampleStats, TTestResult,
    TTestVariant,
};
use tutor_core::interpreter::{OutputComparison, RunStatus};
use tutor_core::itest::{
    assemble_quiz, difficulty_band, learning_level, parse_questions, update_priorities, ItestConfig, QuestionBank,
    StudentModel,
};
use tutor_core::lessons;
use tutor_core::performance::StudentAverages;
use tutor_core::pipeline::{evaluate_solution, Evaluation, PipelineError, PipelineOptions};

use crate::{Command, Format};

/// Failures that end the command with exit status 2.
pub type Fail = String;

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn io(e: std::io::Error) -> Fail {
    format!("cannot write output: {e}")
}

fn load_kb(paths: &[PathBuf]) -> Result<KnowledgeBase, Fail> {
    if paths.is_empty() {
        return Ok(starter_kb());
    }
    let docs = paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read(p)?)))
        .collect::<Result<Vec<_>, Fail>>()?;
    let refs: Vec<(&str, &str)> = docs.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
    load_knowledge_base(&refs).map_err(|e| e.to_string())
}

fn pretty(out: &mut impl Write, v: &Value) -> Result<(), Fail> {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("values serialize")).map_err(io)
}

pub fn run(cmd: Command, out: &mut impl Write) -> Result<u8, Fail> {
    match cmd {
        Command::Eval {
            exercise,
            solution,
            kb,
            feedback,
            level,
            seed: _,
            input,
            format,
        } => eval(&exercise, &solution, &kb.kb, feedback.map(Into::into), level, input, format, out),
        Command::LintKb { kb, format } => lint_kb(&kb.kb, format, out),
        Command::KbStats { kb, format } => {
            let kb = load_kb(&kb.kb)?;
            let stats = kb_stats(&kb);
            match format {
                Format::Structured => pretty(out, &json!({"version": kb.version, "total": kb.len(), "categories": stats}))?,
                Format::Text => {
                    for (cat, n) in &stats {
                        writeln!(out, "{:<20}{n}", cat.as_str()).map_err(io)?;
                    }
                    writeln!(out, "{:<20}{}", "total", kb.len()).map_err(io)?;
                }
            }
            Ok(0)
        }
        Command::QuizSim {
            bank,
            student,
            lesson,
            rounds,
            questions_per_quiz,
            seed: _,
            format,
        } => quiz_sim(&bank, student.as_deref(), &lesson, rounds, questions_per_quiz, format, out),
        Command::Report {
            grades,
            groups,
            summary,
            format,
        } => report(grades.as_deref(), &groups, &summary, format, out),
        Command::Serve { config } => serve(config.as_deref()),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    exercise: &Path,
    solution: &Path,
    kb_paths: &[PathBuf],
    feedback: Option<tutor_core::feedback::FeedbackKind>,
    level: f64,
    input: Vec<String>,
    format: Format,
    out: &mut impl Write,
) -> Result<u8, Fail> {
    let kb = load_kb(kb_paths)?;
    let mut ex = parse_exercise(&read(exercise)?, &kb.tag_vocabulary)
        .map_err(|e| format!("{}: {e}", exercise.display()))?;
    let program = parse_solution(&read(solution)?).map_err(|e| format!("{}: {e}", solution.display()))?;
    if feedback.is_some() {
        ex.feedback_kind = feedback;
    }
    let options = PipelineOptions {
        learning_level: level,
        stdin: (!input.is_empty()).then_some(input),
        ..PipelineOptions::default()
    };
    let eval = evaluate_solution(&ex, &program, &kb, &options).map_err(|e| match e {
        PipelineError::Invalid(_) => format!("{}: {e}", solution.display()),
        other => other.to_string(),
    })?;
    match format {
        Format::Structured => {
            let mut v = serde_json::to_value(&eval).expect("evaluation serializes");
            v["exercise_id"] = json!(ex.id);
            v["violation_summary"] = json!(summarize(&eval.violations));
            pretty(out, &v)?;
        }
        Format::Text => print_eval(&ex.id, &eval, out).map_err(io)?,
    }
    Ok(if eval.violations.is_empty() { 0 } else { 1 })
}

fn print_eval(exercise_id: &str, eval: &Evaluation, out: &mut impl Write) -> std::io::Result<()> {
    let n = eval.violations.len();
    writeln!(out, "exercise {exercise_id}: {n} violation{}", if n == 1 { "" } else { "s" })?;
    if n > 0 {
        let summary: Vec<String> = summarize(&eval.violations)
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(cat, c)| format!("{}:{c}", cat.as_str()))
            .collect();
        writeln!(out, "categories: {}", summary.join(" "))?;
        let mut grouped: BTreeMap<RuleCategory, Vec<&tutor_core::constraints::Violation>> = BTreeMap::new();
        for v in &eval.violations {
            grouped.entry(v.category).or_default().push(v);
        }
        for (cat, vs) in grouped {
            writeln!(out, "\n{}", cat.as_str())?;
            for v in vs {
                let bindings: Vec<String> = v.bindings.iter().map(|(k, b)| format!("{k}={}", b.0)).collect();
                writeln!(out, "  {} [{}]", v.constraint_id, bindings.join(", "))?;
            }
        }
    }
    writeln!(out, "\nfeedback:")?;
    for f in &eval.feedback {
        let blocks: Vec<&str> = f.target_block_ids.iter().map(|b| b.0.as_str()).collect();
        if blocks.is_empty() {
            writeln!(out, "  - {}", f.text)?;
        } else {
            writeln!(out, "  - {} (blocks: {})", f.text, blocks.join(", "))?;
        }
    }
    if !eval.type_issues.is_empty() {
        writeln!(out, "\ntype notes:")?;
        for t in &eval.type_issues {
            writeln!(out, "  - {} `{}`: {}", t.block_id, t.attr, t.message)?;
        }
    }
    if let Some(e) = &eval.run_error {
        writeln!(out, "\nnot run: {e}")?;
    }
    if let Some(r) = &eval.runtime {
        let status = match &r.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::StepLimitExceeded => "stopped at the step limit".to_string(),
            RunStatus::RuntimeError { message, block_id } => match block_id {
                Some(b) => format!("runtime error in block {b}: {message}"),
                None => format!("runtime error: {message}"),
            },
        };
        writeln!(out, "\nrun: {status} after {} steps", r.steps_used)?;
        writeln!(out, "--- output ---")?;
        let text = r.stdout_text();
        write!(out, "{text}")?;
        if !text.ends_with('\n') {
            writeln!(out)?;
        }
        writeln!(out, "--------------")?;
    }
    match &eval.output_check {
        Some(OutputComparison::Equal) => writeln!(out, "output matches the expected output")?,
        Some(OutputComparison::Mismatch { offset, expected_context, actual_context }) => writeln!(
            out,
            "output differs at byte {offset}: expected {expected_context:?}, got {actual_context:?}"
        )?,
        None => {}
    }
    writeln!(out, "completed: {}", if eval.completed { "yes" } else { "no" })
}

fn lint_kb(paths: &[PathBuf], format: Format, out: &mut impl Write) -> Result<u8, Fail> {
    let docs: Vec<(String, String)> = if paths.is_empty() {
        STARTER_DOCUMENTS.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect()
    } else {
        paths
            .iter()
            .map(|p| Ok((p.display().to_string(), read(p)?)))
            .collect::<Result<_, Fail>>()?
    };
    let mut errors = Vec::new();
    for (name, text) in &docs {
        if let Err(e) = load_knowledge_base(&[(name.as_str(), text.as_str())]) {
            errors.push(e.to_string());
        }
    }
    let refs: Vec<(&str, &str)> = docs.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
    let mut warnings = Vec::new();
    let mut total = 0;
    match load_knowledge_base(&refs) {
        Err(e) => {
            let e = e.to_string();
            if !errors.contains(&e) {
                errors.push(e);
            }
        }
        Ok(kb) => {
            total = kb.len();
            for (cat, n) in kb_stats(&kb) {
                if n == 0 {
                    warnings.push(format!("category {} has no rules", cat.as_str()));
                }
            }
            for c in &kb.constraints {
                if c.feedback.correct.is_none() {
                    warnings.push(format!("rule {} has no correct-response template", c.id));
                }
                if !c.enabled {
                    warnings.push(format!("rule {} is disabled", c.id));
                }
            }
        }
    }
    match format {
        Format::Structured => pretty(out, &json!({"rules": total, "errors": errors, "warnings": warnings}))?,
        Format::Text => {
            for e in &errors {
                writeln!(out, "error: {e}").map_err(io)?;
            }
            for w in &warnings {
                writeln!(out, "warning: {w}").map_err(io)?;
            }
            writeln!(out, "{total} rules, {} errors, {} warnings", errors.len(), warnings.len()).map_err(io)?;
        }
    }
    Ok(if errors.is_empty() { 0 } else { 1 })
}

/// A full student model, or just its averages.
#[derive(Deserialize)]
#[serde(untagged)]
enum StudentInput {
    Model(StudentModel),
    Averages(StudentAverages),
}

fn quiz_sim(
    bank_path: &Path,
    student: Option<&Path>,
    lesson: &str,
    rounds: usize,
    per_quiz: Option<usize>,
    format: Format,
    out: &mut impl Write,
) -> Result<u8, Fail> {
    if !lessons::is_lesson(lesson) {
        return Err(format!("unknown lesson `{lesson}`"));
    }
    let mut bank = QuestionBank::new(parse_questions(&read(bank_path)?).map_err(|e| format!("{}: {e}", bank_path.display()))?)
        .map_err(|e| e.to_string())?;
    let model = match student {
        None => StudentModel::new("student"),
        Some(p) => match serde_json::from_str::<StudentInput>(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))? {
            StudentInput::Model(m) => m,
            StudentInput::Averages(a) => StudentModel {
                averages: a,
                ..StudentModel::new("student")
            },
        },
    };
    let mut config = ItestConfig::default();
    if let Some(n) = per_quiz {
        config.questions_per_quiz = n;
    }
    config.validate().map_err(|e| e.to_string())?;
    let level = learning_level(&model.averages, &config);
    let target = difficulty_band(level);
    let mut trace = Vec::new();
    for round in 1..=rounds {
        let quiz = assemble_quiz(&bank, &model, lesson, &config, format!("sim-{round}"), round as u64)
            .map_err(|e| e.to_string())?;
        update_priorities(&mut bank, &quiz, &config);
        let priorities: BTreeMap<&str, u8> = bank.for_lesson(lesson).map(|q| (q.id.as_str(), q.choice_priority)).collect();
        trace.push(json!({"round": round, "question_ids": quiz.question_ids, "total_time_seconds": quiz.total_time_seconds, "priorities": priorities}));
    }
    match format {
        Format::Structured => pretty(out, &json!({"learning_level": level, "target_difficulty": target, "rounds": trace}))?,
        Format::Text => {
            writeln!(out, "learning level {level:.2}, target difficulty {target}").map_err(io)?;
            for r in &trace {
                writeln!(out, "\nround {}", r["round"]).map_err(io)?;
                let ids: Vec<&str> = r["question_ids"].as_array().unwrap().iter().filter_map(Value::as_str).collect();
                writeln!(out, "  quiz: {}", ids.join(" ")).map_err(io)?;
                let pr: Vec<String> = r["priorities"]
                    .as_object()
                    .unwrap()
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                writeln!(out, "  priorities: {}", pr.join(" ")).map_err(io)?;
            }
        }
    }
    Ok(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GradeRow {
    #[serde(default)]
    student_id: Option<String>,
    group: String,
    visa: f64,
    final_exam: f64,
    #[serde(default)]
    activity_averages: ActivityAverages,
}

fn parse_summary(s: &str) -> Result<(String, SampleStats), Fail> {
    let bad = || format!("summary `{s}` is not name=n,mean,stdev");
    let (name, rest) = s.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    let [n, mean, sd] = parts[..] else { return Err(bad()) };
    let stats = SampleStats::from_summary(
        n.parse().map_err(|_| bad())?,
        mean.parse().map_err(|_| bad())?,
        sd.parse().map_err(|_| bad())?,
    )
    .map_err(|e| e.to_string())?;
    Ok((name.trim().to_string(), stats))
}

fn ttest_line(label: &str, r: &TTestResult) -> String {
    format!(
        "{label}\t{:.3}\t{}\t{:.3}\t{:.5}\t{:.5}\t{:.5}\t{:.5}",
        r.t,
        if r.df.fract() == 0.0 { format!("{}", r.df) } else { format!("{:.3}", r.df) },
        r.p_two_tailed,
        r.mean_difference,
        r.std_error_difference,
        r.ci95.lower,
        r.ci95.upper
    )
}

fn report(grades: Option<&Path>, groups: &[String], summary: &[String], format: Format, out: &mut impl Write) -> Result<u8, Fail> {
    let policy = GradingPolicy::default();
    if !summary.is_empty() {
        let [a, b] = summary else {
            return Err("give exactly two --summary groups".into());
        };
        let ((an, a), (bn, b)) = (parse_summary(a)?, parse_summary(b)?);
        let eq = t_test_independent(&a, &b, TTestVariant::EqualVariances).map_err(|e| e.to_string())?;
        let welch = t_test_independent(&a, &b, TTestVariant::WelchUnequal).map_err(|e| e.to_string())?;
        match format {
            Format::Structured => pretty(
                out,
                &json!({"groups": [{"name": an, "stats": a}, {"name": bn, "stats": b}], "equal_variances": eq, "unequal_variances": welch}),
            )?,
            Format::Text => {
                writeln!(out, "{an} minus {bn}").map_err(io)?;
                writeln!(out, "\tt\tdf\tsig. (2-tailed)\tmean difference\tstd. error difference\t95% ci lower\t95% ci upper").map_err(io)?;
                writeln!(out, "{}", ttest_line("equal variances assumed", &eq)).map_err(io)?;
                writeln!(out, "{}", ttest_line("equal variances not assumed", &welch)).map_err(io)?;
            }
        }
        return Ok(0);
    }
    let path = grades.ok_or("give --grades or two --summary groups")?;
    let rows: Vec<GradeRow> = serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let id = r.student_id.clone().unwrap_or_else(|| format!("row {}", i + 1));
        let rec = GradeRecord::compute(id.as_str(), r.visa, r.final_exam, r.activity_averages, &policy)
            .map_err(|e| format!("{id}: {e}"))?;
        by_group.entry(r.group.clone()).or_default().push(rec.term_grade);
    }
    let (a, b) = match groups {
        [a, b] => (a.clone(), b.clone()),
        [] if by_group.len() == 2 => {
            let mut k = by_group.keys().cloned();
            (k.next().unwrap(), k.next().unwrap())
        }
        [] => return Err(format!("{} groups in the file; pick two with --groups a,b", by_group.len())),
        _ => return Err("--groups takes exactly two names".into()),
    };
    let ga = by_group.get(&a).ok_or_else(|| format!("no grades for group `{a}`"))?;
    let gb = by_group.get(&b).ok_or_else(|| format!("no grades for group `{b}`"))?;
    let rep = cohort_report((&a, ga), (&b, gb), &policy).map_err(|e| e.to_string())?;
    match format {
        Format::Structured => pretty(out, &serde_json::to_value(&rep).expect("report serializes"))?,
        Format::Text => write!(out, "{}", rep.to_text()).map_err(io)?,
    }
    Ok(0)
}

fn serve(config: Option<&Path>) -> Result<u8, Fail> {
    let config = tutor_service::Config::locate(config).map_err(|e| e.to_string())?;
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| format!("cannot start runtime: {e}"))?;
    runtime.block_on(tutor_service::serve(config)).map_err(|e| e.to_string())?;
    Ok(0)
}

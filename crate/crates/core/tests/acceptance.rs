//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use common::oracle::Oracle;
use common::{random_program, random_tags};
use tutor_core::codec::{parse_solution, serialize_solution, ScoringLimits};
use tutor_core::constraints::{evaluate_in, kb_stats, starter_kb, EvalContext, RuleCategory};
use tutor_core::grading::{
    adjusted_final, t_test_independent, term_grade, ActivityAverages, GradingError, GradingPolicy,
    SampleStats, TTestVariant,
};
use tutor_core::interpreter::{run, RunLimits, RunStatus};
use tutor_core::itest::{
    assemble_quiz, difficulty_band, learning_level, update_priorities, ItestConfig, QuestionBank,
    QuestionRecord, StudentModel,
};
use tutor_core::performance::{learning_score, StudentAverages};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Check {
    ensure!((got - want).abs() <= tol, "{name} = {got}, expected {want} within {tol}");
    Ok(())
}

fn cohort_t_test() -> Check {
    let start = Instant::now();
    let control = SampleStats::from_summary(60, 55.69, 14.20).map_err(|e| e.to_string())?;
    let experimental = SampleStats::from_summary(60, 79.50, 15.35).map_err(|e| e.to_string())?;
    let eq = t_test_independent(&control, &experimental, TTestVariant::EqualVariances).map_err(|e| e.to_string())?;
    let welch = t_test_independent(&control, &experimental, TTestVariant::WelchUnequal).map_err(|e| e.to_string())?;
    within("t", eq.t, -8.823, 0.02)?;
    ensure!(eq.df == 118.0, "df = {}", eq.df);
    within("SE", eq.std_error_difference, 2.70009, 0.005)?;
    within("mean difference", eq.mean_difference, -23.82167, 0.02)?;
    within("CI lower", eq.ci95.lower, -29.16858, 0.02)?;
    within("CI upper", eq.ci95.upper, -18.47475, 0.02)?;
    ensure!(eq.p_two_tailed < 0.001, "p = {}", eq.p_two_tailed);
    within("Welch df", welch.df, 117.294, 0.2)?;
    ensure!(start.elapsed() < Duration::from_secs(1), "took {:?}", start.elapsed());
    Ok(())
}

fn learning_level_formula() -> Check {
    let mut rng = StdRng::seed_from_u64(1000);
    let config = ItestConfig::default();
    for _ in 0..1000 {
        let (pv, aq, ac): (f64, f64, f64) = (rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0));
        let a = StudentAverages {
            page_view_score: Some(pv),
            avg_quiz_score: Some(aq),
            avg_ctutor_score: Some(ac),
        };
        let got = learning_level(&a, &config);
        let want = 0.10 * pv + 0.40 * aq + 0.50 * ac;
        ensure!((got - want).abs() <= 1e-9, "({pv}, {aq}, {ac}) gave {got}, expected {want}");
    }
    Ok(())
}

fn grading_rules() -> Check {
    let p = GradingPolicy::default();
    let g = |v: f64, f: f64| term_grade(v, f, &p).map_err(|e| e.to_string());
    let a = g(50.0, 75.0)?;
    ensure!(a.grade == 70.0 && a.passed, "term_grade(50, 75) = {a:?}");
    let b = g(0.0, 74.0)?;
    ensure!((b.grade - 59.2).abs() < 1e-12 && !b.passed, "term_grade(0, 74) = {b:?}");
    let at = g(60.0, 60.0)?;
    ensure!(at.grade == 60.0 && at.passed, "grade of exactly 60 must pass: {at:?}");
    let under = g(59.0, 60.0)?;
    ensure!(!under.passed, "59.8 must fail");
    let acts = |h, f, c| ActivityAverages { homework: h, forum: f, chat: c };
    ensure!(adjusted_final(60.0, &acts(25.0, 10.0, 5.0), &p) == Ok(100.0), "full activity points");
    for over in [acts(25.01, 0.0, 0.0), acts(0.0, 10.01, 0.0), acts(0.0, 0.0, 5.01)] {
        ensure!(
            matches!(adjusted_final(50.0, &over, &p), Err(GradingError::ActivityOverCap { .. })),
            "cap not enforced for {over:?}"
        );
    }
    for v in 0..=100 {
        for f in 0..=100 {
            let here = g(v as f64, f as f64)?.grade;
            if v < 100 {
                ensure!(g(v as f64 + 1.0, f as f64)?.grade >= here, "not monotone in visa at ({v}, {f})");
            }
            if f < 100 {
                ensure!(g(v as f64, f as f64 + 1.0)?.grade >= here, "not monotone in final at ({v}, {f})");
            }
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let kb = starter_kb();
    let mut rng = StdRng::seed_from_u64(0xacce);
    for i in 0..500 {
        let p = random_program(&mut rng, 8);
        ensure!(p.block_count() <= 8, "generator produced {} blocks", p.block_count());
        let tags = random_tags(&mut rng);
        let got: Vec<(String, Vec<String>)> = evaluate_in(&p, &EvalContext::new(&tags, &[]), &kb)
            .iter()
            .map(|v| (v.constraint_id.clone(), v.binding_order.iter().map(|b| b.0.clone()).collect()))
            .collect();
        let want = Oracle::new(&p).violations(&kb, &tags, &[]);
        ensure!(got == want, "program {i} differs: engine {got:?}, oracle {want:?}");
    }
    ensure!(start.elapsed() < Duration::from_secs(60), "took {:?}", start.elapsed());
    Ok(())
}

#[derive(Deserialize)]
struct GoldenCase {
    name: String,
    category: String,
    tags: Vec<String>,
    solution: String,
    expected: Vec<GoldenViolation>,
}

#[derive(Deserialize, PartialEq, Debug)]
struct GoldenViolation {
    constraint_id: String,
    bindings: BTreeMap<String, String>,
}

fn category_coverage() -> Check {
    let kb = starter_kb();
    ensure!(kb.len() >= 40, "only {} rules", kb.len());
    let stats = kb_stats(&kb);
    for cat in RuleCategory::ALL {
        ensure!(stats.get(&cat).copied().unwrap_or(0) > 0, "category {} is empty", cat.as_str());
    }
    let dir = root().join("tests/fixtures/golden");
    let text = std::fs::read_to_string(dir.join("golden.json")).map_err(|e| e.to_string())?;
    let cases: Vec<GoldenCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut per: BTreeMap<String, usize> = BTreeMap::new();
    for case in cases {
        let program = parse_solution(&std::fs::read_to_string(dir.join(&case.solution)).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", case.name))?;
        let tags: BTreeSet<String> = case.tags.iter().cloned().collect();
        let got: Vec<GoldenViolation> = evaluate_in(&program, &EvalContext::new(&tags, &[]), &kb)
            .into_iter()
            .map(|v| GoldenViolation {
                constraint_id: v.constraint_id,
                bindings: v.bindings.into_iter().map(|(k, b)| (k, b.0)).collect(),
            })
            .collect();
        ensure!(got == case.expected, "{}: got {got:?}", case.name);
        let cat = RuleCategory::from_name(&case.category).ok_or(format!("bad category {}", case.category))?;
        ensure!(
            got.iter().any(|v| kb.get(&v.constraint_id).map(|c| c.category) == Some(cat)),
            "{} does not hit {}",
            case.name,
            case.category
        );
        *per.entry(case.category).or_default() += 1;
    }
    for cat in RuleCategory::ALL {
        let n = per.get(cat.as_str()).copied().unwrap_or(0);
        ensure!(n >= 2, "{} has {n} golden fixtures", cat.as_str());
    }
    Ok(())
}

fn question(id: String, lesson: &str, difficulty: u8, priority: u8) -> QuestionRecord {
    QuestionRecord {
        stem: format!("{id}?"),
        id,
        lesson_id: lesson.into(),
        choices: (0..5).map(|i| i.to_string()).collect(),
        correct_index: 0,
        difficulty,
        choice_priority: priority,
        answering_time_seconds: 30,
        last_used_at: None,
    }
}

fn chooser_properties() -> Check {
    let config = ItestConfig::default();
    let mut rng = StdRng::seed_from_u64(42);
    let mut qs = Vec::new();
    for i in 0..40 {
        qs.push(question(format!("q{i:02}"), "L", rng.gen_range(1..=5), rng.gen_range(0..=100)));
    }
    for i in 0..5 {
        qs.push(question(format!("m{i}"), "M", 3, 50));
    }
    let mut bank = QuestionBank::new(qs).map_err(|e| e.to_string())?;
    let student = StudentModel {
        averages: StudentAverages {
            page_view_score: Some(45.0),
            avg_quiz_score: Some(52.0),
            avg_ctutor_score: Some(61.0),
        },
        ..StudentModel::new("s")
    };
    let first = assemble_quiz(&bank, &student, "L", &config, "z", 1).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let again = assemble_quiz(&bank.clone(), &student, "L", &config, "z", 1).map_err(|e| e.to_string())?;
        ensure!(again.question_ids == first.question_ids, "chooser is not deterministic");
    }

    for round in 0..3u64 {
        let before: BTreeMap<String, u8> = bank.iter().map(|q| (q.id.clone(), q.choice_priority)).collect();
        let quiz = assemble_quiz(&bank, &student, "L", &config, format!("r{round}"), 10 + round).map_err(|e| e.to_string())?;
        update_priorities(&mut bank, &quiz, &config);
        for q in bank.iter() {
            let old = before[&q.id];
            let want = if q.lesson_id != "L" {
                old
            } else if quiz.question_ids.contains(&q.id) {
                old.saturating_sub(10)
            } else {
                (old + 1).min(100)
            };
            ensure!(q.choice_priority == want, "round {round}: {} went {old} -> {}, expected {want}", q.id, q.choice_priority);
        }
    }

    for (level, band) in [(0.0, 1), (19.99, 1), (20.0, 2), (79.99, 4), (80.0, 5), (100.0, 5)] {
        ensure!(difficulty_band(level) == band, "band({level}) = {}", difficulty_band(level));
    }
    Ok(())
}

fn learning_score_rules() -> Check {
    for (t, f) in [(600, 10), (1, 1), (3600, 25), (45, 7)] {
        let l = ScoringLimits::new(t, f).map_err(|e| e.to_string())?;
        ensure!(learning_score(0, 0, l) == 100, "(0, 0) with {t}/{f}");
        ensure!(learning_score(t, f, l) == 0, "({t}, {f}) with the same limits");
        let es: Vec<u64> = (0..=24).map(|i| i * t / 20).collect();
        let fs: Vec<u64> = (0..=12).map(|i| i * f / 10).collect();
        for w in es.windows(2) {
            for &c in &fs {
                ensure!(learning_score(w[1], c, l) <= learning_score(w[0], c, l), "not monotone in time at {w:?}");
            }
        }
        for w in fs.windows(2) {
            for &e in &es {
                ensure!(learning_score(e, w[1], l) <= learning_score(e, w[0], l), "not monotone in feedback at {w:?}");
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct ProgramCase {
    name: String,
    covers: String,
    program: String,
    stdin: Vec<String>,
    files: BTreeMap<String, String>,
    expected_stdout: String,
    #[serde(default)]
    expected_files: Option<BTreeMap<String, String>>,
}

fn interpreter_rules() -> Check {
    let dir = root().join("tests/fixtures/programs");
    let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| e.to_string())?;
    let cases: Vec<ProgramCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure!(cases.len() >= 10, "only {} fixture programs", cases.len());
    let covered: BTreeSet<&str> = cases.iter().map(|c| c.covers.as_str()).collect();
    for area in ["loops", "functions", "arrays", "files", "dynamic memory"] {
        ensure!(covered.contains(area), "no fixture covers {area}");
    }
    for c in &cases {
        let p = parse_solution(&std::fs::read_to_string(dir.join(&c.program)).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", c.name))?;
        let limits = RunLimits { stdin_script: c.stdin.clone(), files: c.files.clone(), ..RunLimits::default() };
        let out = run(&p, &limits).map_err(|e| format!("{}: {e}", c.name))?;
        ensure!(out.status == RunStatus::Completed, "{}: {:?}", c.name, out.status);
        ensure!(out.stdout == c.expected_stdout.as_bytes(), "{}: stdout {:?}", c.name, out.stdout_text());
        if let Some(files) = &c.expected_files {
            for (name, body) in files {
                ensure!(out.virtual_files.get(name).map(Vec::as_slice) == Some(body.as_bytes()), "{}: file {name}", c.name);
            }
        }
    }

    let looping = parse_solution(
        r#"{"blocks": [{"id": "m", "kind": "FunctionDef", "attrs": {"name": "main", "return_type": "int", "params": []},
            "children": [{"id": "w", "kind": "WhileLoop", "attrs": {"cond": "1"}, "children": []}]}]}"#,
    )
    .map_err(|e| e.to_string())?;
    for max in [1000, 100_000] {
        let out = run(&looping, &RunLimits { max_steps: max, ..RunLimits::default() }).map_err(|e| e.to_string())?;
        ensure!(out.status == RunStatus::StepLimitExceeded && out.steps_used == max, "loop stopped at {} of {max}", out.steps_used);
    }

    let canary_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let canary = canary_dir.path().join("canary.txt");
    std::fs::write(&canary, "canary").map_err(|e| e.to_string())?;
    let target = serde_json::to_string(&format!("\"{}\"", canary.display())).map_err(|e| e.to_string())?;
    let fresh = serde_json::to_string(&format!("\"{}\"", canary_dir.path().join("new.txt").display())).map_err(|e| e.to_string())?;
    let writer = parse_solution(&format!(
        r#"{{"blocks": [{{"id": "m", "kind": "FunctionDef", "attrs": {{"name": "main", "return_type": "int", "params": []}},
            "children": [
              {{"id": "d", "kind": "Declaration", "attrs": {{"name": "f", "type": "FILE*"}}, "children": []}},
              {{"id": "o", "kind": "FileOp", "attrs": {{"op": "open", "handle": "f", "path": {target}, "mode": "w"}}, "children": []}},
              {{"id": "w", "kind": "FileOp", "attrs": {{"op": "write", "handle": "f", "format": "clobbered", "args": []}}, "children": []}},
              {{"id": "c", "kind": "FileOp", "attrs": {{"op": "close", "handle": "f"}}, "children": []}},
              {{"id": "o2", "kind": "FileOp", "attrs": {{"op": "open", "handle": "f", "path": {fresh}, "mode": "a"}}, "children": []}},
              {{"id": "c2", "kind": "FileOp", "attrs": {{"op": "close", "handle": "f"}}, "children": []}}]}}]}}"#
    ))
    .map_err(|e| e.to_string())?;
    let out = run(&writer, &RunLimits::default()).map_err(|e| e.to_string())?;
    ensure!(out.status == RunStatus::Completed, "canary program: {:?}", out.status);
    ensure!(std::fs::read_to_string(&canary).map_err(|e| e.to_string())? == "canary", "real file was modified");
    let entries = std::fs::read_dir(canary_dir.path()).map_err(|e| e.to_string())?.count();
    ensure!(entries == 1, "a real file was created");
    Ok(())
}

fn codec_rules() -> Check {
    let mut texts = Vec::new();
    for dir in ["tests/fixtures/golden", "tests/fixtures/programs"] {
        for entry in std::fs::read_dir(root().join(dir)).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.to_string_lossy().ends_with(".sol.json") {
                texts.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    ensure!(texts.len() >= 30, "only {} fixtures", texts.len());
    for t in &texts {
        let p = parse_solution(t).map_err(|e| e.to_string())?;
        let again = parse_solution(&serialize_solution(&p)).map_err(|e| e.to_string())?;
        ensure!(again == p, "round trip changed a fixture");
    }
    let mut rng = StdRng::seed_from_u64(10_000);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..200);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let result = catch_unwind(|| parse_solution(&text).is_ok());
        ensure!(result.is_ok(), "parser panicked on {bytes:?}");
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("cohort t-test reproduces the published summary", cohort_t_test),
        ("learning level equals the weighted sum on 1000 triples", learning_level_formula),
        ("term grade examples, pass threshold, activity caps, monotone grid", grading_rules),
        ("constraint engine matches the exhaustive oracle on 500 programs", oracle_equivalence),
        ("starter KB covers all categories with exact golden fixtures", category_coverage),
        ("question chooser determinism, priority dynamics, band edges", chooser_properties),
        ("learning score boundaries and monotonicity", learning_score_rules),
        ("interpreter fixtures, step limit, filesystem isolation", interpreter_rules),
        ("solution codec round trip and random-byte fuzzing", codec_rules),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(()) => println!("PASS  {name} ({:.2?})", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

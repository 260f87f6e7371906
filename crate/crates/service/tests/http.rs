mod common;

use std::collections::BTreeMap;

use axum::http::{Method, StatusCode};
use common::{Harness, ALICE, BOB, TEACHER};
use serde_json::{json, Value};
use tutor_core::codec::ScoringLimits;
use tutor_core::grading::{cohort_report, GradingPolicy};
use tutor_core::performance::{learning_score, EventKind, LearningEvent};

fn events(h: &Harness) -> Vec<LearningEvent> {
    let text = std::fs::read_to_string(h.config.data_dir.join("events.jsonl")).unwrap_or_default();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn completions(h: &Harness) -> usize {
    events(h).iter().filter(|e| matches!(e.kind, EventKind::ExerciseCompleted { .. })).count()
}

/// The reference solution with its output block printing a string
/// through `%d`-incompatible formatting.
fn buggy(reference: &Value) -> Value {
    let mut v = reference.clone();
    let body = v["blocks"][0]["children"].as_array_mut().unwrap();
    let out = body.iter_mut().find(|b| b["kind"] == "Output").unwrap();
    out["attrs"]["format"] = json!("%s");
    v
}

#[tokio::test]
async fn tokens_and_roles() {
    let h = Harness::new();
    let (s, body) = h.raw(Method::GET, "/health", None, None).await;
    assert_eq!((s, body.as_str()), (StatusCode::OK, "ok"));
    let (s, _) = h.raw(Method::GET, "/api/exercises/sum-range", None, None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, body) = h.get("/api/exercises/sum-range", "wrong").await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"], "unauthorized");
    let (s, _) = h.get("/api/admin/reports/kb", "nope").await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = h.get("/api/admin/reports/kb", ALICE).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = h.get("/api/students/bob/model", ALICE).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = h.get("/api/students/bob/model", TEACHER).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn exercise_view_hides_the_reference_solution() {
    let h = Harness::new();
    let (s, doc) = h.get("/api/exercises/sum-range", ALICE).await;
    assert_eq!(s, StatusCode::OK);
    assert!(doc.get("reference_solution").is_none());
    assert_eq!(doc["session"]["started_at"], 1_000_000);
    assert_eq!(doc["lesson_id"], "t1-10");
    let (s, body) = h.get("/api/exercises/nope", ALICE).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (s, _) = h.post("/api/exercises/nope/submissions", ALICE, json!({"solution": {"blocks": []}})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn clean_first_submission_scores_from_elapsed_time() {
    let h = Harness::new();
    let solution = h.reference("sum-range").await;
    h.get("/api/exercises/sum-range", ALICE).await;
    h.advance(120);
    let (s, rec) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": solution })).await;
    assert_eq!(s, StatusCode::OK, "{rec}");
    assert_eq!(rec["completed"], true);
    // learning_score(120, 0, {600, 10}) = round(100 * (0.5 * 0.8 + 0.5 * 1)) = 90
    assert_eq!(rec["learning_score"], 90);
    assert_eq!(rec["runtime"]["stdout"], "15");
    assert_eq!(rec["violations"], json!([]));
    assert_eq!(completions(&h), 1);

    let (s, body) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": solution })).await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");
    assert_eq!(completions(&h), 1);

    let (s, _) = h
        .post("/api/admin/sessions/reset", TEACHER, json!({"student_id": "alice", "exercise_id": "sum-range"}))
        .await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, rec) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": solution })).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rec["learning_score"], 100);
    assert_eq!(completions(&h), 2);
}

#[tokio::test]
async fn violations_produce_feedback_and_lower_the_score() {
    let h = Harness::new();
    let reference = h.reference("sum-range").await;
    h.get("/api/exercises/sum-range", BOB).await;
    h.advance(30);
    let (s, rec) = h.post("/api/exercises/sum-range/submissions", BOB, json!({ "solution": buggy(&reference) })).await;
    assert_eq!(s, StatusCode::OK, "{rec}");
    assert_eq!(rec["completed"], false);
    assert!(rec["learning_score"].is_null());
    assert!(rec.get("runtime").is_none());
    let violations = rec["violations"].as_array().unwrap();
    assert!(!violations.is_empty());
    let shown = rec["feedback"].as_array().unwrap().len() as u64;
    assert!(shown > 0);
    let summed: u64 = rec["violation_summary"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(summed, violations.len() as u64);

    h.advance(270);
    let (s, rec) = h.post("/api/exercises/sum-range/submissions", BOB, json!({ "solution": reference })).await;
    assert_eq!(s, StatusCode::OK);
    let want = learning_score(300, shown, ScoringLimits::new(600, 10).unwrap());
    assert_eq!(rec["learning_score"], want);
    let completed: Vec<_> = events(&h)
        .into_iter()
        .filter_map(|e| match e.kind {
            EventKind::ExerciseCompleted { elapsed_seconds, feedback_count, learning_score, .. } => {
                Some((elapsed_seconds, feedback_count, learning_score))
            }
            _ => None,
        })
        .collect();
    assert_eq!(completed, [(300, shown, want)]);
}

#[tokio::test]
async fn same_solution_gets_the_same_diagnosis() {
    let h = Harness::new();
    let bad = buggy(&h.reference("sum-range").await);
    let (_, a) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": bad })).await;
    let (_, b) = h.post("/api/exercises/sum-range/submissions", BOB, json!({ "solution": bad })).await;
    assert_eq!(a["violations"], b["violations"]);
    assert_eq!(a["feedback"], b["feedback"]);
}

#[tokio::test]
async fn unparseable_or_invalid_solutions_are_422() {
    let h = Harness::new();
    let (s, body) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({"solution": {"blocks": [{"kind": "Nope"}]}})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].is_string(), "{body}");

    let mut reference = h.reference("sum-range").await;
    reference["blocks"][0]["children"][2]["kind"] = json!("WhileLoop");
    reference["blocks"][0]["children"][2]["attrs"] = json!({"cond": "i <= 5"});
    let (s, body) = h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": reference })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_solution");
    assert_eq!(body["defects"][0]["kind"], "disallowed_layer");

    let (s, body) = h.raw(Method::POST, "/api/exercises/sum-range/submissions", Some(ALICE), Some("{not json".into())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body.contains("malformed_request"));
}

async fn correct_indices(h: &Harness, ids: &[Value]) -> BTreeMap<String, u8> {
    let mut out = BTreeMap::new();
    for id in ids {
        let id = id.as_str().unwrap();
        let (_, q) = h.get(&format!("/api/admin/questions/{id}"), TEACHER).await;
        out.insert(id.to_string(), q["correct_index"].as_u64().unwrap() as u8);
    }
    out
}

#[tokio::test]
async fn quiz_lifecycle() {
    let h = Harness::new();
    let (s, quiz) = h.post("/api/lessons/t1-10/quizzes", ALICE, json!({})).await;
    assert_eq!(s, StatusCode::CREATED, "{quiz}");
    let ids = quiz["question_ids"].as_array().unwrap().clone();
    assert_eq!(ids.len(), 10);
    let questions = quiz["questions"].as_array().unwrap();
    assert!(questions.iter().all(|q| q.get("correct_index").is_none() && q["choices"].as_array().unwrap().len() == 5));
    let time: u64 = questions.iter().map(|q| q["answering_time_seconds"].as_u64().unwrap()).sum();
    assert_eq!(quiz["total_time_seconds"], time);

    let key = correct_indices(&h, &ids).await;
    let answers: BTreeMap<String, u8> = key
        .iter()
        .enumerate()
        .map(|(i, (id, c))| (id.clone(), if i < 7 { *c } else { (*c + 1) % 5 }))
        .collect();
    let uri = format!("/api/quizzes/{}/answers", quiz["id"].as_str().unwrap());

    let (s, _) = h.post(&uri, BOB, json!({ "answers": answers })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, body) = h.post(&uri, ALICE, json!({"answers": {"loops-d1-1": 9}})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].is_string());
    let (s, _) = h.post(&uri, ALICE, json!({"answers": {"loops-d1-1": 300}})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, grade) = h.post(&uri, ALICE, json!({ "answers": answers })).await;
    assert_eq!(s, StatusCode::OK, "{grade}");
    assert_eq!(grade["score"], 70.0);
    assert_eq!(grade["correct_count"], 7);
    assert_eq!(grade["results"].as_array().unwrap().len(), 10);

    let (_, model) = h.get("/api/students/alice/model", ALICE).await;
    assert_eq!(model["averages"]["avg_quiz_score"], 70.0);
    assert_eq!(model["quiz_history"], json!([[quiz["id"], 70.0]]));

    let (s, _) = h.post(&uri, ALICE, json!({ "answers": answers })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let scored = events(&h).iter().filter(|e| matches!(e.kind, EventKind::QuizScored { .. })).count();
    assert_eq!(scored, 1);

    let (s, _) = h.post("/api/quizzes/quiz-99/answers", ALICE, json!({ "answers": {} })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.post("/api/lessons/t9-99/quizzes", ALICE, json!({})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.post("/api/lessons/t1-01/quizzes", ALICE, json!({})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn quizzes_grade_against_their_snapshot() {
    let h = Harness::new();
    let (_, quiz) = h.post("/api/lessons/t1-10/quizzes", ALICE, json!({})).await;
    let ids = quiz["question_ids"].as_array().unwrap().clone();
    let key = correct_indices(&h, &ids).await;
    for id in key.keys() {
        let (_, mut q) = h.get(&format!("/api/admin/questions/{id}"), TEACHER).await;
        q["correct_index"] = json!((q["correct_index"].as_u64().unwrap() + 1) % 5);
        let (s, _) = h.put(&format!("/api/admin/questions/{id}"), TEACHER, q).await;
        assert_eq!(s, StatusCode::OK);
    }
    let uri = format!("/api/quizzes/{}/answers", quiz["id"].as_str().unwrap());
    let (_, grade) = h.post(&uri, ALICE, json!({ "answers": key })).await;
    assert_eq!(grade["score"], 100.0);
}

#[tokio::test]
async fn quiz_priorities_rotate_questions() {
    let h = Harness::new();
    let (_, first) = h.post("/api/lessons/t1-10/quizzes", ALICE, json!({})).await;
    let (_, q) = h.get(&format!("/api/admin/questions/{}", first["question_ids"][0].as_str().unwrap()), TEACHER).await;
    assert_eq!(q["choice_priority"], 40);
    assert_eq!(q["last_used_at"], 1_000_000);
    let (_, second) = h.post("/api/lessons/t1-10/quizzes", ALICE, json!({})).await;
    assert_ne!(first["id"], second["id"]);
    assert_ne!(first["question_ids"], second["question_ids"]);
}

#[tokio::test]
async fn exams_draw_five_per_difficulty() {
    let h = Harness::new();
    let (s, exam) = h.post("/api/exams", TEACHER, json!({"lesson_ids": ["t1-10"]})).await;
    assert_eq!(s, StatusCode::OK, "{exam}");
    let qs = exam["questions"].as_array().unwrap();
    assert_eq!(qs.len(), 25);
    for d in 1..=5 {
        assert_eq!(qs.iter().filter(|q| q["difficulty"] == d).count(), 5);
    }
    let (s, body) = h.post("/api/exams", TEACHER, json!({"lesson_ids": ["t1-13"]})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "insufficient_questions");
    assert_eq!((body["needed"].clone(), body["available"].clone()), (json!(25), json!(15)));
    let (s, _) = h.post("/api/exams", ALICE, json!({"lesson_ids": ["t1-10"]})).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, body) = h.post("/api/exams", TEACHER, json!({"term": 1})).await;
    assert_eq!(s, StatusCode::OK, "{body}");
}

fn question(id: &str, choices: usize) -> Value {
    json!({
        "id": id, "lesson_id": "t1-01", "stem": "?", "choices": (0..choices).map(|i| i.to_string()).collect::<Vec<_>>(),
        "correct_index": 0, "difficulty": 2, "choice_priority": 50, "answering_time_seconds": 20
    })
}

#[tokio::test]
async fn question_authoring() {
    let h = Harness::new();
    let (s, body) = h.post("/api/admin/questions", TEACHER, question("new-1", 4)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_question");
    let (s, _) = h.post("/api/admin/questions", TEACHER, question("new-1", 5)).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = h.post("/api/admin/questions", TEACHER, question("new-1", 5)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, list) = h.get("/api/admin/questions?lesson_id=t1-01", TEACHER).await;
    assert_eq!(list["questions"].as_array().unwrap().len(), 1);
    let (s, _) = h.post("/api/lessons/t1-01/quizzes", ALICE, json!({})).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = h.call(Method::DELETE, "/api/admin/questions/new-1", TEACHER, None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = h.call(Method::DELETE, "/api/admin/questions/new-1", TEACHER, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rule_authoring() {
    let h = Harness::new();
    let (_, before) = h.get("/api/admin/reports/kb", TEACHER).await;
    let total = before["total"].as_u64().unwrap();
    let rule = |id: &str| {
        json!({"id": id, "category": "Syntax",
               "cr": {"match": [{"bind": "a", "kind": ["Assignment"]}]},
               "cs": {"present": "a.value"},
               "feedback": {"elaborated": "{a.target} needs a value", "correct": "x = value;"}})
    };
    let (_, listed) = h.get("/api/admin/rules", TEACHER).await;
    let existing = listed["rules"][0]["id"].as_str().unwrap().to_string();
    let (s, body) = h
        .post("/api/admin/rules", TEACHER, json!({"name": "extra", "document": {"rules": [rule(&existing)]}}))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "duplicate_rule_id");
    assert_eq!(body["rule_id"], existing);

    let (s, body) = h
        .post("/api/admin/rules", TEACHER, json!({"name": "extra", "document": {"rules": [rule("local-1")]}}))
        .await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    let (_, after) = h.get("/api/admin/reports/kb", TEACHER).await;
    assert_eq!(after["total"].as_u64().unwrap(), total + 1);
    assert_eq!(after["categories"]["Syntax"], before["categories"]["Syntax"].as_u64().unwrap() + 1);

    let (s, _) = h.post("/api/admin/rules", TEACHER, json!({"name": "extra", "document": {"rules": []}})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = h.call(Method::DELETE, "/api/admin/rules/extra", TEACHER, None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (_, again) = h.get("/api/admin/reports/kb", TEACHER).await;
    assert_eq!(again["total"].as_u64().unwrap(), total);
}

#[tokio::test]
async fn exercise_authoring() {
    let h = Harness::new();
    let (_, mut doc) = h.get("/api/exercises/sum-range", TEACHER).await;
    let (s, _) = h.post("/api/admin/exercises", TEACHER, doc.clone()).await;
    assert_eq!(s, StatusCode::CONFLICT);
    doc["id"] = json!("sum-range-2");
    let (s, _) = h.post("/api/admin/exercises", TEACHER, doc.clone()).await;
    assert_eq!(s, StatusCode::CREATED);
    doc["problem_tags"] = json!(["not-a-tag"]);
    let (s, body) = h.put("/api/admin/exercises/sum-range-2", TEACHER, doc.clone()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_tag");
    doc["lesson_id"] = json!("t9-01");
    let (s, _) = h.put("/api/admin/exercises/sum-range-2", TEACHER, doc).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = h.get("/api/exercises/sum-range-2", ALICE).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = h.call(Method::DELETE, "/api/admin/exercises/sum-range-2", TEACHER, None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = h.get("/api/exercises/sum-range-2", ALICE).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn page_views_and_activity_points_feed_the_model() {
    let h = Harness::new();
    for l in ["t1-01", "t1-02", "t1-03", "t1-03"] {
        let (s, _) = h.get(&format!("/api/lessons/{l}"), ALICE).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, model) = h.get("/api/students/alice/model", ALICE).await;
    // three distinct lessons out of fourteen, 21.43 rounded
    assert_eq!(model["averages"]["page_view_score"], 21.0);
    let (s, _) = h
        .post("/api/admin/events", TEACHER, json!({"student_id": "alice", "type": "page_view_score_set", "score": 80.0}))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let (_, model) = h.get("/api/students/alice/model", TEACHER).await;
    assert_eq!(model["averages"]["page_view_score"], 80.0);
    // only PV is present, so the level is the PV score itself
    assert_eq!(model["learning_level"], 80.0);
    assert_eq!(model["difficulty_band"], 5);
    let (s, _) = h
        .post("/api/admin/events", TEACHER, json!({"student_id": "alice", "type": "quiz_scored", "quiz_id": "x", "score": 1.0}))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = h.get("/api/lessons/t3-01", ALICE).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn grades_and_cohort_report() {
    let h = Harness::new();
    let control = [(40.0, 50.0), (60.0, 55.0), (70.0, 62.0), (30.0, 45.0), (55.0, 70.0)];
    let experimental = [(65.0, 80.0), (70.0, 75.0), (80.0, 90.0), (50.0, 60.0), (90.0, 85.0)];
    let mut want: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (group, rows) in [("control", &control), ("experimental", &experimental)] {
        for (i, (v, f)) in rows.iter().enumerate() {
            let (s, body) = h
                .put(&format!("/api/admin/grades/{group}-{i}"), TEACHER, json!({"group": group, "visa": v, "final_exam": f}))
                .await;
            assert_eq!(s, StatusCode::OK, "{body}");
            want.entry(group).or_default().push(0.2 * v + 0.8 * f);
        }
    }
    let (s, body) = h
        .put("/api/admin/grades/x", TEACHER, json!({"group": "control", "visa": 50, "final_exam": 50,
              "activity_averages": {"homework": 30, "forum": 0, "chat": 0}}))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "activity_over_cap");

    let (s, report) = h.get("/api/admin/reports/cohort", TEACHER).await;
    assert_eq!(s, StatusCode::OK, "{report}");
    let expected = cohort_report(("control", &want["control"]), ("experimental", &want["experimental"]), &GradingPolicy::default())
        .unwrap();
    let got_t = report["equal_variances"]["t"].as_f64().unwrap();
    assert!((got_t - expected.equal_variances.t).abs() < 1e-9);
    assert_eq!(report["equal_variances"]["df"], 8.0);
    assert_eq!(report["groups"][0]["passed"], expected.groups[0].passed);
    assert_eq!(report["histogram"].as_array().unwrap().len(), 10);

    let (s, text) = h.raw(Method::GET, "/api/admin/reports/cohort?groups=control,experimental&format=text", Some(TEACHER), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(text, expected.to_text());
    let (s, _) = h.get("/api/admin/reports/cohort?groups=control,nobody", TEACHER).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.get("/api/admin/reports/cohort?groups=control", TEACHER).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn activity_points_flow_into_grades() {
    let h = Harness::new();
    for points in [20.0, 10.0] {
        h.post("/api/admin/events", TEACHER, json!({"student_id": "alice", "type": "activity_point", "activity": "homework", "points": points}))
            .await;
    }
    h.post("/api/admin/events", TEACHER, json!({"student_id": "alice", "type": "activity_point", "activity": "chat", "points": 4.0}))
        .await;
    let (s, g) = h.put("/api/admin/grades/alice", TEACHER, json!({"group": "a", "visa": 50, "final_exam": 50})).await;
    assert_eq!(s, StatusCode::OK, "{g}");
    // homework mean 15, chat 4: 50 + 15 + 4 = 69; 0.2 * 50 + 0.8 * 69 = 65.2
    assert_eq!(g["adjusted_final"], 69.0);
    assert!((g["term_grade"].as_f64().unwrap() - 65.2).abs() < 1e-9);
    assert_eq!(g["passed"], true);
}

#[tokio::test]
async fn state_survives_restart() {
    let h = Harness::new();
    let solution = h.reference("sum-range").await;
    h.get("/api/exercises/sum-range", ALICE).await;
    h.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": solution })).await;
    let (_, quiz) = h.post("/api/lessons/t1-10/quizzes", BOB, json!({})).await;
    h.post("/api/admin/questions", TEACHER, question("kept", 5)).await;

    let again = h.reopen();
    let (s, _) = again.post("/api/exercises/sum-range/submissions", ALICE, json!({ "solution": solution })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, q) = again.get(&format!("/api/quizzes/{}", quiz["id"].as_str().unwrap()), BOB).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(q["question_ids"], quiz["question_ids"]);
    let (s, _) = again.get("/api/admin/questions/kept", TEACHER).await;
    assert_eq!(s, StatusCode::OK);
    let (_, list) = again.get("/api/admin/questions", TEACHER).await;
    assert_eq!(list["questions"].as_array().unwrap().len(), 46);
    let (_, model) = again.get("/api/students/alice/model", TEACHER).await;
    assert_eq!(model["completed_ctutor_exercises"], 1);
    let (_, subs) = again.get("/api/admin/submissions?student_id=alice", TEACHER).await;
    assert_eq!(subs["submissions"].as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_complete_once() {
    let h = Harness::new();
    let solution = h.reference("sum-range").await;
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = h.app.clone();
            let body = json!({ "solution": solution }).to_string();
            tokio::spawn(async move {
                use http_body_util::BodyExt;
                use tower::ServiceExt;
                let req = axum::http::Request::post("/api/exercises/sum-range/submissions")
                    .header("authorization", format!("Bearer {ALICE}"))
                    .header("content-type", "application/json")
                    .body(axum::body::Body::from(body))
                    .unwrap();
                let resp = app.oneshot(req).await.unwrap();
                let status = resp.status();
                resp.into_body().collect().await.unwrap();
                status
            })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 7);
    assert_eq!(completions(&h), 1);
}

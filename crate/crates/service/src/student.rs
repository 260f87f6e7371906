//! Student-facing endpoints: lessons, exercise sessions, quizzes and the
//! student model.

use std::collections::BTreeMap;

use axum::extract::{FromRequest, Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tutor_core::codec::{exercise_to_value, parse_solution, serialize_solution};
use tutor_core::constraints::RuleCategory;
use tutor_core::feedback::summarize;
use tutor_core::itest::{
    assemble_exam, assemble_quiz, difficulty_band, grade_quiz, learning_level, update_priorities, ExamPolicy,
    ItestError, QuestionRecord,
};
use tutor_core::lessons;
use tutor_core::performance::{learning_score, EventKind, LearningEvent};
use tutor_core::pipeline::{evaluate_solution, Evaluation, PipelineError, PipelineOptions};

use crate::auth::Caller;
use crate::error::{ApiError, ApiResult};
use crate::state::{session_key, AppState, QuizRecord, SessionState};

/// JSON body whose rejections become structured 422 responses.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

pub async fn list_lessons(State(st): State<AppState>, _caller: Caller) -> Json<Value> {
    let exercises = st.exercises.read();
    let items: Vec<Value> = lessons::LESSONS
        .iter()
        .map(|l| {
            let ids: Vec<&String> = exercises.parsed.values().filter(|e| e.lesson_id == l.id).map(|e| &e.id).collect();
            json!({"id": l.id, "term": l.term, "title": l.title, "exercises": ids})
        })
        .collect();
    Json(json!({ "lessons": items }))
}

/// Lesson page. A student visit counts as a page view.
pub async fn get_lesson(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let lesson = lessons::lesson(&id).ok_or_else(|| ApiError::not_found(format!("lesson `{id}`")))?;
    if let Caller::Student(student) = &caller {
        st.events
            .record(LearningEvent::new(student.as_str(), st.now(), EventKind::PageView { lesson_id: id.clone() }))?;
    }
    let exercises: Vec<String> = st
        .exercises
        .read()
        .parsed
        .values()
        .filter(|e| e.lesson_id == id)
        .map(|e| e.id.clone())
        .collect();
    let questions = st.bank.lock().bank.for_lesson(&id).count();
    Ok(Json(json!({
        "id": lesson.id,
        "term": lesson.term,
        "title": lesson.title,
        "exercises": exercises,
        "question_count": questions,
    })))
}

/// Exercise page. Students get the problem without the reference solution,
/// and their session clock starts on the first visit.
pub async fn get_exercise(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ex = st.exercise(&id).ok_or_else(|| ApiError::not_found(format!("exercise `{id}`")))?;
    let mut doc = exercise_to_value(&ex);
    let Caller::Student(student) = caller else {
        return Ok(Json(doc));
    };
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("reference_solution");
        obj.remove("rule_overrides");
    }
    let session = ensure_session(&st, &student, &id)?;
    doc["session"] = serde_json::to_value(session).expect("session serializes");
    Ok(Json(doc))
}

fn ensure_session(st: &AppState, student: &str, exercise: &str) -> ApiResult<SessionState> {
    let key = session_key(student, exercise);
    let mut sessions = st.sessions.lock();
    if let Some(s) = sessions.get(&key) {
        return Ok(s.clone());
    }
    let s = SessionState {
        student_id: student.to_string(),
        exercise_id: exercise.to_string(),
        started_at: st.now(),
        feedback_shown_count: 0,
        submissions: 0,
        completed_at: None,
    };
    sessions.insert(key, s.clone())?;
    Ok(s)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionRequest {
    pub solution: Value,
    /// Replaces the exercise's input tokens.
    #[serde(default)]
    pub stdin: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
pub struct SubmissionRecord {
    pub id: String,
    pub student_id: String,
    pub exercise_id: String,
    pub submitted_at: u64,
    pub program: Value,
    #[serde(flatten)]
    pub evaluation: Evaluation,
    pub violation_summary: BTreeMap<RuleCategory, usize>,
    pub learning_score: Option<u8>,
}

pub async fn submit(
    State(st): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<SubmissionRequest>,
) -> ApiResult<Json<SubmissionRecord>> {
    let student = caller.student()?.to_string();
    let ex = st.exercise(&id).ok_or_else(|| ApiError::not_found(format!("exercise `{id}`")))?;
    let program = parse_solution(&req.solution.to_string()).map_err(|e| ApiError::invalid(&e))?;

    let key = session_key(&student, &id);
    let lock = st.session_lock(&key);
    let _guard = lock.lock().await;
    let mut session = ensure_session(&st, &student, &id)?;
    if session.completed_at.is_some() {
        return Err(ApiError::Conflict(format!(
            "exercise `{id}` is already completed; a teacher can reset the session"
        )));
    }

    let options = PipelineOptions {
        default_feedback: st.config.default_feedback,
        learning_level: learning_level(&st.student_model(&student).averages, &st.config.itest),
        stdin: req.stdin,
        max_steps: st.config.max_steps,
        max_output_bytes: st.config.max_output_bytes,
    };
    let kb = st.kb();
    let (ex2, program2) = (ex.clone(), program.clone());
    let evaluation = tokio::task::spawn_blocking(move || evaluate_solution(&ex2, &program2, &kb, &options))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| match e {
            PipelineError::Invalid(defects) => ApiError::Unprocessable(json!({
                "error": "invalid_solution",
                "message": PipelineError::Invalid(defects.clone()).to_string(),
                "defects": defects,
            })),
            other => ApiError::Internal(other.to_string()),
        })?;

    let now = st.now();
    session.submissions += 1;
    if !evaluation.violations.is_empty() {
        let count = evaluation.feedback.len() as u64;
        session.feedback_shown_count += count;
        st.events.record(LearningEvent::new(
            student.as_str(),
            now,
            EventKind::FeedbackShown { exercise_id: id.clone(), count },
        ))?;
    }
    let mut score = None;
    if evaluation.completed {
        let elapsed = now.saturating_sub(session.started_at);
        let s = learning_score(elapsed, session.feedback_shown_count, ex.scoring_limits);
        st.events.record(LearningEvent::new(
            student.as_str(),
            now,
            EventKind::ExerciseCompleted {
                exercise_id: id.clone(),
                elapsed_seconds: elapsed,
                feedback_count: session.feedback_shown_count,
                learning_score: s,
            },
        ))?;
        session.completed_at = Some(now);
        score = Some(s);
    }
    st.sessions.lock().insert(key, session)?;

    let mut log = st.submissions.lock();
    let record = SubmissionRecord {
        id: format!("sub-{}", log.len() + 1),
        student_id: student,
        exercise_id: id,
        submitted_at: now,
        program: serde_json::from_str(&serialize_solution(&program)).expect("canonical solution is JSON"),
        violation_summary: summarize(&evaluation.violations),
        evaluation,
        learning_score: score,
    };
    log.append(&record)?;
    Ok(Json(record))
}

/// A question as shown to the student, without the answer.
#[derive(Debug, Serialize)]
struct QuizQuestion<'a> {
    id: &'a str,
    stem: &'a str,
    choices: &'a [String],
    difficulty: u8,
    answering_time_seconds: u32,
}

fn quiz_view(rec: &QuizRecord) -> Value {
    let questions: Vec<QuizQuestion> = rec
        .snapshot
        .iter()
        .map(|q| QuizQuestion {
            id: &q.id,
            stem: &q.stem,
            choices: &q.choices,
            difficulty: q.difficulty,
            answering_time_seconds: q.answering_time_seconds,
        })
        .collect();
    let mut v = serde_json::to_value(&rec.quiz).expect("quiz serializes");
    v["questions"] = serde_json::to_value(questions).expect("questions serialize");
    v["graded"] = Value::Bool(rec.grade.is_some());
    v
}

pub async fn start_quiz(
    State(st): State<AppState>,
    caller: Caller,
    Path(lesson_id): Path<String>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let student = caller.student()?.to_string();
    if !lessons::is_lesson(&lesson_id) {
        return Err(ApiError::not_found(format!("lesson `{lesson_id}`")));
    }
    let model = st.student_model(&student);
    let now = st.now();
    let mut bank = st.bank.lock();
    let mut quizzes = st.quizzes.lock();
    let quiz_id = format!("quiz-{}", quizzes.len() + 1);
    let quiz = assemble_quiz(&bank.bank, &model, &lesson_id, &st.config.itest, quiz_id.clone(), now).map_err(|e| match e {
        ItestError::EmptyBankForLesson { lesson_id: l } => ApiError::not_found(format!("questions for lesson `{l}`")),
        other => ApiError::invalid(&other),
    })?;
    let snapshot = bank.bank.snapshot(&quiz.question_ids);
    update_priorities(&mut bank.bank, &quiz, &st.config.itest);
    bank.persist()?;
    let rec = QuizRecord {
        quiz,
        snapshot,
        grade: None,
    };
    let view = quiz_view(&rec);
    quizzes.insert(quiz_id, rec)?;
    Ok((StatusCode::CREATED, Json(view)))
}

pub async fn get_quiz(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let quizzes = st.quizzes.lock();
    let rec = quizzes
        .get(&id)
        .filter(|r| caller.may_view(&r.quiz.student_id))
        .ok_or_else(|| ApiError::not_found(format!("quiz `{id}`")))?;
    let mut v = quiz_view(rec);
    if let Some(g) = &rec.grade {
        v["grade"] = serde_json::to_value(g).expect("grade serializes");
    }
    Ok(Json(v))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    /// Question id to chosen index.
    pub answers: BTreeMap<String, u8>,
}

pub async fn answer_quiz(
    State(st): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<AnswerRequest>,
) -> ApiResult<Json<Value>> {
    let student = caller.student()?.to_string();
    let mut quizzes = st.quizzes.lock();
    let mut rec = quizzes
        .get(&id)
        .filter(|r| r.quiz.student_id == student)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("quiz `{id}`")))?;
    if rec.grade.is_some() {
        return Err(ApiError::Conflict(format!("quiz `{id}` is already graded")));
    }
    let grade = grade_quiz(&rec.quiz, &req.answers, &rec.snapshot).map_err(|e| ApiError::invalid(&e))?;
    st.events.record(grade.event(&student, st.now()))?;
    rec.grade = Some(grade.clone());
    quizzes.insert(id, rec)?;
    Ok(Json(serde_json::to_value(grade).expect("grade serializes")))
}

pub async fn student_model(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    if !caller.may_view(&id) {
        return Err(ApiError::Forbidden);
    }
    Ok(Json(model_view(&st, &id)))
}

pub fn model_view(st: &AppState, student_id: &str) -> Value {
    let model = st.student_model(student_id);
    let level = learning_level(&model.averages, &st.config.itest);
    let mut v = serde_json::to_value(&model).expect("model serializes");
    v["learning_level"] = json!(level);
    v["difficulty_band"] = json!(difficulty_band(level));
    v
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamRequest {
    #[serde(default)]
    pub lesson_ids: Vec<String>,
    /// Every lesson of the term when `lesson_ids` is empty.
    #[serde(default)]
    pub term: Option<u8>,
    #[serde(default)]
    pub per_difficulty: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ExamView {
    question_ids: Vec<String>,
    questions: Vec<QuestionRecord>,
}

pub async fn create_exam(
    State(st): State<AppState>,
    caller: Caller,
    Body(req): Body<ExamRequest>,
) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let mut lesson_ids = req.lesson_ids;
    if lesson_ids.is_empty() {
        let term = req.term.ok_or_else(|| ApiError::malformed("give lesson_ids or term"))?;
        lesson_ids = lessons::term_lessons(term).map(|l| l.id.to_string()).collect();
    }
    if let Some(bad) = lesson_ids.iter().find(|l| !lessons::is_lesson(l)) {
        return Err(ApiError::not_found(format!("lesson `{bad}`")));
    }
    let policy = match req.per_difficulty {
        Some(0) => return Err(ApiError::malformed("per_difficulty must be positive")),
        Some(n) => ExamPolicy { per_difficulty: n },
        None => st.config.exam.clone(),
    };
    let bank = st.bank.lock();
    let ids = assemble_exam(&bank.bank, &lesson_ids, &policy).map_err(|e| ApiError::invalid(&e))?;
    let view = ExamView {
        questions: bank.bank.snapshot(&ids),
        question_ids: ids,
    };
    Ok(Json(serde_json::to_value(view).expect("exam serializes")))
}

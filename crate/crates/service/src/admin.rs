//! Teacher endpoints under `/api/admin`: authoring, session resets, grade
//! entry and reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use tutor_core::codec::{exercise_to_value, parse_exercise};
use tutor_core::constraints::kb_stats;
use tutor_core::grading::{cohort_report, ActivityAverages, GradeRecord, GradingError};
use tutor_core::itest::{parse_questions, ItestError, QuestionRecord};
use tutor_core::performance::{activity_means, EventKind, LearningEvent};

use crate::auth::Caller;
use crate::error::{ApiError, ApiResult};
use crate::state::{session_key, AppState, GradeEntry};
use crate::student::{model_view, Body};

// Exercises

pub async fn list_exercises(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let docs: Vec<Value> = st.exercises.read().docs.values().cloned().collect();
    Ok(Json(json!({ "exercises": docs })))
}

fn store_exercise(st: &AppState, doc: &Value, id: Option<&str>, create: bool) -> ApiResult<Value> {
    let vocabulary = st.kb().tag_vocabulary.clone();
    let ex = parse_exercise(&doc.to_string(), &vocabulary).map_err(|e| ApiError::invalid(&e))?;
    if let Some(id) = id.filter(|id| *id != ex.id) {
        return Err(ApiError::malformed(format!("body id `{}` does not match `{id}`", ex.id)));
    }
    let mut exercises = st.exercises.write();
    if create && exercises.parsed.contains_key(&ex.id) {
        return Err(ApiError::Conflict(format!("exercise `{}` already exists", ex.id)));
    }
    let canonical = exercise_to_value(&ex);
    exercises.docs.insert(ex.id.clone(), canonical.clone())?;
    exercises.parsed.insert(ex.id.clone(), Arc::new(ex));
    Ok(canonical)
}

pub async fn create_exercise(
    State(st): State<AppState>,
    caller: Caller,
    Body(doc): Body<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    caller.teacher()?;
    Ok((StatusCode::CREATED, Json(store_exercise(&st, &doc, None, true)?)))
}

pub async fn put_exercise(
    State(st): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(doc): Body<Value>,
) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    Ok(Json(store_exercise(&st, &doc, Some(&id), false)?))
}

pub async fn delete_exercise(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    caller.teacher()?;
    let mut exercises = st.exercises.write();
    if exercises.parsed.remove(&id).is_none() {
        return Err(ApiError::not_found(format!("exercise `{id}`")));
    }
    exercises.docs.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

// Questions

#[derive(Debug, Deserialize)]
pub struct QuestionFilter {
    #[serde(default)]
    pub lesson_id: Option<String>,
}

pub async fn list_questions(
    State(st): State<AppState>,
    caller: Caller,
    Query(filter): Query<QuestionFilter>,
) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let bank = st.bank.lock();
    let qs: Vec<&QuestionRecord> = match &filter.lesson_id {
        Some(l) => bank.bank.for_lesson(l).collect(),
        None => bank.bank.iter().collect(),
    };
    Ok(Json(json!({ "questions": qs })))
}

pub async fn get_question(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<Json<QuestionRecord>> {
    caller.teacher()?;
    let bank = st.bank.lock();
    bank.bank.get(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("question `{id}`")))
}

fn bank_error(e: ItestError) -> ApiError {
    match e {
        ItestError::DuplicateQuestionId { id } => ApiError::Conflict(format!("question `{id}` already exists")),
        ItestError::UnknownQuestion { id } => ApiError::not_found(format!("question `{id}`")),
        other => ApiError::invalid(&other),
    }
}

pub async fn create_question(
    State(st): State<AppState>,
    caller: Caller,
    Body(q): Body<QuestionRecord>,
) -> ApiResult<(StatusCode, Json<QuestionRecord>)> {
    caller.teacher()?;
    let mut bank = st.bank.lock();
    bank.bank.insert(q.clone()).map_err(bank_error)?;
    bank.persist()?;
    Ok((StatusCode::CREATED, Json(q)))
}

/// Adds every question of a `.questions.json` document, or none of them.
pub async fn import_questions(
    State(st): State<AppState>,
    caller: Caller,
    Body(doc): Body<Value>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    caller.teacher()?;
    let qs = parse_questions(&doc.to_string()).map_err(|e| ApiError::invalid(&e))?;
    let mut bank = st.bank.lock();
    let mut next = bank.bank.clone();
    for q in &qs {
        next.insert(q.clone()).map_err(bank_error)?;
    }
    bank.bank = next;
    bank.persist()?;
    Ok((StatusCode::CREATED, Json(json!({ "imported": qs.len() }))))
}

pub async fn put_question(
    State(st): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(q): Body<QuestionRecord>,
) -> ApiResult<Json<QuestionRecord>> {
    caller.teacher()?;
    if q.id != id {
        return Err(ApiError::malformed(format!("body id `{}` does not match `{id}`", q.id)));
    }
    let mut bank = st.bank.lock();
    bank.bank.update(q).map_err(bank_error)?;
    bank.persist()?;
    Ok(Json(bank.bank.get(&id).cloned().expect("just updated")))
}

pub async fn delete_question(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    caller.teacher()?;
    let mut bank = st.bank.lock();
    bank.bank.remove(&id).ok_or_else(|| ApiError::not_found(format!("question `{id}`")))?;
    bank.persist()?;
    Ok(StatusCode::NO_CONTENT)
}

// Rules

pub async fn list_rules(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let rules = st.rules.read();
    let summary: Vec<Value> = rules
        .kb
        .constraints
        .iter()
        .map(|c| json!({"id": c.id, "category": c.category, "enabled": c.enabled, "description": c.description}))
        .collect();
    let documents: Vec<&String> = rules.docs.iter().map(|(k, _)| k).collect();
    Ok(Json(json!({
        "version": rules.kb.version,
        "documents": documents,
        "rules": summary,
        "stats": kb_stats(&rules.kb),
    })))
}

pub async fn get_rule_document(State(st): State<AppState>, caller: Caller, Path(name): Path<String>) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let rules = st.rules.read();
    rules.docs.get(&name).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("rule document `{name}`")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewRuleDocument {
    pub name: String,
    pub document: Value,
}

/// Rebuilds the knowledge base with `name` set to `doc` (or removed) and
/// swaps it in only when it loads.
fn apply_rule_document(st: &AppState, name: &str, doc: Option<Value>, create: bool) -> ApiResult<Value> {
    let mut rules = st.rules.write();
    let mut docs = rules.doc_map();
    let exists = docs.contains_key(name);
    if create && exists {
        return Err(ApiError::Conflict(format!("rule document `{name}` already exists")));
    }
    if doc.is_none() && !exists {
        return Err(ApiError::not_found(format!("rule document `{name}`")));
    }
    match &doc {
        Some(d) => docs.insert(name.to_string(), d.clone()),
        None => docs.remove(name),
    };
    let kb = rules.build(&docs).map_err(|e| ApiError::invalid(&e))?;
    match doc {
        Some(d) => rules.docs.insert(name, d)?,
        None => rules.docs.remove(name)?,
    };
    let stats = kb_stats(&kb);
    let total = kb.len();
    rules.kb = Arc::new(kb);
    Ok(json!({"name": name, "rules": total, "stats": stats}))
}

pub async fn create_rule_document(
    State(st): State<AppState>,
    caller: Caller,
    Body(req): Body<NewRuleDocument>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    caller.teacher()?;
    if req.name.trim().is_empty() {
        return Err(ApiError::malformed("document name is empty"));
    }
    Ok((StatusCode::CREATED, Json(apply_rule_document(&st, &req.name, Some(req.document), true)?)))
}

pub async fn put_rule_document(
    State(st): State<AppState>,
    caller: Caller,
    Path(name): Path<String>,
    Body(doc): Body<Value>,
) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    Ok(Json(apply_rule_document(&st, &name, Some(doc), false)?))
}

pub async fn delete_rule_document(State(st): State<AppState>, caller: Caller, Path(name): Path<String>) -> ApiResult<StatusCode> {
    caller.teacher()?;
    apply_rule_document(&st, &name, None, false)?;
    Ok(StatusCode::NO_CONTENT)
}

// Sessions, events, submissions

pub async fn list_sessions(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let sessions: Vec<Value> = st.sessions.lock().values().map(|s| serde_json::to_value(s).expect("session serializes")).collect();
    Ok(Json(json!({ "sessions": sessions })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRef {
    pub student_id: String,
    pub exercise_id: String,
}

/// Reopens a completed exercise; the next visit starts a fresh session.
pub async fn reset_session(State(st): State<AppState>, caller: Caller, Body(r): Body<SessionRef>) -> ApiResult<StatusCode> {
    caller.teacher()?;
    let key = session_key(&r.student_id, &r.exercise_id);
    let lock = st.session_lock(&key);
    let _guard = lock.lock().await;
    st.sessions
        .lock()
        .remove(&key)?
        .ok_or_else(|| ApiError::not_found(format!("session of `{}` on `{}`", r.student_id, r.exercise_id)))?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct TeacherEvent {
    pub student_id: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Teacher-entered activity points and page-view scores.
pub async fn record_event(
    State(st): State<AppState>,
    caller: Caller,
    Body(e): Body<TeacherEvent>,
) -> ApiResult<(StatusCode, Json<LearningEvent>)> {
    caller.teacher()?;
    if !matches!(e.kind, EventKind::ActivityPoint { .. } | EventKind::PageViewScoreSet { .. }) {
        return Err(ApiError::malformed("only activity_point and page_view_score_set events can be entered"));
    }
    let event = LearningEvent::new(e.student_id, st.now(), e.kind);
    st.events.record(event.clone())?;
    Ok((StatusCode::CREATED, Json(event)))
}

#[derive(Debug, Deserialize)]
pub struct SubmissionFilter {
    #[serde(default)]
    pub student_id: Option<String>,
    #[serde(default)]
    pub exercise_id: Option<String>,
}

pub async fn list_submissions(
    State(st): State<AppState>,
    caller: Caller,
    Query(f): Query<SubmissionFilter>,
) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let all = st.submissions.lock().read_all()?;
    let keep = |v: &Value, field: &str, want: &Option<String>| want.as_ref().is_none_or(|w| v[field] == *w.as_str());
    let items: Vec<Value> = all
        .into_iter()
        .filter(|v| keep(v, "student_id", &f.student_id) && keep(v, "exercise_id", &f.exercise_id))
        .collect();
    Ok(Json(json!({ "submissions": items })))
}

// Grades and reports

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradeInput {
    pub group: String,
    pub visa: f64,
    pub final_exam: f64,
    /// Taken from the student's recorded activity points when absent.
    #[serde(default)]
    pub activity_averages: Option<ActivityAverages>,
}

pub async fn put_grade(
    State(st): State<AppState>,
    caller: Caller,
    Path(student_id): Path<String>,
    Body(input): Body<GradeInput>,
) -> ApiResult<Json<GradeEntry>> {
    caller.teacher()?;
    if input.group.trim().is_empty() {
        return Err(ApiError::malformed("group is empty"));
    }
    let activities = input
        .activity_averages
        .unwrap_or_else(|| ActivityAverages::from_means(&activity_means(&st.events.events_for(&student_id))));
    let record = GradeRecord::compute(student_id.as_str(), input.visa, input.final_exam, activities, &st.config.grading)
        .map_err(|e| ApiError::invalid(&e))?;
    let entry = GradeEntry {
        group: input.group,
        record,
    };
    st.grades.lock().insert(student_id, entry.clone())?;
    Ok(Json(entry))
}

pub async fn list_grades(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let grades: Vec<GradeEntry> = st.grades.lock().values().cloned().collect();
    Ok(Json(json!({ "grades": grades })))
}

pub async fn delete_grade(State(st): State<AppState>, caller: Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    caller.teacher()?;
    st.grades.lock().remove(&id)?.ok_or_else(|| ApiError::not_found(format!("grade of `{id}`")))?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn students_report(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let mut ids: Vec<String> = st.events.students();
    ids.extend(st.config.auth.students.values().cloned());
    ids.sort();
    ids.dedup();
    let models: Vec<Value> = ids.iter().map(|id| model_view(&st, id)).collect();
    Ok(Json(json!({ "students": models })))
}

pub async fn kb_report(State(st): State<AppState>, caller: Caller) -> ApiResult<Json<Value>> {
    caller.teacher()?;
    let kb = st.kb();
    Ok(Json(json!({"version": kb.version, "total": kb.len(), "categories": kb_stats(&kb)})))
}

#[derive(Debug, Deserialize)]
pub struct CohortQuery {
    /// Two group names separated by a comma. Differences are first minus
    /// second. Defaults to the two stored groups in name order.
    #[serde(default)]
    pub groups: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

pub async fn cohort(State(st): State<AppState>, caller: Caller, Query(q): Query<CohortQuery>) -> ApiResult<Response> {
    caller.teacher()?;
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in st.grades.lock().values() {
        by_group.entry(e.group.clone()).or_default().push(e.record.term_grade);
    }
    let (a, b) = match &q.groups {
        Some(g) => match g.split(',').map(str::trim).collect::<Vec<_>>()[..] {
            [a, b] if a != b => (a.to_string(), b.to_string()),
            _ => return Err(ApiError::malformed("groups must name two different groups, e.g. groups=control,experimental")),
        },
        None if by_group.len() == 2 => {
            let mut names = by_group.keys().cloned();
            (names.next().unwrap(), names.next().unwrap())
        }
        None => {
            return Err(ApiError::malformed(format!(
                "{} groups are stored; pick two with groups=a,b",
                by_group.len()
            )))
        }
    };
    let grades = |name: &str| -> ApiResult<Vec<f64>> {
        by_group.get(name).cloned().ok_or_else(|| ApiError::not_found(format!("group `{name}`")))
    };
    let (ga, gb) = (grades(&a)?, grades(&b)?);
    let report = cohort_report((&a, &ga), (&b, &gb), &st.config.grading).map_err(|e: GradingError| ApiError::invalid(&e))?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("text") => Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report.to_text()).into_response()),
        Some(other) => Err(ApiError::malformed(format!("unknown format `{other}`"))),
    }
}

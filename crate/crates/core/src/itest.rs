//! ITest: question bank, student model, the question chooser and exam
//! assembly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::performance::{averages_of, EventKind, LearningEvent, StudentAverages};

pub const CHOICES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub lesson_id: String,
    pub stem: String,
    pub choices: Vec<String>,
    pub correct_index: u8,
    /// 1 very easy .. 5 very hard.
    pub difficulty: u8,
    pub choice_priority: u8,
    pub answering_time_seconds: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_used_at: Option<u64>,
}

impl QuestionRecord {
    pub fn validate(&self) -> Result<(), ItestError> {
        let bad = |reason: String| {
            Err(ItestError::InvalidQuestion {
                id: self.id.clone(),
                reason,
            })
        };
        if self.id.is_empty() {
            return bad("id is empty".into());
        }
        if self.lesson_id.is_empty() {
            return bad("lesson_id is empty".into());
        }
        if self.choices.len() != CHOICES {
            return bad(format!("needs exactly {CHOICES} choices, has {}", self.choices.len()));
        }
        if usize::from(self.correct_index) >= CHOICES {
            return bad(format!("correct_index {} is not in 0..4", self.correct_index));
        }
        if !(1..=5).contains(&self.difficulty) {
            return bad(format!("difficulty {} is not in 1..5", self.difficulty));
        }
        if self.choice_priority > 100 {
            return bad(format!("choice_priority {} is over 100", self.choice_priority));
        }
        if self.answering_time_seconds == 0 {
            return bad("answering_time_seconds must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ItestError {
    #[error("question `{id}`: {reason}")]
    InvalidQuestion { id: String, reason: String },
    #[error("duplicate question id `{id}`")]
    DuplicateQuestionId { id: String },
    #[error("unknown question `{id}`")]
    UnknownQuestion { id: String },
    #[error("no questions for lesson `{lesson_id}`")]
    EmptyBankForLesson { lesson_id: String },
    #[error("answer for `{question_id}`, which is not part of the quiz")]
    UnknownQuestionInAnswers { question_id: String },
    #[error("answer {index} for `{question_id}` is not in 0..4")]
    InvalidAnswer { question_id: String, index: u8 },
    #[error("exam needs {needed} questions but only {available} are available")]
    InsufficientQuestions { needed: usize, available: usize },
    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },
    #[error("question document: {message}")]
    Document { message: String },
}

/// Reads a `.questions.json` document. Usage state is not part of the
/// document and starts out empty.
pub fn parse_questions(text: &str) -> Result<Vec<QuestionRecord>, ItestError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Doc {
        id: String,
        lesson_id: String,
        stem: String,
        choices: Vec<String>,
        correct_index: u8,
        difficulty: u8,
        choice_priority: u8,
        answering_time_seconds: u32,
    }
    let docs: Vec<Doc> = serde_json::from_str(text).map_err(|e| ItestError::Document { message: e.to_string() })?;
    let mut seen = BTreeSet::new();
    docs.into_iter()
        .map(|d| {
            let q = QuestionRecord {
                id: d.id,
                lesson_id: d.lesson_id,
                stem: d.stem,
                choices: d.choices,
                correct_index: d.correct_index,
                difficulty: d.difficulty,
                choice_priority: d.choice_priority,
                answering_time_seconds: d.answering_time_seconds,
                last_used_at: None,
            };
            q.validate()?;
            if !seen.insert(q.id.clone()) {
                return Err(ItestError::DuplicateQuestionId { id: q.id });
            }
            Ok(q)
        })
        .collect()
}

pub fn serialize_questions(questions: &[QuestionRecord]) -> String {
    let docs: Vec<_> = questions
        .iter()
        .map(|q| QuestionRecord {
            last_used_at: None,
            ..q.clone()
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&docs).expect("questions serialize");
    s.push('\n');
    s
}

/// Questions keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    questions: BTreeMap<String, QuestionRecord>,
}

impl QuestionBank {
    pub fn new(questions: impl IntoIterator<Item = QuestionRecord>) -> Result<Self, ItestError> {
        let mut bank = QuestionBank::default();
        for q in questions {
            bank.insert(q)?;
        }
        Ok(bank)
    }

    pub fn insert(&mut self, q: QuestionRecord) -> Result<(), ItestError> {
        q.validate()?;
        if self.questions.contains_key(&q.id) {
            return Err(ItestError::DuplicateQuestionId { id: q.id });
        }
        self.questions.insert(q.id.clone(), q);
        Ok(())
    }

    /// Replaces an existing question, keeping its usage state.
    pub fn update(&mut self, mut q: QuestionRecord) -> Result<(), ItestError> {
        q.validate()?;
        let old = self
            .questions
            .get(&q.id)
            .ok_or_else(|| ItestError::UnknownQuestion { id: q.id.clone() })?;
        q.last_used_at = old.last_used_at;
        self.questions.insert(q.id.clone(), q);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<QuestionRecord> {
        self.questions.remove(id)
    }

    pub fn get(&self, id: &str) -> Option<&QuestionRecord> {
        self.questions.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &QuestionRecord> {
        self.questions.values()
    }

    pub fn for_lesson<'a>(&'a self, lesson_id: &'a str) -> impl Iterator<Item = &'a QuestionRecord> {
        self.iter().filter(move |q| q.lesson_id == lesson_id)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    /// Copies of the named questions, for grading a quiz later against the
    /// bank as it was.
    pub fn snapshot(&self, ids: &[String]) -> Vec<QuestionRecord> {
        ids.iter().filter_map(|id| self.get(id).cloned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItestConfig {
    pub weight_pv: f64,
    pub weight_quiz: f64,
    pub weight_ctutor: f64,
    pub default_level: f64,
    pub questions_per_quiz: usize,
    /// Priority lost by a question each time it is used.
    pub used_penalty: u8,
    /// Priority gained by same-lesson questions left out of a quiz.
    pub unused_bonus: u8,
}

impl Default for ItestConfig {
    fn default() -> Self {
        ItestConfig {
            weight_pv: 0.10,
            weight_quiz: 0.40,
            weight_ctutor: 0.50,
            default_level: 50.0,
            questions_per_quiz: 10,
            used_penalty: 10,
            unused_bonus: 1,
        }
    }
}

impl ItestConfig {
    pub fn validate(&self) -> Result<(), ItestError> {
        let w = [self.weight_pv, self.weight_quiz, self.weight_ctutor];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ItestError::InvalidConfig { message: "weights must be non-negative".into() });
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ItestError::InvalidConfig { message: "weights must sum to 1".into() });
        }
        if !(0.0..=100.0).contains(&self.default_level) {
            return Err(ItestError::InvalidConfig { message: "default_level must be in 0..100".into() });
        }
        if self.questions_per_quiz == 0 {
            return Err(ItestError::InvalidConfig { message: "questions_per_quiz must be positive".into() });
        }
        Ok(())
    }
}

/// Weighted PV/AQ/AC. Missing components drop out and the remaining weights
/// are rescaled to sum to one.
pub fn learning_level(a: &StudentAverages, config: &ItestConfig) -> f64 {
    if let (Some(pv), Some(aq), Some(ac)) = (a.page_view_score, a.avg_quiz_score, a.avg_ctutor_score) {
        return (config.weight_pv * pv + config.weight_quiz * aq + config.weight_ctutor * ac).clamp(0.0, 100.0);
    }
    let parts = [
        (a.page_view_score, config.weight_pv),
        (a.avg_quiz_score, config.weight_quiz),
        (a.avg_ctutor_score, config.weight_ctutor),
    ];
    let (sum, weight) = parts
        .iter()
        .filter_map(|(v, w)| v.map(|v| (v * w, *w)))
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if weight > 0.0 {
        (sum / weight).clamp(0.0, 100.0)
    } else {
        config.default_level
    }
}

/// Target difficulty for a learning level: 20-point bands, top band closed.
pub fn difficulty_band(level: f64) -> u8 {
    match level {
        l if l < 20.0 => 1,
        l if l < 40.0 => 2,
        l if l < 60.0 => 3,
        l if l < 80.0 => 4,
        _ => 5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentModel {
    pub student_id: String,
    pub averages: StudentAverages,
    pub completed_ctutor_exercises: usize,
    pub quiz_history: Vec<(String, f64)>,
}

impl StudentModel {
    pub fn new(student_id: impl Into<String>) -> Self {
        StudentModel {
            student_id: student_id.into(),
            averages: StudentAverages::default(),
            completed_ctutor_exercises: 0,
            quiz_history: Vec::new(),
        }
    }

    pub fn from_events(student_id: &str, events: &[LearningEvent], lessons_total: NonZeroUsize) -> Self {
        let mine: Vec<&LearningEvent> = events.iter().filter(|e| e.student_id == student_id).collect();
        StudentModel {
            student_id: student_id.to_string(),
            averages: averages_of(mine.iter().copied(), lessons_total),
            completed_ctutor_exercises: mine
                .iter()
                .filter(|e| matches!(e.kind, EventKind::ExerciseCompleted { .. }))
                .count(),
            quiz_history: mine
                .iter()
                .filter_map(|e| match &e.kind {
                    EventKind::QuizScored { quiz_id, score } => Some((quiz_id.clone(), *score)),
                    _ => None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quiz {
    pub id: String,
    pub student_id: String,
    pub lesson_id: String,
    pub question_ids: Vec<String>,
    pub total_time_seconds: u64,
    pub created_at: u64,
}

/// Chooser order for a target difficulty.
fn chooser_cmp(target: u8) -> impl Fn(&&QuestionRecord, &&QuestionRecord) -> Ordering {
    move |a, b| {
        a.difficulty
            .abs_diff(target)
            .cmp(&b.difficulty.abs_diff(target))
            .then(b.choice_priority.cmp(&a.choice_priority))
            .then(freshness(a).cmp(&freshness(b)))
            .then(a.id.cmp(&b.id))
    }
}

/// Never-used questions sort before used ones, older use before newer.
fn freshness(q: &QuestionRecord) -> (bool, u64) {
    (q.last_used_at.is_some(), q.last_used_at.unwrap_or(0))
}

pub fn assemble_quiz(
    bank: &QuestionBank,
    student: &StudentModel,
    lesson_id: &str,
    config: &ItestConfig,
    quiz_id: impl Into<String>,
    created_at: u64,
) -> Result<Quiz, ItestError> {
    let target = difficulty_band(learning_level(&student.averages, config));
    let mut candidates: Vec<&QuestionRecord> = bank.for_lesson(lesson_id).collect();
    if candidates.is_empty() {
        return Err(ItestError::EmptyBankForLesson { lesson_id: lesson_id.to_string() });
    }
    candidates.sort_by(chooser_cmp(target));
    candidates.truncate(config.questions_per_quiz);
    Ok(Quiz {
        id: quiz_id.into(),
        student_id: student.student_id.clone(),
        lesson_id: lesson_id.to_string(),
        total_time_seconds: candidates.iter().map(|q| u64::from(q.answering_time_seconds)).sum(),
        question_ids: candidates.into_iter().map(|q| q.id.clone()).collect(),
        created_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub question_id: String,
    pub chosen_index: Option<u8>,
    pub correct_index: u8,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizGrade {
    pub quiz_id: String,
    pub score: f64,
    pub correct_count: usize,
    pub results: Vec<QuestionResult>,
}

impl QuizGrade {
    pub fn event(&self, student_id: &str, timestamp: u64) -> LearningEvent {
        LearningEvent::new(
            student_id,
            timestamp,
            EventKind::QuizScored {
                quiz_id: self.quiz_id.clone(),
                score: self.score,
            },
        )
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Grades answers against the questions as they were when the quiz was
/// assembled. Unanswered questions count as wrong.
pub fn grade_quiz(
    quiz: &Quiz,
    answers: &BTreeMap<String, u8>,
    snapshot: &[QuestionRecord],
) -> Result<QuizGrade, ItestError> {
    for (id, &index) in answers {
        if !quiz.question_ids.contains(id) {
            return Err(ItestError::UnknownQuestionInAnswers { question_id: id.clone() });
        }
        if usize::from(index) >= CHOICES {
            return Err(ItestError::InvalidAnswer {
                question_id: id.clone(),
                index,
            });
        }
    }
    let results = quiz
        .question_ids
        .iter()
        .map(|id| {
            let q = snapshot
                .iter()
                .find(|q| &q.id == id)
                .ok_or_else(|| ItestError::UnknownQuestion { id: id.clone() })?;
            let chosen = answers.get(id).copied();
            Ok(QuestionResult {
                question_id: id.clone(),
                chosen_index: chosen,
                correct_index: q.correct_index,
                correct: chosen == Some(q.correct_index),
            })
        })
        .collect::<Result<Vec<_>, ItestError>>()?;
    let correct_count = results.iter().filter(|r| r.correct).count();
    let score = if results.is_empty() {
        0.0
    } else {
        round2(100.0 * correct_count as f64 / results.len() as f64)
    };
    Ok(QuizGrade {
        quiz_id: quiz.id.clone(),
        score,
        correct_count,
        results,
    })
}

/// Used questions lose priority and are stamped with the quiz time; the
/// rest of the lesson gains a little so it rotates in.
pub fn update_priorities(bank: &mut QuestionBank, quiz: &Quiz, config: &ItestConfig) {
    for q in bank.questions.values_mut() {
        if q.lesson_id != quiz.lesson_id {
            continue;
        }
        if quiz.question_ids.contains(&q.id) {
            q.choice_priority = q.choice_priority.saturating_sub(config.used_penalty);
            q.last_used_at = Some(quiz.created_at);
        } else {
            q.choice_priority = q.choice_priority.saturating_add(config.unused_bonus).min(100);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExamPolicy {
    pub per_difficulty: usize,
}

impl Default for ExamPolicy {
    fn default() -> Self {
        ExamPolicy { per_difficulty: 5 }
    }
}

impl ExamPolicy {
    pub fn total(&self) -> usize {
        self.per_difficulty * 5
    }
}

/// Non-adaptive exam: `per_difficulty` questions at each level, taken in
/// turn from each lesson. A level that runs short borrows from the levels
/// next to it (lower first), then from further away.
pub fn assemble_exam(
    bank: &QuestionBank,
    term_lessons: &[String],
    policy: &ExamPolicy,
) -> Result<Vec<String>, ItestError> {
    let needed = policy.total();
    let mut lessons: Vec<&str> = Vec::new();
    for l in term_lessons {
        if !lessons.contains(&l.as_str()) {
            lessons.push(l);
        }
    }
    // pools[difficulty][lesson] in chooser order, consumed from the front.
    let mut pools: Vec<Vec<std::collections::VecDeque<&QuestionRecord>>> =
        vec![vec![Default::default(); lessons.len()]; 6];
    let mut available = 0;
    for (li, lesson) in lessons.iter().enumerate() {
        let mut qs: Vec<&QuestionRecord> = bank.for_lesson(lesson).collect();
        qs.sort_by(|a, b| chooser_cmp(a.difficulty)(a, b));
        for q in qs {
            pools[usize::from(q.difficulty)][li].push_back(q);
            available += 1;
        }
    }
    if available < needed {
        return Err(ItestError::InsufficientQuestions { needed, available });
    }
    let mut slots: Vec<Vec<String>> = vec![Vec::new(); 6];
    let mut cursor = vec![0usize; 6];
    let mut take = |slot: usize, from: usize, pools: &mut Vec<Vec<std::collections::VecDeque<&QuestionRecord>>>, slots: &mut Vec<Vec<String>>| {
        while slots[slot].len() < policy.per_difficulty {
            let pool = &mut pools[from];
            if pool.iter().all(|p| p.is_empty()) {
                return;
            }
            let n = pool.len();
            let li = cursor[from] % n;
            cursor[from] += 1;
            if let Some(q) = pool[li].pop_front() {
                slots[slot].push(q.id.clone());
            }
        }
    };
    for distance in 0..5usize {
        for slot in 1..=5usize {
            let mut sources = Vec::new();
            if distance == 0 {
                sources.push(slot);
            } else {
                if slot > distance {
                    sources.push(slot - distance);
                }
                if slot + distance <= 5 {
                    sources.push(slot + distance);
                }
            }
            for from in sources {
                take(slot, from, &mut pools, &mut slots);
            }
        }
    }
    Ok(slots.concat())
}

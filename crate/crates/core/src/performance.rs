//! Performance tracing: learning events, CTutor learning scores and the
//! per-student averages the quiz chooser reads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::codec::ScoringLimits;

/// Score for one completed exercise. Time and feedback count each contribute
/// half, decaying linearly to zero at the teacher's limit.
pub fn learning_score(elapsed_seconds: u64, feedback_count: u64, limits: ScoringLimits) -> u8 {
    // Exact rational arithmetic, rounding halves up.
    let t = u128::from(limits.time_limit_seconds.max(1));
    let f = u128::from(limits.feedback_limit.max(1));
    let e = u128::from(elapsed_seconds).min(t);
    let c = u128::from(feedback_count).min(f);
    let num = 50 * ((t - e) * f + (f - c) * t);
    let den = t * f;
    ((2 * num + den) / (2 * den)) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Homework,
    Forum,
    Chat,
}

impl Activity {
    pub const ALL: [Activity; 3] = [Activity::Homework, Activity::Forum, Activity::Chat];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    PageView {
        lesson_id: String,
    },
    FeedbackShown {
        exercise_id: String,
        count: u64,
    },
    ExerciseCompleted {
        exercise_id: String,
        elapsed_seconds: u64,
        feedback_count: u64,
        learning_score: u8,
    },
    QuizScored {
        quiz_id: String,
        score: f64,
    },
    ActivityPoint {
        activity: Activity,
        points: f64,
    },
    /// Teacher-entered page viewing score; replaces the automatic one.
    PageViewScoreSet {
        score: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningEvent {
    pub student_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl LearningEvent {
    pub fn new(student_id: impl Into<String>, timestamp: u64, kind: EventKind) -> Self {
        LearningEvent {
            student_id: student_id.into(),
            timestamp,
            kind,
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |why: String| Err(StoreError::InvalidEvent(why));
        if self.student_id.is_empty() {
            return bad("student_id is empty".into());
        }
        let score_ok = |s: f64| s.is_finite() && (0.0..=100.0).contains(&s);
        match &self.kind {
            EventKind::PageView { lesson_id } if lesson_id.is_empty() => bad("lesson_id is empty".into()),
            EventKind::FeedbackShown { exercise_id, .. }
            | EventKind::ExerciseCompleted { exercise_id, .. }
                if exercise_id.is_empty() =>
            {
                bad("exercise_id is empty".into())
            }
            EventKind::ExerciseCompleted { learning_score, .. } if *learning_score > 100 => {
                bad(format!("learning score {learning_score} is outside 0..100"))
            }
            EventKind::QuizScored { quiz_id, .. } if quiz_id.is_empty() => bad("quiz_id is empty".into()),
            EventKind::QuizScored { score, .. } | EventKind::PageViewScoreSet { score }
                if !score_ok(*score) =>
            {
                bad(format!("score {score} is outside 0..100"))
            }
            EventKind::ActivityPoint { points, .. } if !score_ok(*points) => {
                bad(format!("activity points {points} are outside 0..100"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("{path}:{line}: unreadable event: {reason}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("event log i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// PV, AQ and AC on a 0..100 scale; `None` when nothing contributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StudentAverages {
    pub page_view_score: Option<f64>,
    pub avg_quiz_score: Option<f64>,
    pub avg_ctutor_score: Option<f64>,
}

/// Mean that does not depend on the order of `xs`.
fn stable_mean(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Averages over one student's events. The newest teacher-set page viewing
/// score wins over the automatic lesson ratio (ties go to the higher score,
/// so the result never depends on insertion order).
pub fn averages_of<'a>(
    events: impl IntoIterator<Item = &'a LearningEvent>,
    lessons_total: NonZeroUsize,
) -> StudentAverages {
    let mut lessons = BTreeSet::new();
    let mut manual: Option<(u64, f64)> = None;
    let mut quizzes = Vec::new();
    let mut scores = Vec::new();
    for e in events {
        match &e.kind {
            EventKind::PageView { lesson_id } => {
                lessons.insert(lesson_id.as_str());
            }
            EventKind::PageViewScoreSet { score } => {
                let candidate = (e.timestamp, *score);
                if manual.is_none_or(|m| (candidate.0, candidate.1) > m) {
                    manual = Some(candidate);
                }
            }
            EventKind::QuizScored { score, .. } => quizzes.push(*score),
            EventKind::ExerciseCompleted { learning_score, .. } => scores.push(f64::from(*learning_score)),
            _ => {}
        }
    }
    let automatic = (!lessons.is_empty())
        .then(|| (100.0 * lessons.len() as f64 / lessons_total.get() as f64).round().min(100.0));
    StudentAverages {
        page_view_score: manual.map(|m| m.1).or(automatic),
        avg_quiz_score: stable_mean(quizzes),
        avg_ctutor_score: stable_mean(scores),
    }
}

/// Mean points per activity kind; kinds without events are absent.
pub fn activity_means<'a>(
    events: impl IntoIterator<Item = &'a LearningEvent>,
) -> BTreeMap<Activity, f64> {
    let mut points: BTreeMap<Activity, Vec<f64>> = BTreeMap::new();
    for e in events {
        if let EventKind::ActivityPoint { activity, points: p } = &e.kind {
            points.entry(*activity).or_default().push(*p);
        }
    }
    points
        .into_iter()
        .filter_map(|(k, v)| stable_mean(v).map(|m| (k, m)))
        .collect()
}

#[derive(Default)]
struct Log {
    events: Vec<LearningEvent>,
    by_student: BTreeMap<String, Vec<usize>>,
}

impl Log {
    fn push(&mut self, e: LearningEvent) {
        self.by_student
            .entry(e.student_id.clone())
            .or_default()
            .push(self.events.len());
        self.events.push(e);
    }
}

/// Append-only event log, optionally mirrored to a newline-delimited JSON
/// file. Writers are serialized; readers see a consistent prefix.
pub struct EventStore {
    log: RwLock<Log>,
    file: Option<Mutex<File>>,
}

impl EventStore {
    pub fn in_memory() -> Self {
        EventStore {
            log: RwLock::new(Log::default()),
            file: None,
        }
    }

    /// Opens (or creates) the log at `path` and replays it. A final line
    /// without its newline is the remains of an interrupted write and is
    /// dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut log = Log::default();
        if path.exists() {
            let mut reader = BufReader::new(File::open(path)?);
            let mut line = String::new();
            let mut number = 0;
            let mut good_len = 0u64;
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                number += 1;
                if !line.ends_with('\n') {
                    break;
                }
                if !line.trim().is_empty() {
                    let corrupt = |reason: String| StoreError::CorruptLog {
                        path: path.to_path_buf(),
                        line: number,
                        reason,
                    };
                    let e: LearningEvent =
                        serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                    e.validate().map_err(|e| corrupt(e.to_string()))?;
                    log.push(e);
                }
                good_len += n as u64;
            }
            OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventStore {
            log: RwLock::new(log),
            file: Some(Mutex::new(file)),
        })
    }

    pub fn record(&self, event: LearningEvent) -> Result<(), StoreError> {
        event.validate()?;
        let mut log = self.log.write().unwrap_or_else(|e| e.into_inner());
        if let Some(file) = &self.file {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        log.push(event);
        Ok(())
    }

    /// One student's events in insertion order.
    pub fn events_for(&self, student_id: &str) -> Vec<LearningEvent> {
        let log = self.log.read().unwrap_or_else(|e| e.into_inner());
        log.by_student
            .get(student_id)
            .map(|ix| ix.iter().map(|&i| log.events[i].clone()).collect())
            .unwrap_or_default()
    }

    pub fn all_events(&self) -> Vec<LearningEvent> {
        self.log.read().unwrap_or_else(|e| e.into_inner()).events.clone()
    }

    pub fn students(&self) -> Vec<String> {
        let log = self.log.read().unwrap_or_else(|e| e.into_inner());
        log.by_student.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.log.read().unwrap_or_else(|e| e.into_inner()).events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn averages(&self, student_id: &str, lessons_total: NonZeroUsize) -> StudentAverages {
        averages_of(&self.events_for(student_id), lessons_total)
    }
}

/// Current time in whole seconds since the Unix epoch.
pub fn now_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tutor_core::codec::{exercise_to_value, parse_exercise, CodecError, Exercise};
use tutor_core::constraints::{load_knowledge_base, KbError, KnowledgeBase, STARTER_DOCUMENTS};
use tutor_core::grading::GradeRecord;
use tutor_core::itest::{parse_questions, QuestionBank, QuestionRecord, Quiz, QuizGrade, StudentModel};
use tutor_core::performance::{now_seconds, EventStore};

use crate::config::Config;
use crate::store::{Collection, JsonLog, StoreError};

/// Seconds since the epoch. Tests substitute a manual clock.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("event log: {0}")]
    Events(#[from] tutor_core::performance::StoreError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("knowledge base: {0}")]
    Kb(#[from] KbError),
    #[error("{path}: {message}")]
    Content { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub student_id: String,
    pub exercise_id: String,
    pub started_at: u64,
    pub feedback_shown_count: u64,
    pub submissions: u64,
    #[serde(default)]
    pub completed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizRecord {
    pub quiz: Quiz,
    /// Questions as they were when the quiz was assembled.
    pub snapshot: Vec<QuestionRecord>,
    #[serde(default)]
    pub grade: Option<QuizGrade>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeEntry {
    pub group: String,
    #[serde(flatten)]
    pub record: GradeRecord,
}

pub struct Exercises {
    pub parsed: BTreeMap<String, Arc<Exercise>>,
    pub docs: Collection<Value>,
}

pub struct Bank {
    pub bank: QuestionBank,
    pub docs: Collection<QuestionRecord>,
}

impl Bank {
    pub fn persist(&mut self) -> Result<(), StoreError> {
        let all = self.bank.iter().map(|q| (q.id.clone(), q.clone())).collect();
        self.docs.replace_all(all)
    }
}

pub struct Rules {
    pub kb: Arc<KnowledgeBase>,
    /// Teacher-authored rule documents by name.
    pub docs: Collection<Value>,
    base: Vec<(String, String)>,
}

impl Rules {
    /// Builds the knowledge base that would result from `docs`.
    pub fn build(&self, docs: &BTreeMap<String, Value>) -> Result<KnowledgeBase, KbError> {
        let mut all: Vec<(String, String)> = self.base.clone();
        all.extend(docs.iter().map(|(name, doc)| (name.clone(), doc.to_string())));
        let refs: Vec<(&str, &str)> = all.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
        load_knowledge_base(&refs)
    }

    pub fn doc_map(&self) -> BTreeMap<String, Value> {
        self.docs.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

pub struct Inner {
    pub config: Config,
    pub clock: Clock,
    pub events: EventStore,
    pub rules: RwLock<Rules>,
    pub exercises: RwLock<Exercises>,
    pub bank: Mutex<Bank>,
    pub quizzes: Mutex<Collection<QuizRecord>>,
    pub sessions: Mutex<Collection<SessionState>>,
    pub submissions: Mutex<JsonLog>,
    pub grades: Mutex<Collection<GradeEntry>>,
    /// One lock per (student, exercise) so a session's submissions are
    /// evaluated one at a time.
    pub session_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Inner>);

impl std::ops::Deref for AppState {
    type Target = Inner;
    fn deref(&self) -> &Inner {
        &self.0
    }
}

pub fn session_key(student_id: &str, exercise_id: &str) -> String {
    format!("{student_id}\n{exercise_id}")
}

impl AppState {
    pub fn open(config: Config) -> Result<Self, StartupError> {
        Self::with_clock(config, Arc::new(now_seconds))
    }

    pub fn with_clock(config: Config, clock: Clock) -> Result<Self, StartupError> {
        let dir = config.data_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|source| StartupError::Read {
            path: dir.clone(),
            source,
        })?;
        let base = if config.kb_paths.is_empty() {
            STARTER_DOCUMENTS.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect()
        } else {
            let mut docs = Vec::new();
            for p in &config.kb_paths {
                let text = std::fs::read_to_string(p).map_err(|source| StartupError::Read {
                    path: p.clone(),
                    source,
                })?;
                docs.push((p.display().to_string(), text));
            }
            docs
        };
        let mut rules = Rules {
            kb: Arc::new(KnowledgeBase::default()),
            docs: Collection::open(dir.join("rules.json"))?,
            base,
        };
        rules.kb = Arc::new(rules.build(&rules.doc_map())?);

        let mut exercises = Exercises {
            parsed: BTreeMap::new(),
            docs: Collection::open(dir.join("exercises.json"))?,
        };
        for (id, doc) in exercises.docs.iter() {
            let ex = parse_exercise(&doc.to_string(), &rules.kb.tag_vocabulary).map_err(|e| {
                StartupError::Content {
                    path: dir.join("exercises.json"),
                    message: format!("{id}: {e}"),
                }
            })?;
            exercises.parsed.insert(id.clone(), Arc::new(ex));
        }
        let docs: Collection<QuestionRecord> = Collection::open(dir.join("questions.json"))?;
        let bank = QuestionBank::new(docs.values().cloned()).map_err(|e| StartupError::Content {
            path: dir.join("questions.json"),
            message: e.to_string(),
        })?;
        let mut bank = Bank { bank, docs };

        if let Some(seed) = &config.seed_dir {
            seed_content(seed, &rules.kb, &mut exercises, &mut bank)?;
        }

        Ok(AppState(Arc::new(Inner {
            events: EventStore::open(dir.join("events.jsonl"))?,
            quizzes: Mutex::new(Collection::open(dir.join("quizzes.json"))?),
            sessions: Mutex::new(Collection::open(dir.join("sessions.json"))?),
            submissions: Mutex::new(JsonLog::open(dir.join("submissions.jsonl"))?),
            grades: Mutex::new(Collection::open(dir.join("grades.json"))?),
            rules: RwLock::new(rules),
            exercises: RwLock::new(exercises),
            bank: Mutex::new(bank),
            session_locks: Mutex::new(HashMap::new()),
            config,
            clock,
        })))
    }

    pub fn now(&self) -> u64 {
        (self.clock)()
    }

    pub fn kb(&self) -> Arc<KnowledgeBase> {
        Arc::clone(&self.rules.read().kb)
    }

    pub fn exercise(&self, id: &str) -> Option<Arc<Exercise>> {
        self.exercises.read().parsed.get(id).cloned()
    }

    pub fn student_model(&self, student_id: &str) -> StudentModel {
        StudentModel::from_events(student_id, &self.events.events_for(student_id), self.config.lessons_total)
    }

    pub fn session_lock(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        Arc::clone(self.session_locks.lock().entry(key.to_string()).or_default())
    }
}

/// Loads seed exercises and questions that are not already stored.
fn seed_content(
    dir: &std::path::Path,
    kb: &KnowledgeBase,
    exercises: &mut Exercises,
    bank: &mut Bank,
) -> Result<(), StartupError> {
    let mut files: Vec<PathBuf> = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("exercises"), dir.join("questions")] {
        let Ok(entries) = std::fs::read_dir(&sub) else { continue };
        files.extend(entries.filter_map(|e| e.ok()).map(|e| e.path()));
    }
    files.sort();
    let content_err = |path: &PathBuf, message: String| StartupError::Content {
        path: path.clone(),
        message,
    };
    let mut bank_changed = false;
    for path in files {
        let name = path.to_string_lossy();
        let is_exercise = name.ends_with(".exercise.json");
        if !is_exercise && !name.ends_with(".questions.json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|source| StartupError::Read {
            path: path.clone(),
            source,
        })?;
        if is_exercise {
            let ex = parse_exercise(&text, &kb.tag_vocabulary)
                .map_err(|e: CodecError| content_err(&path, e.to_string()))?;
            if !exercises.parsed.contains_key(&ex.id) {
                exercises.docs.insert(ex.id.clone(), exercise_to_value(&ex))?;
                exercises.parsed.insert(ex.id.clone(), Arc::new(ex));
            }
        } else {
            for q in parse_questions(&text).map_err(|e| content_err(&path, e.to_string()))? {
                if bank.bank.get(&q.id).is_none() {
                    bank.bank.insert(q).map_err(|e| content_err(&path, e.to_string()))?;
                    bank_changed = true;
                }
            }
        }
    }
    if bank_changed {
        bank.persist()?;
    }
    Ok(())
}

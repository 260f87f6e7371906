use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tutor_core::feedback::FeedbackKind;
use tutor_core::grading::GradingPolicy;
use tutor_core::interpreter::{DEFAULT_MAX_OUTPUT_BYTES, DEFAULT_MAX_STEPS};
use tutor_core::itest::{ExamPolicy, ItestConfig};
use tutor_core::lessons::LESSONS_PER_TERM;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "TUTOR_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{CONFIG_ENV} is not set and no config path was given")]
    NotGiven,
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthConfig {
    pub teacher_token: String,
    /// Student token to student id.
    #[serde(default)]
    pub students: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub data_dir: PathBuf,
    /// Rule files. The bundled starter rules are used when empty.
    #[serde(default)]
    pub kb_paths: Vec<PathBuf>,
    /// Directory of `*.exercise.json` and `*.questions.json` loaded into an
    /// empty data directory on first start.
    #[serde(default)]
    pub seed_dir: Option<PathBuf>,
    #[serde(default = "default_feedback")]
    pub default_feedback: FeedbackKind,
    #[serde(default = "default_lessons_total")]
    pub lessons_total: NonZeroUsize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_max_output")]
    pub max_output_bytes: usize,
    #[serde(default)]
    pub itest: ItestConfig,
    #[serde(default)]
    pub grading: GradingPolicy,
    #[serde(default)]
    pub exam: ExamPolicy,
    pub auth: AuthConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_feedback() -> FeedbackKind {
    FeedbackKind::Elaborated
}

fn default_lessons_total() -> NonZeroUsize {
    NonZeroUsize::new(LESSONS_PER_TERM).unwrap()
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_max_output() -> usize {
    DEFAULT_MAX_OUTPUT_BYTES
}

impl Config {
    /// A config with defaults everywhere, rooted at `data_dir`.
    pub fn new(data_dir: impl Into<PathBuf>, teacher_token: impl Into<String>) -> Self {
        Config {
            listen: default_listen(),
            data_dir: data_dir.into(),
            kb_paths: Vec::new(),
            seed_dir: None,
            default_feedback: default_feedback(),
            lessons_total: default_lessons_total(),
            max_steps: default_max_steps(),
            max_output_bytes: default_max_output(),
            itest: ItestConfig::default(),
            grading: GradingPolicy::default(),
            exam: ExamPolicy::default(),
            auth: AuthConfig {
                teacher_token: teacher_token.into(),
                students: BTreeMap::new(),
            },
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        // Relative paths are relative to the config file.
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut config.data_dir);
            config.kb_paths.iter_mut().for_each(fix);
            if let Some(seed) = config.seed_dir.as_mut() {
                fix(seed);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Loads `path`, or the file named by `TUTOR_CONFIG`.
    pub fn locate(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(Path::new(&p)),
                None => Err(ConfigError::NotGiven),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.auth.teacher_token.is_empty() {
            return invalid("teacher_token is empty".into());
        }
        if self.auth.students.contains_key(&self.auth.teacher_token) {
            return invalid("a student token equals the teacher token".into());
        }
        if self.auth.students.iter().any(|(t, s)| t.is_empty() || s.is_empty()) {
            return invalid("student tokens and ids must be non-empty".into());
        }
        if self.max_steps == 0 || self.max_output_bytes == 0 {
            return invalid("max_steps and max_output_bytes must be positive".into());
        }
        if self.exam.per_difficulty == 0 {
            return invalid("exam.per_difficulty must be positive".into());
        }
        self.itest.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.grading.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

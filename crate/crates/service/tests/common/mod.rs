use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use tutor_service::{router, AppState, Config};

pub const TEACHER: &str = "teacher-token";
pub const ALICE: &str = "alice-token";
pub const BOB: &str = "bob-token";

pub fn content_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../content")
}

pub struct Harness {
    pub app: Router,
    pub clock: Arc<AtomicU64>,
    pub config: Config,
    pub _dir: Option<tempfile::TempDir>,
}

pub fn config_for(dir: &std::path::Path) -> Config {
    let mut config = Config::new(dir, TEACHER);
    config.seed_dir = Some(content_dir());
    config.auth.students.insert(ALICE.into(), "alice".into());
    config.auth.students.insert(BOB.into(), "bob".into());
    config
}

impl Harness {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut h = Harness::open(config_for(dir.path()), Arc::new(AtomicU64::new(1_000_000)));
        h._dir = Some(dir);
        h
    }

    pub fn open(config: Config, clock: Arc<AtomicU64>) -> Self {
        let c = Arc::clone(&clock);
        let state = AppState::with_clock(config.clone(), Arc::new(move || c.load(Ordering::SeqCst))).unwrap();
        Harness {
            app: router(state),
            clock,
            config,
            _dir: None,
        }
    }

    /// Same data directory and clock, fresh process state.
    pub fn reopen(&self) -> Harness {
        Harness::open(self.config.clone(), Arc::clone(&self.clock))
    }

    pub fn advance(&self, seconds: u64) {
        self.clock.fetch_add(seconds, Ordering::SeqCst);
    }

    pub async fn raw(&self, method: Method, uri: &str, token: Option<&str>, body: Option<String>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b)),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn call(&self, method: Method, uri: &str, token: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, text) = self.raw(method, uri, Some(token), body.map(|b| b.to_string())).await;
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
        (status, value)
    }

    pub async fn get(&self, uri: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, token, None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, token, Some(body)).await
    }

    pub async fn put(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::PUT, uri, token, Some(body)).await
    }

    /// The stored reference solution of an exercise.
    pub async fn reference(&self, exercise: &str) -> Value {
        let (s, doc) = self.get(&format!("/api/exercises/{exercise}"), TEACHER).await;
        assert_eq!(s, StatusCode::OK);
        doc["reference_solution"].clone()
    }
}

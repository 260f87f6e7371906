//! HTTP service for the tutor: exercise sessions, adaptive quizzes, exams,
//! authoring and reports over an embedded on-disk store.
//!
//! Every route except `/health` takes `Authorization: Bearer <token>`.
//! Errors are JSON objects with an `error` code and a `message`.

pub mod admin;
pub mod auth;
pub mod config;
pub mod error;
pub mod state;
pub mod store;
pub mod student;

use axum::routing::{get, post, put};
use axum::Router;

pub use config::{Config, ConfigError, CONFIG_ENV};
pub use state::{AppState, Clock, StartupError};

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/lessons", get(student::list_lessons))
        .route("/lessons/{id}", get(student::get_lesson))
        .route("/lessons/{id}/quizzes", post(student::start_quiz))
        .route("/exercises/{id}", get(student::get_exercise))
        .route("/exercises/{id}/submissions", post(student::submit))
        .route("/quizzes/{id}", get(student::get_quiz))
        .route("/quizzes/{id}/answers", post(student::answer_quiz))
        .route("/students/{id}/model", get(student::student_model))
        .route("/exams", post(student::create_exam));
    let admin = Router::new()
        .route("/exercises", get(admin::list_exercises).post(admin::create_exercise))
        .route("/exercises/{id}", put(admin::put_exercise).delete(admin::delete_exercise))
        .route("/questions", get(admin::list_questions).post(admin::create_question))
        .route("/questions/import", post(admin::import_questions))
        .route(
            "/questions/{id}",
            get(admin::get_question).put(admin::put_question).delete(admin::delete_question),
        )
        .route("/rules", get(admin::list_rules).post(admin::create_rule_document))
        .route(
            "/rules/{name}",
            get(admin::get_rule_document)
                .put(admin::put_rule_document)
                .delete(admin::delete_rule_document),
        )
        .route("/sessions", get(admin::list_sessions))
        .route("/sessions/reset", post(admin::reset_session))
        .route("/events", post(admin::record_event))
        .route("/submissions", get(admin::list_submissions))
        .route("/grades", get(admin::list_grades))
        .route("/grades/{student_id}", put(admin::put_grade).delete(admin::delete_grade))
        .route("/reports/students", get(admin::students_report))
        .route("/reports/kb", get(admin::kb_report))
        .route("/reports/cohort", get(admin::cohort));
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .nest("/api", api.nest("/admin", admin))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the data directory and serves until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let addr = config.listen.clone();
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr: addr.clone(), source })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

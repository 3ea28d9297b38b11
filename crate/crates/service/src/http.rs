//! JSON API and progress streams.

use std::convert::Infallible;
use std::time::UNIX_EPOCH;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pmax_agents::{run_turn, ProgressEvent};
use pmax_core::artifacts::{ArtifactError, ArtifactMeta, ExportFormat};
use pmax_core::event_log::{extract_abstraction, AbstractionOptions, LogError, RoleHints};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::logs::{parse_log, LogFormat};
use crate::session::{AppState, Busy, Session, SessionSpec};

const MAX_UPLOAD: usize = 256 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": code, "message": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body[key] = value.into();
        self
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id}"))
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "query_in_flight", "a query is already running for this session")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.into_inner().to_string()).with("path", path)
    })
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/log", post(upload_log))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/artifacts", get(list_artifacts))
        .route("/sessions/{id}/artifacts/{aid}", get(export_artifact))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(app)
}

fn session(app: &AppState, id: &str) -> ApiResult<std::sync::Arc<Session>> {
    app.get(id).ok_or_else(|| ApiError::not_found("session", id))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let spec: SessionSpec = parse_body(&body)?;
    spec.validate()
        .map_err(|(path, msg)| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", msg).with("path", path))?;
    let s = app
        .create(spec)
        .map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, "invalid_provider", m).with("path", "provider"))?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": s.id }))))
}

async fn session_info(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&app, &id)?;
    let created = s.created.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(Json(json!({
        "session_id": s.id,
        "created": created,
        "has_log": s.has_log(),
        "busy": s.is_busy(),
        "abstraction": s.abstraction(),
        "artifacts": s.with_snapshot(|st| st.len()),
    })))
}

fn log_error(e: LogError) -> ApiError {
    let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "log_parse_failed", e.to_string());
    if let LogError::MalformedDocument { line, column, .. } = e {
        err = err.with("line", line).with("column", column);
    }
    err
}

async fn upload_log(State(app): State<AppState>, Path(id): Path<String>, mut form: Multipart) -> ApiResult<Json<Value>> {
    let s = session(&app, &id)?;
    let mut content: Option<(Option<String>, Bytes)> = None;
    let mut format = None;
    let mut hints = RoleHints::default();
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_upload", m);
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let data = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        let text = || String::from_utf8_lossy(&data).trim().to_string();
        match name.as_str() {
            "file" | "log" => content = Some((file_name, data.clone())),
            "format" => format = Some(LogFormat::parse(&text()).ok_or_else(|| bad(format!("unknown format {}", text())))?),
            "case_id" => hints.case_id = Some(text()),
            "activity" => hints.activity = Some(text()),
            "timestamp" => hints.timestamp = Some(text()),
            "resource" => hints.resource = Some(text()),
            other => return Err(bad(format!("unexpected field {other}"))),
        }
    }
    let (file_name, data) = content.ok_or_else(|| bad("missing file field".into()))?;
    let format = format.unwrap_or_else(|| LogFormat::from_name(file_name.as_deref().unwrap_or("")));
    let guard = s.try_begin().ok_or_else(ApiError::busy)?;
    let parsed = tokio::task::spawn_blocking(move || {
        let text = String::from_utf8(data.to_vec()).map_err(|e| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "log_parse_failed", format!("log is not UTF-8: {e}"))
        })?;
        let log = parse_log(&text, format, &hints).map_err(log_error)?;
        let abstraction = extract_abstraction(&log, &AbstractionOptions::default());
        Ok::<_, ApiError>((log, abstraction))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let (log, abstraction) = parsed;
    s.install(log, abstraction.clone(), &guard);
    Ok(Json(json!({ "session_id": s.id, "abstraction": abstraction })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    question: String,
}

fn sse_event(e: &ProgressEvent) -> Event {
    Event::default()
        .event(e.kind.as_str())
        .data(serde_json::to_string(e).expect("event serializes"))
}

async fn query(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let s = session(&app, &id)?;
    let q: QueryBody = parse_body(&body)?;
    if q.question.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "question must not be empty").with("path", "question"));
    }
    let guard = s.try_begin().ok_or_else(ApiError::busy)?;
    let mut work = s.take_work(&guard).map_err(|b| match b {
        Busy::NoLog => ApiError::new(StatusCode::CONFLICT, "no_log", "upload a log before querying"),
        Busy::QueryInFlight => ApiError::busy(),
    })?;
    let (tx, rx) = tokio::sync::mpsc::unbounded_channel::<ProgressEvent>();
    let sess = std::sync::Arc::clone(&s);
    tokio::task::spawn_blocking(move || {
        let mut held = Vec::new();
        let options = sess.spec.options();
        let _ = run_turn(
            &mut work.state,
            &q.question,
            sess.provider.as_ref(),
            &options,
            &mut work.env,
            &mut |e| {
                if e.kind.is_terminal() {
                    held.push(e);
                } else {
                    let _ = tx.send(e);
                }
            },
        );
        // artifacts become visible before the stream announces the report
        sess.restore(work, &guard);
        drop(guard);
        sess.touch();
        for e in held {
            let _ = tx.send(e);
        }
    });
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|e| (Ok::<_, Infallible>(sse_event(&e)), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response())
}

async fn list_artifacts(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<ArtifactMeta>>> {
    let s = session(&app, &id)?;
    Ok(Json(s.with_snapshot(|st| st.all().map(|a| a.meta()).collect())))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_artifact(
    State(app): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let s = session(&app, &id)?;
    s.with_snapshot(|st| {
        let a = st.get(&aid).ok_or_else(|| ApiError::not_found("artifact", &aid))?;
        let format = match &q.format {
            None => ExportFormat::native(a.kind()),
            Some(f) => ExportFormat::parse(f).ok_or_else(|| {
                ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_format", format!("unknown format {f}"))
            })?,
        };
        let bytes = st.export(&aid, format).map_err(|e| match e {
            ArtifactError::UnsupportedFormat { .. } => {
                ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_format", e.to_string())
            }
            ArtifactError::UnknownArtifact(_) => ApiError::not_found("artifact", &aid),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        })?;
        Ok(([(header::CONTENT_TYPE, format.media_type())], bytes).into_response())
    })
}

/// Serves until the process ends, evicting idle sessions once a minute.
pub async fn serve(listener: tokio::net::TcpListener, app: AppState) -> std::io::Result<()> {
    let evictor = app.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(std::time::Duration::from_secs(60));
        loop {
            tick.tick().await;
            evictor.evict_idle();
        }
    });
    axum::serve(listener, router(app)).await
}

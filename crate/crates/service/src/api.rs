use std::sync::Arc;

use atlaspaint_core::config::{resolve, ConfigLayer, Diagnostic};
use atlaspaint_core::render::NamedView;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::jobs::{JobPlan, JobStatus, Mode, SubmitError};
use crate::{AppState, ServiceError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitBody {
    #[serde(default = "empty_object")]
    pub config: serde_json::Value,
    pub csv: String,
    #[serde(default)]
    pub mode: Mode,
    /// View to animate in `animation` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
}

fn empty_object() -> serde_json::Value {
    json!({})
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtlasInfo {
    pub atlas_id: String,
    pub views_supported: Vec<String>,
    pub regions: usize,
}

pub(crate) fn router(state: Arc<AppState>) -> Result<Router, ServiceError> {
    // JSON escaping can grow the CSV; leave room beyond the CSV cap so the
    // cap itself is what produces 413 for oversized CSVs.
    let body_limit = state.options.csv_cap.saturating_mul(2).saturating_add(64 * 1024);
    let cors = match state.options.cors_origin.as_deref() {
        None => None,
        Some("*") => Some(CorsLayer::new().allow_origin(Any)),
        Some(origin) => Some(
            CorsLayer::new().allow_origin(
                origin
                    .parse::<HeaderValue>()
                    .map_err(|_| ServiceError::BadOrigin(origin.to_owned()))?,
            ),
        ),
    }
    .map(|c| c.allow_methods([Method::GET, Method::POST]).allow_headers([header::CONTENT_TYPE]));

    let api = Router::new()
        .route("/api/v1/jobs", post(submit))
        .route("/api/v1/jobs/{id}", get(job_status))
        .route("/api/v1/jobs/{id}/images/{name}", get(job_image))
        .route("/api/v1/atlases", get(atlases))
        .layer(DefaultBodyLimit::max(body_limit));
    let app = match &state.options.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)),
    }
    .with_state(state);
    Ok(match cors {
        Some(c) => app.layer(c),
        None => app,
    })
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn invalid(diagnostics: Vec<Diagnostic>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "error": "validation failed", "diagnostics": diagnostics })),
    )
        .into_response()
}

/// Synchronous validation, then enqueue.
async fn submit(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let body: SubmitBody = match serde_path_to_error::deserialize(de) {
        Ok(b) => b,
        Err(e) => {
            let key = e.path().to_string();
            return invalid(vec![Diagnostic::new(
                if key == "." { "body".into() } else { key },
                e.into_inner().to_string(),
            )]);
        }
    };
    if body.csv.len() > state.options.csv_cap {
        return error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("csv is {} bytes; the limit is {}", body.csv.len(), state.options.csv_cap),
        );
    }
    let plan = match validate(&state, body) {
        Ok(p) => p,
        Err(diags) => return invalid(diags),
    };
    let jobs = Arc::clone(&state.jobs);
    match jobs.submit(plan) {
        Ok(job_id) => (StatusCode::CREATED, Json(SubmitResponse { job_id })).into_response(),
        Err(e @ SubmitError::QueueFull(_)) => error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn validate(state: &AppState, body: SubmitBody) -> Result<JobPlan, Vec<Diagnostic>> {
    let layer = ConfigLayer::from_value(body.config).map_err(|e| e.diagnostics)?;
    let mut diags = Vec::new();
    for (key, set) in [("input_csv", layer.input_csv.is_some()), ("out_dir", layer.out_dir.is_some())] {
        if set {
            diags.push(Diagnostic::new(key, "file paths are not accepted by the service"));
        }
    }
    let atlas = match layer.atlas.as_ref().map(|p| p.to_string_lossy().into_owned()) {
        Some(id) => state.atlases.get(&id).cloned().ok_or_else(|| {
            Diagnostic::new(
                "atlas",
                format!(
                    "unknown atlas `{id}`; registered: {}",
                    state.atlases.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            )
        }),
        None if state.atlases.len() == 1 => Ok(Arc::clone(state.atlases.values().next().unwrap())),
        None => Err(Diagnostic::new("atlas", "required when more than one atlas is registered")),
    };
    let view = match body.view.as_deref().map(str::parse::<NamedView>) {
        None => None,
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            diags.push(Diagnostic::new("view", e.to_string()));
            None
        }
    };
    let config = resolve(ConfigLayer {
        input_csv: None,
        out_dir: None,
        ..layer
    });
    let (atlas, config) = match (atlas, config) {
        (Ok(a), Ok(c)) if diags.is_empty() => (a, c),
        (a, c) => {
            diags.extend(a.err());
            diags.extend(c.err().into_iter().flat_map(|e| e.diagnostics));
            return Err(diags);
        }
    };
    if let Err(e) = config.check_against(&atlas.manifest) {
        diags.extend(e.diagnostics);
    }
    if let Some(v) = view {
        if v.is_inner() && atlas.manifest.hollow {
            diags.push(Diagnostic::new(
                "view",
                format!("view `{}` is not supported by hollow atlas `{}`", v.name(), atlas.manifest.atlas_id),
            ));
        }
    }
    let table = config.parse_table(&atlas.manifest, &body.csv).map_err(|e| {
        e.diagnostics
            .into_iter()
            .map(|d| Diagnostic {
                key: if d.key == "input_csv" { "csv".into() } else { d.key },
                ..d
            })
            .collect::<Vec<_>>()
    });
    let table = match table {
        Ok(t) => t,
        Err(d) => {
            diags.extend(d);
            return Err(diags);
        }
    };
    if body.mode == Mode::Animation && table.stages.len() < 2 {
        diags.push(Diagnostic::new("csv", "animation needs at least 2 stages"));
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(JobPlan {
        config,
        table,
        atlas,
        mode: body.mode,
        view,
    })
}

async fn job_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.jobs.registry.get(&id) {
        Some(record) => Json(record).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown job `{id}`")),
    }
}

/// Names are looked up in the job's image list, never resolved as paths.
async fn job_image(State(state): State<Arc<AppState>>, Path((id, name)): Path<(String, String)>) -> Response {
    let Some((record, dir)) = state.jobs.registry.get_with_dir(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown job `{id}`"));
    };
    if record.status != JobStatus::Done {
        return error(
            StatusCode::CONFLICT,
            format!("job `{id}` is {}", serde_json::to_value(record.status).unwrap()),
        );
    }
    let Some(listed) = record.images.iter().find(|n| **n == name) else {
        return error(StatusCode::NOT_FOUND, "no such image");
    };
    let content_type = if listed.ends_with(".gif") { "image/gif" } else { "image/png" };
    match tokio::fs::read(dir.join(listed)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type)], bytes).into_response(),
        Err(e) => error(StatusCode::GONE, format!("image no longer available: {e}")),
    }
}

async fn atlases(State(state): State<Arc<AppState>>) -> Json<Vec<AtlasInfo>> {
    Json(
        state
            .atlases
            .values()
            .map(|a| AtlasInfo {
                atlas_id: a.manifest.atlas_id.clone(),
                views_supported: a.views_supported().iter().map(|v| v.name().to_owned()).collect(),
                regions: a.manifest.regions.len(),
            })
            .collect(),
    )
}

async fn index() -> Html<&'static str> {
    Html(concat!(
        "<!doctype html><meta charset=utf-8><title>atlaspaint</title>",
        "<h1>atlaspaint</h1><p>No UI directory is configured (<code>--ui DIR</code>). ",
        "The API lives under <code>/api/v1/</code>: ",
        "<a href=\"/api/v1/atlases\">atlases</a>, <code>POST /api/v1/jobs</code>.</p>\n"
    ))
}

//! JSON API over an immutable [`PublishedModel`].
//!
//! | route | body | success |
//! |---|---|---|
//! | `GET /health` | | `{"status":"ok","model_version":..}` |
//! | `GET /v1/model` | | the model artifact, with a content-hash `ETag` |
//! | `POST /v1/score` | profile | `RiskBreakdown` |
//! | `POST /v1/whatif` | `{base, modifications, allow_non_modifiable?}` | `{before, after, delta}` |
//!
//! Malformed bodies, unknown or missing fields get 400 with per-field
//! messages, out-of-range values 422, non-modifiable what-if changes 409 and
//! bodies that are not `application/json` 415. Success bodies are exactly the
//! bytes `serde_json::to_vec` produces for the library result.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::header::{CACHE_CONTROL, CONTENT_TYPE, ETAG, IF_NONE_MATCH};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use t2drisk::engine::{ProfileInput, PublishedModel};
use t2drisk::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Origins allowed by CORS; `*` allows any. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
    /// Log method, path, status and latency per request. Bodies are never logged.
    pub access_log: bool,
}

#[derive(Clone)]
pub struct AppState {
    model: Arc<PublishedModel>,
    artifact: Bytes,
    etag: HeaderValue,
}

impl AppState {
    pub fn new(model: PublishedModel) -> Result<Self, Error> {
        let artifact = model.to_json()?;
        Self::from_artifact(artifact.into_bytes())
    }

    /// Parses and validates an artifact; `/v1/model` then serves these exact bytes.
    pub fn from_artifact(bytes: Vec<u8>) -> Result<Self, Error> {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format(format!("artifact is not UTF-8: {e}")))?;
        let model = PublishedModel::from_json(text)?;
        let artifact = Bytes::from(bytes);
        let digest = Sha256::digest(&artifact);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let etag = HeaderValue::from_str(&format!("\"sha256-{hex}\"")).expect("hex is a valid header value");
        Ok(AppState { model: Arc::new(model), artifact, etag })
    }

    pub fn model(&self) -> &PublishedModel {
        &self.model
    }

    pub fn etag(&self) -> &str {
        self.etag.to_str().expect("ascii")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub base: ProfileInput,
    #[serde(default)]
    pub modifications: ProfileInput,
    /// Permit changes to fields not flagged modifiable.
    #[serde(default)]
    pub allow_non_modifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>, fields: Vec<FieldError>) -> Self {
        ApiError { status, body: ErrorBody { error: error.into(), message: message.into(), fields } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, serde_json::to_vec(&self.body).expect("error body serializes"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingFields(names) => {
                let fields = names.into_iter().map(|field| FieldError { field, message: "required".into() }).collect();
                ApiError::new(StatusCode::BAD_REQUEST, "missing_fields", "required fields are missing", fields)
            }
            Error::OutOfRange { field, message } => {
                let text = format!("{field}: {message}");
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "out_of_range", text, vec![FieldError { field, message }])
            }
            Error::NotModifiable(field) => ApiError::new(
                StatusCode::CONFLICT,
                "not_modifiable",
                format!("{field} is not a modifiable factor"),
                vec![FieldError { field, message: "not modifiable".into() }],
            ),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string(), vec![]),
        }
    }
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json"))
}

/// Strict JSON body parsing with the offending path in the error.
fn parse_body<T: DeserializeOwned>(headers: &HeaderMap, body: &[u8]) -> Result<T, ApiError> {
    if !is_json(headers) {
        return Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            "request body must be application/json",
            vec![],
        ));
    }
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        // the path already ends in the offending key, unknown keys included
        let field = e.path().to_string();
        let message = e.into_inner().to_string();
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", "request body does not match the schema", vec![
            FieldError { field, message },
        ])
    })
}

async fn health(State(s): State<AppState>) -> Response {
    let body = Health { status: "ok".into(), model_version: s.model.model_version.clone() };
    json_response(StatusCode::OK, serde_json::to_vec(&body).expect("serializes"))
}

async fn model(State(s): State<AppState>, headers: HeaderMap) -> Response {
    let cache = [(ETAG, s.etag.clone()), (CACHE_CONTROL, HeaderValue::from_static("no-cache"))];
    if headers.get(IF_NONE_MATCH).is_some_and(|v| v.as_bytes().split(|b| *b == b',').any(|t| t.trim_ascii() == s.etag.as_bytes())) {
        return (StatusCode::NOT_MODIFIED, cache).into_response();
    }
    let mut r = json_response(StatusCode::OK, s.artifact.to_vec());
    r.headers_mut().extend(cache);
    r
}

async fn score(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let profile: ProfileInput = parse_body(&headers, &body)?;
    let breakdown = s.model.score_profile(&profile)?;
    Ok(json_response(StatusCode::OK, serde_json::to_vec(&breakdown).expect("serializes")))
}

async fn whatif(State(s): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let req: WhatIfRequest = parse_body(&headers, &body)?;
    let base = req.base.to_record()?;
    let result = s.model.whatif(&base, &req.modifications, req.allow_non_modifiable)?;
    Ok(json_response(StatusCode::OK, serde_json::to_vec(&result).expect("serializes")))
}

async fn access_log(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_owned());
    let start = Instant::now();
    let res = next.run(req).await;
    tracing::info!(%method, %path, status = res.status().as_u16(), micros = start.elapsed().as_micros() as u64, "request");
    res
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/v1/model", get(model))
        .route("/v1/score", post(score))
        .route("/v1/whatif", post(whatif))
        .with_state(state);
    if !config.cors_origins.is_empty() {
        let origins = if config.cors_origins.iter().any(|o| o == "*") {
            AllowOrigin::from(Any)
        } else {
            AllowOrigin::list(config.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
        };
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origins)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([CONTENT_TYPE, IF_NONE_MATCH])
                .expose_headers([ETAG]),
        );
    }
    if config.access_log {
        app = app.layer(middleware::from_fn(access_log));
    }
    app
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState, config: &ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state, config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

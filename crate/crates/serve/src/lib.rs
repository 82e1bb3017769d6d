//! HTTP scoring service for a loaded model artifact.
//!
//! Endpoints: `POST /v1/score`, `GET /v1/model`, `GET /v1/health`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use serde_json::{Map, Value};
use tower_http::cors::CorsLayer;

use pqscreen::cohort::{FeatureVector, FEATURE_NAMES, N_PQ, PQ_ITEMS, PQ_TITLES, SEVERITY_CAPTIONS};
use pqscreen::learn::{Contribution, Model, ModelArtifact, SCHEMA_VERSION};

pub const DEFAULT_PORT: u16 = 8471;
pub const AGE_LIMIT: f64 = 130.0;

#[derive(Debug)]
pub enum ServeError {
    Artifact(String),
    Bind(String),
    Io(std::io::Error),
}

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServeError::Artifact(m) => write!(f, "artifact: {m}"),
            ServeError::Bind(m) => write!(f, "bind: {m}"),
            ServeError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl std::error::Error for ServeError {}

impl ServeError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServeError::Artifact(_) => "artifact",
            ServeError::Bind(_) => "bind",
            ServeError::Io(_) => "io",
        }
    }
}

/// Immutable service state.
#[derive(Debug)]
pub struct AppState {
    artifact: ModelArtifact,
    model_info: Value,
}

impl AppState {
    /// Checks that the artifact validates and takes the 22 canonical inputs.
    pub fn new(artifact: ModelArtifact) -> Result<Self, ServeError> {
        artifact.validate().map_err(|e| ServeError::Artifact(e.to_string()))?;
        if artifact.feature_names.iter().map(String::as_str).ne(FEATURE_NAMES.iter().copied()) {
            return Err(ServeError::Artifact(
                "artifact inputs are not the canonical questionnaire features".into(),
            ));
        }
        let model_info = model_info(&artifact);
        Ok(AppState { artifact, model_info })
    }

    pub fn artifact(&self) -> &ModelArtifact {
        &self.artifact
    }
}

fn model_info(a: &ModelArtifact) -> Value {
    let mut m = Map::new();
    m.insert("model_id".into(), a.model_id.clone().into());
    m.insert("schema_version".into(), a.schema_version.into());
    m.insert("toolkit_version".into(), a.toolkit_version.clone().into());
    m.insert("model_type".into(), a.model.kind().name().into());
    m.insert("feature_names".into(), serde_json::to_value(&a.feature_names).unwrap());
    m.insert("model_inputs".into(), serde_json::to_value(a.model_input_names()).unwrap());
    let items: Vec<Value> = PQ_ITEMS
        .iter()
        .zip(PQ_TITLES)
        .map(|(name, title)| serde_json::json!({ "name": name, "title": title }))
        .collect();
    m.insert("pq_items".into(), Value::Array(items));
    m.insert("severity_captions".into(), serde_json::to_value(SEVERITY_CAPTIONS).unwrap());
    m.insert("threshold".into(), a.model.threshold().into());
    if let Model::Logistic(l) = &a.model {
        m.insert("intercept".into(), l.intercept.into());
        let coefs: Map<String, Value> = a
            .model_input_names()
            .into_iter()
            .zip(&l.coefficients)
            .map(|(n, c)| (n, Value::from(*c)))
            .collect();
        m.insert("coefficients".into(), Value::Object(coefs));
    }
    m.insert(
        "training".into(),
        serde_json::to_value(&a.training).unwrap_or(Value::Null),
    );
    Value::Object(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    fields: Vec<FieldError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreResponse {
    pub model_id: String,
    pub schema_version: u32,
    pub model_type: &'static str,
    pub probability: f64,
    /// Raw model score compared against `threshold`.
    pub score: f64,
    pub threshold: f64,
    pub predicted: &'static str,
    /// `f(x)` for linear models, null otherwise.
    pub linear_score: Option<f64>,
    pub intercept: Option<f64>,
    pub contributions: Vec<Contribution>,
}

/// Validates a request body, collecting every field-level problem.
pub fn parse_request(body: &Value) -> Result<FeatureVector, Vec<FieldError>> {
    let mut errors = Vec::new();
    let Some(obj) = body.as_object() else {
        return Err(vec![FieldError::new("body", "expected a JSON object")]);
    };
    for key in obj.keys() {
        if !matches!(key.as_str(), "features" | "age" | "gender") {
            errors.push(FieldError::new(key.clone(), "unknown field"));
        }
    }
    let mut pq = [0u8; N_PQ];
    match obj.get("features") {
        None => errors.push(FieldError::new("features", "missing")),
        Some(Value::Object(items)) => {
            for key in items.keys() {
                if !PQ_ITEMS.contains(&key.as_str()) {
                    errors.push(FieldError::new(format!("features.{key}"), "unknown item"));
                }
            }
            for (j, name) in PQ_ITEMS.iter().enumerate() {
                let field = format!("features.{name}");
                match items.get(*name) {
                    None => errors.push(FieldError::new(field, "missing")),
                    Some(v) => match v.as_u64() {
                        Some(s) if s <= 4 => pq[j] = s as u8,
                        Some(s) => errors.push(FieldError::new(field, format!("severity {s} outside 0..4"))),
                        None => match v.as_f64() {
                            Some(x) => errors.push(FieldError::new(field, format!("severity {x} outside 0..4"))),
                            None => errors.push(FieldError::new(field, "expected an integer 0..4")),
                        },
                    },
                }
            }
        }
        Some(_) => errors.push(FieldError::new("features", "expected an object of item severities")),
    }
    let age = match obj.get("age") {
        None => {
            errors.push(FieldError::new("age", "missing"));
            0.0
        }
        Some(v) => match v.as_f64() {
            Some(a) if (0.0..=AGE_LIMIT).contains(&a) => a,
            Some(a) => {
                errors.push(FieldError::new("age", format!("age {a} outside 0..{AGE_LIMIT}")));
                0.0
            }
            None => {
                errors.push(FieldError::new("age", "expected a number"));
                0.0
            }
        },
    };
    let gender = match obj.get("gender") {
        None => {
            errors.push(FieldError::new("gender", "missing"));
            0
        }
        Some(v) => match v.as_u64() {
            Some(g) if g <= 1 => g as u8,
            _ => {
                errors.push(FieldError::new("gender", "expected 0 or 1"));
                0
            }
        },
    };
    if !errors.is_empty() {
        return Err(errors);
    }
    FeatureVector::new(pq, age, gender).map_err(|e| vec![FieldError::new("body", e.to_string())])
}

pub fn score(artifact: &ModelArtifact, features: &FeatureVector) -> pqscreen::Result<ScoreResponse> {
    let s = artifact.score_features(features)?;
    Ok(ScoreResponse {
        model_id: artifact.model_id.clone(),
        schema_version: artifact.schema_version,
        model_type: artifact.model.kind().name(),
        probability: s.probability,
        score: s.score,
        threshold: artifact.model.threshold(),
        predicted: s.predicted.name(),
        linear_score: s.linear_score,
        intercept: s.intercept,
        contributions: s.contributions,
    })
}

fn json_response(status: StatusCode, body: &impl Serialize) -> Response {
    let text = serde_json::to_string(body).expect("serializable response");
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn validation_error(status: StatusCode, error: &'static str, fields: Vec<FieldError>) -> Response {
    json_response(status, &ErrorBody { error, fields })
}

async fn score_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            return validation_error(
                StatusCode::BAD_REQUEST,
                "malformed_json",
                vec![FieldError::new("body", e.to_string())],
            )
        }
    };
    let features = match parse_request(&value) {
        Ok(f) => f,
        Err(fields) => return validation_error(StatusCode::UNPROCESSABLE_ENTITY, "validation", fields),
    };
    match score(&state.artifact, &features) {
        Ok(r) => json_response(StatusCode::OK, &r),
        Err(e) => validation_error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "scoring",
            vec![FieldError::new("model", e.to_string())],
        ),
    }
}

async fn model_handler(State(state): State<Arc<AppState>>) -> Response {
    json_response(StatusCode::OK, &state.model_info)
}

async fn health_handler(State(state): State<Arc<AppState>>) -> Response {
    json_response(
        StatusCode::OK,
        &serde_json::json!({
            "status": "ok",
            "model_id": state.artifact.model_id,
            "schema_version": SCHEMA_VERSION,
            "toolkit_version": pqscreen::VERSION,
        }),
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/score", post(score_handler))
        .route("/v1/model", get(model_handler))
        .route("/v1/health", get(health_handler))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn run(artifact: ModelArtifact, addr: SocketAddr) -> Result<(), ServeError> {
    let state = Arc::new(AppState::new(artifact)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServeError::Bind(format!("{addr}: {e}")))?;
    log::info!("serving {} on http://{addr}", state.artifact.model_id);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Io)
}

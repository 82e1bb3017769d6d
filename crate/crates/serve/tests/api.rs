use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use pqscreen::cohort::PQ_ITEMS;
use pqscreen::learn::ModelArtifact;
use pqscreen_serve::{router, AppState};

fn app() -> axum::Router {
    router(Arc::new(AppState::new(ModelArtifact::paper_eq1()).unwrap()))
}

fn request(items: &[(&str, u64)], age: f64, gender: u64) -> Value {
    let mut features = serde_json::Map::new();
    for name in PQ_ITEMS {
        let v = items.iter().find(|(n, _)| *n == name).map_or(0, |(_, v)| *v);
        features.insert(name.to_string(), v.into());
    }
    json!({ "features": features, "age": age, "gender": gender })
}

async fn send(app: axum::Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn post_score(body: &Value) -> (StatusCode, Value) {
    let (s, b) = send(app(), "POST", "/v1/score", Some(body.to_string())).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn all_zero_request_matches_intercept_case() {
    let (status, body) = post_score(&request(&[], 0.0, 0)).await;
    assert_eq!(status, StatusCode::OK);
    let p = body["probability"].as_f64().unwrap();
    let expected = 1.0 / (1.0 + (-0.54813f64).exp());
    assert!((p - expected).abs() < 1e-12);
    assert!((p - 0.6337).abs() < 1e-4);
    assert_eq!(body["model_id"], "paper-eq1");
    assert_eq!(body["schema_version"], 1);
    assert_eq!(body["linear_score"].as_f64().unwrap(), 0.54813);
}

#[tokio::test]
async fn contributions_sum_to_linear_score_minus_intercept() {
    let (status, body) = post_score(&request(&[("P2_TRMR", 4), ("P2_EAT", 2), ("P1_PAIN", 3)], 66.0, 1)).await;
    assert_eq!(status, StatusCode::OK);
    let sum: f64 = body["contributions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["contribution"].as_f64().unwrap())
        .sum();
    let f = body["linear_score"].as_f64().unwrap();
    let b0 = body["intercept"].as_f64().unwrap();
    assert!((sum - (f - b0)).abs() < 1e-9);
    assert_eq!(body["contributions"].as_array().unwrap().len(), 22);
}

#[tokio::test]
async fn tremor_case() {
    let (_, body) = post_score(&request(&[("P2_TRMR", 4)], 66.0, 1)).await;
    assert!(body["probability"].as_f64().unwrap() > 0.9999);
    assert!((body["linear_score"].as_f64().unwrap() - 15.494).abs() < 1e-3);
    assert_eq!(body["predicted"], "EarlyPD");
}

#[tokio::test]
async fn missing_item_is_named() {
    let mut body = request(&[], 60.0, 0);
    body["features"].as_object_mut().unwrap().remove("P2_FREZ");
    let (status, err) = post_score(&body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "validation");
    let fields = err["fields"].as_array().unwrap();
    assert_eq!(fields.len(), 1);
    assert_eq!(fields[0]["field"], "features.P2_FREZ");
    assert_eq!(fields[0]["message"], "missing");
}

#[tokio::test]
async fn range_errors_are_field_level() {
    let (status, err) = post_score(&request(&[("P1_PAIN", 7)], 60.0, 0)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["fields"][0]["field"], "features.P1_PAIN");

    let (status, err) = post_score(&request(&[], -1.0, 2)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let fields: Vec<&str> = err["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert_eq!(fields, ["age", "gender"]);

    let mut body = request(&[], 60.0, 0);
    body["features"]["P2_WALK"] = json!(1.5);
    let (status, _) = post_score(&body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_keys_rejected() {
    let mut body = request(&[], 60.0, 0);
    body["features"]["P2_DANCE"] = json!(1);
    body["height"] = json!(170);
    let (status, err) = post_score(&body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let fields: Vec<&str> = err["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"height"));
    assert!(fields.contains(&"features.P2_DANCE"));
}

#[tokio::test]
async fn malformed_json_is_400() {
    let (status, _) = send(app(), "POST", "/v1/score", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let body = request(&[("P2_HWRT", 2), ("P1_FATG", 1)], 71.3, 1).to_string();
    let (_, a) = send(app(), "POST", "/v1/score", Some(body.clone())).await;
    let shared = app();
    let (_, b) = send(shared.clone(), "POST", "/v1/score", Some(body.clone())).await;
    let (_, c) = send(shared, "POST", "/v1/score", Some(body)).await;
    assert_eq!(a, b);
    assert_eq!(b, c);
}

#[tokio::test]
async fn model_and_health() {
    let (status, body) = send(app(), "GET", "/v1/model", None).await;
    assert_eq!(status, StatusCode::OK);
    let m: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(m["model_id"], "paper-eq1");
    assert_eq!(m["model_type"], "logistic");
    assert_eq!(m["feature_names"].as_array().unwrap().len(), 22);
    assert_eq!(m["pq_items"].as_array().unwrap().len(), 20);
    assert_eq!(m["intercept"].as_f64().unwrap(), 0.54813);
    assert_eq!(m["coefficients"]["P2_TRMR"].as_f64().unwrap(), 4.3677);

    let (status, body) = send(app(), "GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    let h: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(h["status"], "ok");
}

#[tokio::test]
async fn cors_preflight_allowed() {
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/v1/score")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app().oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn non_canonical_artifact_rejected() {
    let mut a = ModelArtifact::paper_eq1();
    a.feature_names.swap(0, 1);
    assert!(AppState::new(a).is_err());
}

#[tokio::test]
async fn bound_port_is_reported() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let err = pqscreen_serve::run(ModelArtifact::paper_eq1(), addr).await.unwrap_err();
    assert_eq!(err.kind(), "bind");
}

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use t2drisk::cohort::SubjectRecord;
use t2drisk::engine::{ProfileInput, PublishedModel};
use t2drisk_service::{router, AppState, ErrorBody, ServiceConfig};
use tower::ServiceExt;

const ARTIFACT: &str = include_str!("../../../models/published-model.json");

fn model() -> PublishedModel {
    PublishedModel::from_json(ARTIFACT).unwrap()
}

fn app() -> Router {
    app_with(&ServiceConfig::default())
}

fn app_with(config: &ServiceConfig) -> Router {
    router(AppState::from_artifact(ARTIFACT.as_bytes().to_vec()).unwrap(), config)
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }

    fn error(&self) -> ErrorBody {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn post(app: &Router, path: &str, body: impl Into<Body>) -> Reply {
    let req = Request::post(path).header(header::CONTENT_TYPE, "application/json").body(body.into()).unwrap();
    send(app, req).await
}

async fn get(app: &Router, path: &str) -> Reply {
    send(app, Request::get(path).body(Body::empty()).unwrap()).await
}

/// Record whose continuous values sit at the model centers, all indicators off.
fn reference_record(m: &PublishedModel) -> SubjectRecord {
    let center = |name: &str| m.terms.iter().find(|t| t.name == name).unwrap().center;
    SubjectRecord::reference(center("age").round() as u32, center("waist_hip_ratio"), center("bmi"), 0.0)
}

fn profile_json(r: &SubjectRecord) -> Value {
    serde_json::to_value(ProfileInput::from(r)).unwrap()
}

fn golden(name: &str, body: &[u8]) {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, body).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{path}: {e}; rerun with UPDATE_GOLDEN=1"));
    assert!(expected == body, "{name} differs from golden file");
}

#[tokio::test]
async fn health_reports_model_version() {
    let r = get(&app(), "/health").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), json!({"status": "ok", "model_version": model().model_version}));
}

#[tokio::test]
async fn model_is_served_verbatim_with_content_etag() {
    let r = get(&app(), "/v1/model").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, ARTIFACT.as_bytes());
    let hex: String = Sha256::digest(ARTIFACT.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(r.headers[header::ETAG], format!("\"sha256-{hex}\"").as_str());
    let v = r.json();
    assert_eq!(v["terms"].as_array().unwrap().len(), 19);
    let asian = v["terms"].as_array().unwrap().iter().find(|t| t["name"] == "ethnicity_asian").unwrap();
    assert_eq!(asian["coefficient"], json!(0.844));
}

#[tokio::test]
async fn etag_is_stable_across_restarts_and_honours_if_none_match() {
    let first = get(&app(), "/v1/model").await;
    let second = get(&app(), "/v1/model").await;
    let etag = first.headers[header::ETAG].clone();
    assert_eq!(etag, second.headers[header::ETAG]);
    let req = Request::get("/v1/model").header(header::IF_NONE_MATCH, etag.clone()).body(Body::empty()).unwrap();
    let r = send(&app(), req).await;
    assert_eq!(r.status, StatusCode::NOT_MODIFIED);
    assert!(r.body.is_empty());
    let req = Request::get("/v1/model").header(header::IF_NONE_MATCH, "\"other\"").body(Body::empty()).unwrap();
    assert_eq!(send(&app(), req).await.status, StatusCode::OK);
}

#[tokio::test]
async fn score_matches_library_bytes_and_golden() {
    let m = model();
    let rec = reference_record(&m);
    let r = post(&app(), "/v1/score", profile_json(&rec).to_string()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/json");
    assert_eq!(r.body, serde_json::to_vec(&m.score(&rec).unwrap()).unwrap());
    golden("score_reference.json", &r.body);
    let v = r.json();
    assert!((v["total_risk"].as_f64().unwrap() - (1.0 - m.baseline_survival)).abs() < 1e-12);
    assert!(v["disclaimer"].as_str().unwrap().contains("Not a diagnosis"));
    assert_eq!(v["model_version"], json!(m.model_version));
}

#[tokio::test]
async fn diabetes_mother_multiplies_hazard() {
    let m = model();
    let mut rec = reference_record(&m);
    let app = app();
    let off = post(&app, "/v1/score", profile_json(&rec).to_string()).await.json();
    rec.diabetes_mother = true;
    let on = post(&app, "/v1/score", profile_json(&rec).to_string()).await.json();
    let cumhaz = |v: &Value| -(1.0 - v["total_risk"].as_f64().unwrap()).ln();
    assert!((cumhaz(&on) / cumhaz(&off) - 0.489f64.exp()).abs() < 1e-9);
}

#[tokio::test]
async fn duplicate_requests_give_identical_bodies() {
    let rec = reference_record(&model());
    let body = profile_json(&rec).to_string();
    let app = app();
    let a = post(&app, "/v1/score", body.clone()).await;
    let b = post(&app, "/v1/score", body).await;
    assert_eq!(a.body, b.body);
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let rec = reference_record(&model());
    let body = profile_json(&rec).to_string();
    let app = app();
    let handles: Vec<_> = (0..32)
        .map(|_| {
            let (app, body) = (app.clone(), body.clone());
            tokio::spawn(async move { post(&app, "/v1/score", body).await.body })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        bodies.push(h.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn unknown_field_is_rejected_by_name() {
    let mut v = profile_json(&reference_record(&model()));
    v["favourite_colour"] = json!("blue");
    let r = post(&app(), "/v1/score", v.to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let e = r.error();
    assert_eq!(e.fields[0].field, "favourite_colour");
}

#[tokio::test]
async fn missing_fields_are_listed() {
    let r = post(&app(), "/v1/score", json!({"age": 60, "bmi": 27.0}).to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let e = r.error();
    assert_eq!(e.error, "missing_fields");
    let names: Vec<&str> = e.fields.iter().map(|f| f.field.as_str()).collect();
    assert!(names.contains(&"waist_hip_ratio") && names.contains(&"good_health"));
    assert!(!names.contains(&"age") && !names.contains(&"previous_smoker"));
}

#[tokio::test]
async fn wrong_type_names_the_field() {
    let mut v = profile_json(&reference_record(&model()));
    v["degree"] = json!("yes");
    let r = post(&app(), "/v1/score", v.to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error().fields[0].field, "degree");
}

#[tokio::test]
async fn malformed_json_is_400() {
    let r = post(&app(), "/v1/score", "{\"age\": ").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn out_of_range_is_422() {
    let mut rec = reference_record(&model());
    rec.bmi = 0.0;
    let r = post(&app(), "/v1/score", profile_json(&rec).to_string()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error().fields[0].field, "bmi");
    let mut rec = reference_record(&model());
    rec.age = 17;
    let r = post(&app(), "/v1/score", profile_json(&rec).to_string()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn non_json_content_type_is_415() {
    let body = profile_json(&reference_record(&model())).to_string();
    let req = Request::post("/v1/score").header(header::CONTENT_TYPE, "text/plain").body(Body::from(body.clone())).unwrap();
    assert_eq!(send(&app(), req).await.status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    let req = Request::post("/v1/score").body(Body::from(body.clone())).unwrap();
    assert_eq!(send(&app(), req).await.status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
    let req = Request::post("/v1/score")
        .header(header::CONTENT_TYPE, "application/json; charset=utf-8")
        .body(Body::from(body))
        .unwrap();
    assert_eq!(send(&app(), req).await.status, StatusCode::OK);
}

#[tokio::test]
async fn whatif_empty_modifications_is_zero_delta() {
    let rec = reference_record(&model());
    let r = post(&app(), "/v1/whatif", json!({"base": profile_json(&rec), "modifications": {}}).to_string()).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["delta"], json!(0.0));
    assert_eq!(v["before"], v["after"]);
}

#[tokio::test]
async fn whatif_alcohol_matches_library_and_golden() {
    let m = model();
    let mut rec = reference_record(&m);
    rec.alcohol_monthly_plus = true;
    let body = json!({"base": profile_json(&rec), "modifications": {"alcohol_monthly_plus": false}});
    let r = post(&app(), "/v1/whatif", body.to_string()).await;
    assert_eq!(r.status, StatusCode::OK);
    let changes = ProfileInput { alcohol_monthly_plus: Some(false), ..Default::default() };
    assert_eq!(r.body, serde_json::to_vec(&m.whatif(&rec, &changes, false).unwrap()).unwrap());
    golden("whatif_alcohol.json", &r.body);
    let v = r.json();
    let lp = |k: &str| v[k]["linear_predictor"].as_f64().unwrap();
    assert!((lp("after") - lp("before") - 0.375).abs() < 1e-12);
    assert!(v["delta"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn whatif_combined_change_is_sum_of_linear_predictor_deltas() {
    let m = model();
    let mut rec = reference_record(&m);
    rec.bmi = 31.0;
    rec.currently_smoking = true;
    rec.pack_years = 20.0;
    let app = app();
    let base = profile_json(&rec);
    let lp_delta = |v: &Value| v["after"]["linear_predictor"].as_f64().unwrap() - v["before"]["linear_predictor"].as_f64().unwrap();
    let bmi = post(&app, "/v1/whatif", json!({"base": base, "modifications": {"bmi": 25.0}}).to_string()).await.json();
    let smoke =
        post(&app, "/v1/whatif", json!({"base": base, "modifications": {"currently_smoking": false}}).to_string()).await.json();
    let both = post(
        &app,
        "/v1/whatif",
        json!({"base": base, "modifications": {"bmi": 25.0, "currently_smoking": false}}).to_string(),
    )
    .await
    .json();
    assert!((lp_delta(&both) - lp_delta(&bmi) - lp_delta(&smoke)).abs() < 1e-12);
}

#[tokio::test]
async fn whatif_non_modifiable_is_409_unless_overridden() {
    let rec = reference_record(&model());
    let base = profile_json(&rec);
    let app = app();
    let r = post(&app, "/v1/whatif", json!({"base": base, "modifications": {"age": 70}}).to_string()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error().fields[0].field, "age");
    // restating the current value is not a change
    let r = post(&app, "/v1/whatif", json!({"base": base, "modifications": {"age": rec.age}}).to_string()).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = post(
        &app,
        "/v1/whatif",
        json!({"base": base, "modifications": {"age": 70}, "allow_non_modifiable": true}).to_string(),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.json()["delta"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn whatif_rejects_unknown_modification_and_incomplete_base() {
    let rec = reference_record(&model());
    let app = app();
    let r = post(&app, "/v1/whatif", json!({"base": profile_json(&rec), "modifications": {"height": 2}}).to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error().fields[0].field, "modifications.height");
    let r = post(&app, "/v1/whatif", json!({"base": {"age": 50}, "modifications": {}}).to_string()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error().error, "missing_fields");
    let mut rec2 = rec.clone();
    rec2.bmi = 25.0;
    let r = post(&app, "/v1/whatif", json!({"base": profile_json(&rec2), "modifications": {"bmi": -1.0}}).to_string()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn requests_do_not_change_served_model() {
    let app = app();
    let before = get(&app, "/v1/model").await.body;
    let rec = reference_record(&model());
    post(&app, "/v1/whatif", json!({"base": profile_json(&rec), "modifications": {"bmi": 35.0}}).to_string()).await;
    assert_eq!(get(&app, "/v1/model").await.body, before);
}

#[tokio::test]
async fn cors_allows_configured_origin_only() {
    let config = ServiceConfig { cors_origins: vec!["http://localhost:5173".into()], access_log: true };
    let cors_app = app_with(&config);
    let preflight = |origin: &'static str| {
        Request::builder()
            .method("OPTIONS")
            .uri("/v1/score")
            .header(header::ORIGIN, origin)
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
            .header(header::ACCESS_CONTROL_REQUEST_HEADERS, "content-type")
            .body(Body::empty())
            .unwrap()
    };
    let ok = send(&cors_app, preflight("http://localhost:5173")).await;
    assert_eq!(ok.headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
    let other = send(&cors_app, preflight("http://evil.example")).await;
    assert!(other.headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
    // no CORS headers when not configured
    let plain = send(&app(), preflight("http://localhost:5173")).await;
    assert!(plain.headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

#[test]
fn malformed_artifact_is_refused() {
    assert!(AppState::from_artifact(b"{}".to_vec()).is_err());
    assert!(AppState::from_artifact(vec![0xff, 0xfe]).is_err());
    let mut v: Value = serde_json::from_str(ARTIFACT).unwrap();
    v["baseline_survival"] = json!(1.5);
    assert!(AppState::from_artifact(v.to_string().into_bytes()).is_err());
}

#[test]
fn state_from_model_serves_its_json() {
    let m = model();
    let s = AppState::new(m.clone()).unwrap();
    assert_eq!(s.model(), &m);
    assert!(s.etag().starts_with("\"sha256-"));
}

#[test]
fn profile_schema_matches_accepted_fields() {
    let schema: Value = serde_json::from_str(include_str!("../../../docs/api/profile.schema.json")).unwrap();
    let mut documented: Vec<&str> = schema["properties"].as_object().unwrap().keys().map(String::as_str).collect();
    let mut accepted = t2drisk::engine::PROFILE_FIELDS.to_vec();
    documented.sort_unstable();
    accepted.sort_unstable();
    assert_eq!(documented, accepted);
    let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(required.len(), accepted.len() - 1);
    assert!(!required.contains(&"previous_smoker"));
}

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use mcrf_cli::service::{router, shared, FitSession};
use mcrf_core::casestudy::CaseStudyConfig;
use mcrf_core::io::{read_modelset, ModelSetDocument};
use mcrf_core::{
    estimate_experimental, GridGeometry, LagBinSpec, ModelDescriptor, ModelKind, ModelSpec, ProportionVector,
    SamplePoint, SampleSet, TransiogramModelSet,
};
use serde_json::{json, Value};
use tower::ServiceExt;

fn small_cfg() -> CaseStudyConfig {
    CaseStudyConfig {
        nrows: 60,
        ncols: 60,
        blob_seeds: 60,
        reduced_max_share: 0.05,
        n_real: 3,
        ..CaseStudyConfig::default()
    }
}

fn small_session() -> FitSession {
    static S: OnceLock<FitSession> = OnceLock::new();
    S.get_or_init(|| FitSession::demo(&small_cfg(), None).unwrap()).clone()
}

fn full_session() -> FitSession {
    static S: OnceLock<FitSession> = OnceLock::new();
    S.get_or_init(|| FitSession::demo(&CaseStudyConfig::default(), None).unwrap()).clone()
}

fn app(session: Option<FitSession>) -> Router {
    router(shared(session))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn spec_json(row: &oracles::FixtureRow) -> Value {
    serde_json::to_value(ModelSpec::from(&oracles::descriptor(row))).unwrap()
}

#[tokio::test]
async fn every_endpoint_is_not_found_without_session() {
    let app = app(None);
    let eval = json!({"tail": 0, "head": 1, "descriptor": {"kind": "exponential-cross", "sill": 0.2, "range": 10.0}, "lag_max": 10.0, "step": 1.0});
    let calls = [
        (Method::GET, "/session/summary", None),
        (Method::GET, "/transiogram?tail=0&head=0", None),
        (Method::POST, "/model/evaluate", Some(eval)),
        (Method::GET, "/draft", None),
        (Method::POST, "/preview", Some(json!({"seed": 1}))),
    ];
    for (m, uri, body) in calls {
        let (status, v) = call(&app, m, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"], "no session loaded");
    }
}

#[tokio::test]
async fn summary_lists_demo_classes() {
    let app = app(Some(small_session()));
    let (status, v) = call(&app, Method::GET, "/session/summary", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["n_classes"], 7);
    assert_eq!(v["classes"][6]["name"], "other crops");
    assert_eq!(v["classes"][4]["role"], "minor");
    let p: Vec<f64> = serde_json::from_value(v["proportions"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(p[6] > 0.3, "{p:?}");
    assert_eq!(v["bin_spec"]["bin_width"], 3.0);
    assert_eq!(v["radius"], 30.0);
    assert_eq!(v["validation_lag_max"], 60.0);
}

#[tokio::test]
async fn transiogram_matches_estimation() {
    let s = small_session();
    let exp = estimate_experimental(&s.samples, &s.spec).unwrap();
    let app = app(Some(s));
    for (tail, head) in [(0, 0), (3, 4), (6, 1)] {
        let (status, v) = call(&app, Method::GET, &format!("/transiogram?tail={tail}&head={head}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), exp.n_bins());
        for (b, p) in pts.iter().enumerate() {
            assert_eq!(p["lag"].as_f64().unwrap(), exp.lags()[b]);
            assert_eq!(p["count"].as_u64().unwrap(), exp.count(tail, head, b));
            assert_eq!(p["tail_total"].as_u64().unwrap(), exp.tail_total(tail, b));
            assert_eq!(p["probability"].as_f64(), exp.probability(tail, head, b));
            assert_eq!(p["missing"].as_bool().unwrap(), exp.probability(tail, head, b).is_none());
        }
    }
    let (status, v) = call(&app, Method::GET, "/transiogram?tail=7&head=0", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"], json!(["tail"]));
}

#[tokio::test]
async fn single_class_transiogram_is_one_and_missing_bins_have_no_counts() {
    let pts = vec![
        SamplePoint { x: 0.5, y: 0.5, class: 0 },
        SamplePoint { x: 1.5, y: 0.5, class: 0 },
        SamplePoint { x: 9.5, y: 0.5, class: 0 },
    ];
    let samples = SampleSet::new(pts, 1).unwrap();
    let set =
        TransiogramModelSet::new(vec![ModelDescriptor::Rest], vec![0], ProportionVector::new(vec![1.0]).unwrap(), None)
            .unwrap();
    let geom = GridGeometry::new(1, 10, 1.0, 0.0, 0.0).unwrap();
    let session =
        FitSession::new("one", samples, LagBinSpec::new(1.0, 9.0, 1.0).unwrap(), set, 4.0, 5.0, geom, None, None)
            .unwrap();
    let app = app(Some(session));
    let (_, v) = call(&app, Method::GET, "/transiogram?tail=0&head=0", None).await;
    let mut measured = 0;
    for p in v["points"].as_array().unwrap() {
        if p["missing"].as_bool().unwrap() {
            assert_eq!(p["count"], 0);
            assert!(p["probability"].is_null());
        } else {
            assert_eq!(p["probability"], 1.0);
            measured += 1;
        }
    }
    assert_eq!(measured, 3);
}

#[tokio::test]
async fn evaluate_returns_model_values_and_row_feedback() {
    let s = small_session();
    let app = app(Some(s.clone()));
    let body =
        json!({"tail": 0, "head": 1, "descriptor": spec_json(&oracles::CORN_ROW[1]), "lag_max": 100.0, "step": 0.5});
    let (status, v) = call(&app, Method::POST, "/model/evaluate", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let descr = oracles::descriptor(&oracles::CORN_ROW[1]);
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 201);
    let mut peak: f64 = 0.0;
    for p in pts {
        let h = p["lag"].as_f64().unwrap();
        let y = p["value"].as_f64().unwrap();
        assert!((y - descr.eval(h).unwrap()).abs() <= 1e-12);
        peak = peak.max(y);
    }
    assert!(peak > 0.1765);
    assert!(v["rmse_all"].as_f64().unwrap() > 0.0);
    assert!(v["rmse_low"].is_number());
    let rows = v["row_sum"].as_array().unwrap().iter().zip(v["rest"].as_array().unwrap());
    for (a, b) in rows {
        assert!((a["value"].as_f64().unwrap() + b["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    assert_eq!(v["rest_head"], 6);

    let mut draft = s.draft.clone();
    draft.set_entry(0, 1, descr.clone()).unwrap();
    let rest = v["rest"].as_array().unwrap();
    for p in rest.iter().step_by(17) {
        let h = p["lag"].as_f64().unwrap();
        assert!((p["value"].as_f64().unwrap() - draft.eval(0, 6, h)).abs() <= 1e-12);
    }
}

#[tokio::test]
async fn zero_weight_gamma_equals_exponential_cross() {
    let app = app(Some(small_session()));
    let gamma =
        json!({"kind": "gamma-exponential", "sill": 0.2, "range": 12.0, "alpha": 2.0, "theta": 0.5, "weight": 0.0});
    let expo = json!({"kind": "exponential-cross", "sill": 0.2, "range": 12.0});
    let mut curves = Vec::new();
    for d in [gamma, expo] {
        let (status, v) = call(
            &app,
            Method::POST,
            "/model/evaluate",
            Some(json!({"tail": 2, "head": 0, "descriptor": d, "lag_max": 60.0, "step": 0.25})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{v}");
        curves.push(v["points"].clone());
    }
    let (a, b) = (curves[0].as_array().unwrap(), curves[1].as_array().unwrap());
    for (p, q) in a.iter().zip(b) {
        assert!((p["value"].as_f64().unwrap() - q["value"].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[tokio::test]
async fn evaluate_rejects_bad_requests_with_field_names() {
    let app = app(Some(small_session()));
    let ok = json!({"kind": "exponential-cross", "sill": 0.2, "range": 10.0});
    let cases = [
        (json!({"tail": 0, "head": 1, "descriptor": ok, "lag_max": 10.0, "step": 0.0}), json!(["step"])),
        (json!({"tail": 0, "head": 1, "descriptor": ok, "lag_max": 10.0, "step": -1.0}), json!(["step"])),
        (json!({"tail": 0, "head": 6, "descriptor": ok, "lag_max": 10.0, "step": 1.0}), json!(["head"])),
        (json!({"tail": 0, "head": 9, "descriptor": ok, "lag_max": 10.0, "step": 1.0}), json!(["head"])),
        (
            json!({"tail": 0, "head": 1, "descriptor": {"kind": "gamma-spherical", "sill": 0.2, "range": 10.0, "alpha": 1.0, "theta": 0.5, "weight": 1.0}, "lag_max": 10.0, "step": 1.0}),
            json!(["descriptor.alpha"]),
        ),
        (
            json!({"tail": 0, "head": 1, "descriptor": {"kind": "gamma-spherical", "sill": 0.2, "range": 10.0, "alpha": 2.0, "weight": 1.0}, "lag_max": 10.0, "step": 1.0}),
            json!(["descriptor.theta"]),
        ),
        (
            json!({"tail": 0, "head": 1, "descriptor": {"kind": "exponential-cross", "sill": 1.2, "range": -3.0}, "lag_max": 10.0, "step": 1.0}),
            json!(["descriptor.sill", "descriptor.range"]),
        ),
        (
            json!({"tail": 0, "head": 1, "descriptor": {"kind": "rest"}, "lag_max": 10.0, "step": 1.0}),
            json!(["descriptor.kind"]),
        ),
    ];
    for (body, fields) in cases {
        let (status, v) = call(&app, Method::POST, "/model/evaluate", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(v["fields"], fields, "{body}: {v}");
    }
}

#[tokio::test]
async fn oversized_candidate_is_flagged() {
    let app = app(Some(small_session()));
    let body = json!({"tail": 1, "head": 0, "descriptor": {"kind": "exponential-cross", "sill": 0.9, "range": 5.0}, "lag_max": 60.0, "step": 1.0});
    let (status, v) = call(&app, Method::POST, "/model/evaluate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["valid"], false);
    let viol = v["violations"].as_array().unwrap();
    assert!(!viol.is_empty());
    assert!(viol.iter().all(|x| x["head"] == 6 && x["kind"] == "negative"));
}

#[tokio::test]
async fn valid_modelset_is_persisted_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("saved/set.toml");
    let mut s = small_session();
    s.persist_path = Some(path.clone());
    let doc = ModelSetDocument::from_set(&s.draft);
    let app = app(Some(s.clone()));
    let (status, v) = call(&app, Method::PUT, "/modelset", Some(serde_json::to_value(&doc).unwrap())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["valid"], true);
    assert_eq!(v["persisted"], true);
    assert!(v["report"]["lag_max"].as_f64().unwrap() >= 60.0);
    let (back, report) = read_modelset(&path, 60.0).unwrap();
    assert!(report.valid);
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(back.entry(i, j), s.draft.entry(i, j));
        }
    }
    let (_, d) = call(&app, Method::GET, "/draft", None).await;
    assert!(d["dirty"].as_array().unwrap().iter().all(|x| x == false));
}

#[tokio::test]
async fn invalid_modelset_is_reported_and_not_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.toml");
    let mut s = small_session();
    s.persist_path = Some(path.clone());
    let mut doc = ModelSetDocument::from_set(&s.draft);
    // row 2: the (2, 0) sill pushes the non-rest sum to about 1.2
    let row = doc.rows.iter_mut().find(|r| r.tail == 2).unwrap();
    let e = row.entries.iter_mut().find(|e| e.head == 0).unwrap();
    *e = mcrf_core::io::EntryDocument::from_spec(
        0,
        ModelSpec::of_kind(ModelKind::ExponentialCross).with_sill(0.95).with_range(4.0),
    );
    let app = app(Some(s));
    let (status, v) = call(&app, Method::PUT, "/modelset", Some(serde_json::to_value(&doc).unwrap())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["valid"], false);
    assert_eq!(v["persisted"], false);
    let failing: Vec<&Value> = v["report"]["rows"].as_array().unwrap().iter().filter(|r| r["valid"] == false).collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0]["tail"], 2);
    assert_eq!(failing[0]["min_head"], 6);
    assert!(failing[0]["min_value"].as_f64().unwrap() < -0.1);
    assert!(failing[0]["min_lag"].as_f64().unwrap() > 0.0);
    assert!(!path.exists());
}

#[tokio::test]
async fn draft_edits_mark_entries_dirty() {
    let app = app(Some(small_session()));
    let (_, v) = call(
        &app,
        Method::PUT,
        "/draft/entry",
        Some(json!({"tail": 0, "head": 1, "descriptor": spec_json(&oracles::CORN_ROW[1])})),
    )
    .await;
    let dirty = v["dirty"].as_array().unwrap();
    assert_eq!(dirty[1], true);
    let (status, v) = call(
        &app,
        Method::PUT,
        "/draft/entry",
        Some(json!({"tail": 0, "head": 6, "descriptor": {"kind": "exponential-cross", "sill": 0.2, "range": 3.0}})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}

#[tokio::test]
async fn corn_row_row_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.toml");
    let mut s = small_session();
    let mut start = oracles::corn_row_set();
    for j in 0..6 {
        start
            .set_entry(
                0,
                j,
                ModelDescriptor::basic(
                    if j == 0 { ModelKind::ExponentialAuto } else { ModelKind::ExponentialCross },
                    oracles::CORN_ROW[j].4,
                    20.0,
                )
                .unwrap(),
            )
            .unwrap();
    }
    s.draft = start;
    s.persist_path = Some(path.clone());
    let app = app(Some(s));
    for row in &oracles::CORN_ROW[..6] {
        let (status, v) = call(
            &app,
            Method::PUT,
            "/draft/entry",
            Some(json!({"tail": row.1, "head": row.2, "descriptor": spec_json(row)})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (_, d) = call(&app, Method::GET, "/draft", None).await;
    let (status, v) = call(&app, Method::PUT, "/modelset", Some(d["document"].clone())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (back, _) = read_modelset(&path, 60.0).unwrap();
    for row in &oracles::CORN_ROW {
        assert_eq!(back.entry(row.1, row.2), &oracles::descriptor(row), "{}", row.0);
    }
}

#[tokio::test]
async fn preview_is_seed_deterministic_and_conditioned() {
    let s = full_session();
    let samples = s.samples.clone();
    let geom = s.geometry;
    let app = app(Some(s));
    let (status, a) = call(&app, Method::POST, "/preview", Some(json!({"seed": 11}))).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = call(&app, Method::POST, "/preview", Some(json!({"seed": 11}))).await;
    let (_, c) = call(&app, Method::POST, "/preview", Some(json!({"seed": 12}))).await;
    assert_eq!(a["rows"], b["rows"]);
    assert_ne!(a["rows"], c["rows"]);
    assert_eq!(a["downscale"], 3);
    let (nr, nc) = (a["nrows"].as_u64().unwrap() as usize, a["ncols"].as_u64().unwrap() as usize);
    assert!(nr <= 64 && nc <= 64);
    assert_eq!((nr, nc), (50, 50));
    assert!(a["accuracy"]["overall"].as_f64().unwrap() > 0.0);

    // the first sample in each preview cell fixes that cell
    let coarse = GridGeometry::new(nr, nc, geom.cell_size * 3.0, geom.origin_x, geom.origin_y).unwrap();
    let mut seen = std::collections::HashSet::new();
    let rows = a["rows"].as_array().unwrap();
    for p in samples.points() {
        let (r, col) = coarse.cell_of(p.x, p.y).unwrap();
        if seen.insert((r, col)) {
            assert_eq!(rows[nr - 1 - r][col], p.class);
        }
    }
    assert_eq!(a["conditioning_points"].as_u64().unwrap() as usize, seen.len());
}

#[tokio::test]
async fn preview_caps_downscale_with_notice() {
    let app = app(Some(small_session()));
    let (status, v) =
        call(&app, Method::POST, "/preview", Some(json!({"seed": 3, "downscale": 100, "radius": 20.0}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["downscale"], 7);
    assert!(v["notices"][0].as_str().unwrap().contains("capped"));
    let (status, v) = call(&app, Method::POST, "/preview", Some(json!({"seed": 3, "radius": 0.0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"], json!(["radius"]));
}

#[tokio::test]
async fn preview_rejects_invalid_draft() {
    let mut s = small_session();
    s.draft.set_entry(1, 0, ModelDescriptor::basic(ModelKind::ExponentialCross, 0.95, 3.0).unwrap()).unwrap();
    let app = app(Some(s));
    let (status, v) = call(&app, Method::POST, "/preview", Some(json!({"seed": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"], json!(["modelset"]));
}

#[tokio::test]
async fn cors_allows_local_origins_only() {
    let app = app(Some(small_session()));
    for (origin, allowed) in
        [("http://localhost:5173", true), ("http://127.0.0.1:8080", true), ("http://example.org", false)]
    {
        let req = Request::builder()
            .method(Method::OPTIONS)
            .uri("/model/evaluate")
            .header(header::ORIGIN, origin)
            .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
            .body(Body::empty())
            .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let got = resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).map(|h| h.to_str().unwrap().to_string());
        assert_eq!(got.is_some(), allowed, "{origin}");
        if allowed {
            assert_eq!(got.unwrap(), origin);
        }
    }
}

use std::sync::Arc;

use absakit::annotation::http::{router, AppState};
use absakit::annotation::SessionStore;
use absakit::checkpoint::{self, Lookup};
use absakit::config::defaults;
use absakit::corpus::{parse, parse_atesc};
use absakit::dataset::LoadedDataset;
use absakit::training::train;
use absakit::{AbsaExample, AspectSpan, Corpus, EncodingKind, Polarity, TaskKind};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn upload(app: &Router, text: &str) -> (StatusCode, String) {
    let req = Request::post("/sessions").body(Body::from(text.to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn json_of(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn app_with_store(store: std::path::PathBuf) -> Router {
    let state = AppState { store: SessionStore::in_memory(), lookup: Lookup { store, hub: None, task: None } };
    router(Arc::new(state), None)
}

fn staff_checkpoint(store: &std::path::Path) {
    let mk = |text: &str, start: usize, pol: Polarity| {
        AbsaExample::from_text(text).unwrap().with_spans(vec![AspectSpan::new(start, start, pol)]).unwrap()
    };
    let examples = vec![
        mk("the staff was friendly", 1, Polarity::Positive),
        mk("rude staff and slow", 1, Polarity::Negative),
        mk("staff were so nice", 0, Polarity::Positive),
        mk("we liked the staff a lot", 3, Polarity::Positive),
    ];
    let data = LoadedDataset {
        name: "staff".into(),
        task: TaskKind::Atesc,
        train: Corpus::Examples(examples.clone()),
        valid: Corpus::Examples(examples),
        test: Corpus::Examples(Vec::new()),
    };
    let config = defaults(TaskKind::Atesc);
    let out = train(&config, &data).unwrap();
    checkpoint::save(store, "staff-tagger", &out.model, &config, out.best).unwrap();
}

#[tokio::test]
async fn upload_edit_export() {
    let app = app_with_store(std::env::temp_dir());
    assert_eq!(upload(&app, "").await.0, StatusCode::BAD_REQUEST);
    let req = Request::post("/sessions").body(Body::from(vec![0xffu8, 0xfe])).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);

    let (status, body) = upload(&app, "one\ntwo words\nthree more words\n").await;
    assert_eq!(status, StatusCode::CREATED);
    let created = json_of(&body);
    assert_eq!(created["sentences"], 3);
    let id = created["session_id"].as_str().unwrap().to_string();

    let spans = format!("/sessions/{id}/sentences/2/spans");
    let (status, body) =
        call(&app, Method::PUT, &spans, Some(json!({"start": 1, "end": 2, "polarity": "Positive", "version": 0}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["version"], 1);
    let stale = json!({"start": 0, "end": 0, "polarity": "Negative", "version": 0});
    let (status, body) = call(&app, Method::PUT, &spans, Some(stale)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["current_version"], 1);
    let overlap = json!({"start": 0, "end": 1, "polarity": "Negative", "version": 1});
    assert_eq!(call(&app, Method::PUT, &spans, Some(overlap)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let bad = json!({"start": 2, "end": 9, "polarity": "Negative", "version": 1});
    assert_eq!(call(&app, Method::PUT, &spans, Some(bad)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let missing = format!("/sessions/{id}/sentences/9/spans");
    let body = json!({"start": 0, "end": 0, "polarity": "Negative", "version": 0});
    assert_eq!(call(&app, Method::PUT, &missing, Some(body)).await.0, StatusCode::NOT_FOUND);

    let (status, doc) = call(&app, Method::GET, &format!("/sessions/{id}/export?kind=atesc"), None).await;
    assert_eq!(status, StatusCode::OK);
    let parsed = parse_atesc(&doc).unwrap();
    assert_eq!(parsed[2].spans(), &[AspectSpan::new(1, 2, Polarity::Positive)]);
    for kind in ["asc", "spantag"] {
        let (status, doc) = call(&app, Method::GET, &format!("/sessions/{id}/export?kind={kind}"), None).await;
        assert_eq!(status, StatusCode::OK);
        parse(&doc, kind.parse::<EncodingKind>().unwrap()).unwrap();
    }
    assert_eq!(call(&app, Method::GET, "/sessions/nope/export", None).await.0, StatusCode::NOT_FOUND);

    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/sentences?cursor=1&limit=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    let page = json_of(&body);
    assert_eq!(page["sentences"][0]["index"], 1);
    assert_eq!(page["next_cursor"], 2);

    let del = format!("/sessions/{id}/sentences/2/spans?start=1&end=2&version=1");
    assert_eq!(json_of(&call(&app, Method::DELETE, &del, None).await.1)["version"], 2);
    let (_, doc) = call(&app, Method::GET, &format!("/sessions/{id}/export?kind=asc"), None).await;
    assert_eq!(doc, "");
}

#[tokio::test]
async fn spantag_upload_prepopulates() {
    let app = app_with_store(std::env::temp_dir());
    let (_, body) = upload(&app, "The [B-ASP]food[E-ASP]$LABEL$Positive was good\n").await;
    let id = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}/sentences/0"), None).await;
    assert_eq!(json_of(&body)["confirmed"], json!([{"start": 1, "end": 1, "polarity": "Positive"}]));
}

#[tokio::test]
async fn autolabel_proposes_once() {
    let dir = tempfile::tempdir().unwrap();
    staff_checkpoint(dir.path());
    let app = app_with_store(dir.path().to_path_buf());
    let (_, body) = upload(&app, "But the staff was so nice to us .\nThe [B-ASP]staff[E-ASP]$LABEL$Negative was late\n").await;
    let id = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let auto = format!("/sessions/{id}/autolabel");

    let (status, body) = call(&app, Method::POST, &auto, Some(json!({"source": "staff-tagger"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(json_of(&body)["proposed"], 1);
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}/sentences/0"), None).await;
    let s0 = json_of(&body);
    assert_eq!(s0["proposals"][0]["span"]["start"], 2);
    assert_eq!(s0["proposals"][0]["span"]["end"], 2);
    assert!(s0["confirmed"].as_array().unwrap().is_empty());
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}/sentences/1"), None).await;
    assert_eq!(json_of(&body)["version"], 0);

    let (_, body) = call(&app, Method::POST, &auto, Some(json!({"source": "staff-tagger"}))).await;
    assert_eq!(json_of(&body)["proposed"], 0);
    let (status, _) = call(&app, Method::POST, &auto, Some(json!({"source": "missing"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, without) = call(&app, Method::GET, &format!("/sessions/{id}/export?kind=spantag"), None).await;
    let (_, with) =
        call(&app, Method::GET, &format!("/sessions/{id}/export?kind=spantag&include_proposals=true"), None).await;
    assert_eq!(without.matches("[B-ASP]").count(), 1);
    assert_eq!(with.matches("[B-ASP]").count(), 2);

    let version = s0["version"].as_u64().unwrap();
    let accept = format!("/sessions/{id}/sentences/0/proposals/0/accept");
    assert_eq!(call(&app, Method::POST, &accept, Some(json!({"version": version + 5}))).await.0, StatusCode::CONFLICT);
    let (status, _) = call(&app, Method::POST, &accept, Some(json!({"version": version}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, doc) = call(&app, Method::GET, &format!("/sessions/{id}/export?kind=atesc"), None).await;
    let parsed = parse_atesc(&doc).unwrap();
    assert_eq!(parsed[0].spans().len(), 1);
    assert_eq!(parsed[0].aspect_text(&parsed[0].spans()[0]), "staff");
}

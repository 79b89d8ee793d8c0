use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use agenda_core::corpus::{ingest, segment, Corpus, DocMeta, SegmentConfig};
use agenda_core::pipeline::build_index;
use agenda_core::retrieval::{retrieve, RetrievalHit};
use agenda_core::skipgram::Embeddings;
use agenda_core::vectorizer::embed_query;
use agenda_service::session::Session;
use agenda_service::{router, AppState, Engine, ServiceConfig};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

const WORDS: usize = 30;
const DIM: usize = 4;

fn word(i: usize) -> String {
    format!("w{i:02}")
}

/// Twelve two-page documents over a 30-word vocabulary with random 4-d
/// embeddings. Each document leans on its own slice of the vocabulary so
/// paragraph similarities spread over the whole range.
fn engine(seed: u64) -> Engine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..WORDS).map(word).collect();
    let data: Vec<f32> = (0..WORDS * DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let embeddings = Embeddings::new(words, DIM, data).unwrap();

    let mut docs = Vec::new();
    for d in 0..12 {
        let pages: Vec<String> = (0..2)
            .map(|_| {
                let paras: Vec<String> = (0..3)
                    .map(|_| {
                        let sentence = |rng: &mut ChaCha8Rng| {
                            let ws: Vec<String> = (0..6)
                                .map(|_| {
                                    let w = if rng.random_bool(0.6) {
                                        (d * 2 + rng.random_range(0..6)) % WORDS
                                    } else {
                                        rng.random_range(0..WORDS)
                                    };
                                    word(w)
                                })
                                .collect();
                            format!("{}.", ws.join(" "))
                        };
                        format!("{} {}", sentence(&mut rng), sentence(&mut rng))
                    })
                    .collect();
                paras.join("\n\n")
            })
            .collect();
        let doc = ingest(&pages.join("\u{0C}"), DocMeta::new(format!("doc-{d:02}")), "\u{0C}").unwrap();
        docs.push(segment(&doc, &SegmentConfig::with_min_tokens(4)));
    }
    let corpus = Corpus::from_documents(docs).unwrap();
    let study = build_index(&corpus, &embeddings).unwrap();
    Engine {
        corpus,
        embeddings,
        study,
        corpus_id: "fixture".into(),
        embedding_id: "fixture".into(),
    }
}

/// A clock returning t0001, t0002, ... so responses are reproducible.
fn counter_clock() -> impl Fn() -> String + Send + Sync + 'static {
    let n = Arc::new(AtomicU64::new(0));
    move || format!("t{:04}", n.fetch_add(1, Ordering::SeqCst) + 1)
}

fn app_with(session: Session, config: ServiceConfig) -> Router {
    router(AppState::new(engine(3), session, config).with_clock(counter_clock()))
}

fn app() -> Router {
    app_with(Session::new("test"), ServiceConfig::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call(app, Method::POST, uri, body).await
}

async fn patch(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::PATCH, uri, Some(body)).await
}

fn assert_error(resp: &(StatusCode, Value), status: StatusCode, code: &str) {
    assert_eq!(resp.0, status, "{}", resp.1);
    assert_eq!(resp.1["code"], code, "{}", resp.1);
    assert!(resp.1["message"].as_str().is_some_and(|m| !m.is_empty()));
    assert!(resp.1.get("detail").is_some());
}

async fn create(app: &Router, label: &str, terms: &[&str]) -> String {
    let (status, body) = post(app, "/queries", Some(json!({ "label": label, "terms": terms }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_owned()
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn hits_of(v: &Value) -> Vec<RetrievalHit> {
    serde_json::from_value(v.clone()).unwrap()
}

#[tokio::test]
async fn session_describes_loaded_data() {
    let app = app();
    create(&app, "A", &["w01"]).await;
    let (status, s) = get(&app, "/session").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["session_id"], "test");
    assert_eq!(s["corpus_id"], "fixture");
    assert_eq!(s["documents"], 12);
    assert_eq!(s["vocabulary"], WORDS);
    assert_eq!(s["drafts"].as_array().unwrap().len(), 1);
    assert_eq!(s["drafts"][0]["id"], "q1");
}

#[tokio::test]
async fn neighbors_of_one_word_match_brute_force() {
    let app = app();
    let e = engine(3);
    for (term, k) in [("w00", 5usize), ("w17", 1), ("w29", 50)] {
        let (status, body) = get(&app, &format!("/neighbors?terms={term}&k={k}")).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let q = e.embeddings.get(term).unwrap();
        let mut oracle: Vec<(f64, String)> = e
            .embeddings
            .words()
            .iter()
            .filter(|w| w.as_str() != term)
            .map(|w| (cos(q, e.embeddings.get(w).unwrap()), w.clone()))
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        oracle.truncate(k);
        let got = body["neighbors"].as_array().unwrap();
        assert_eq!(got.len(), oracle.len());
        for (g, (sim, w)) in got.iter().zip(&oracle) {
            assert_eq!(g["token"], w.as_str());
            assert!((g["similarity"].as_f64().unwrap() - sim).abs() < 1e-9);
        }
    }
    let (_, body) = get(&app, "/neighbors?terms=w03").await;
    assert_eq!(body["k"], 50);
    assert_eq!(body["neighbors"].as_array().unwrap().len(), WORDS - 1);
}

#[tokio::test]
async fn neighbors_errors() {
    let app = app();
    assert_error(&get(&app, "/neighbors?terms=").await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&get(&app, "/neighbors").await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&get(&app, "/neighbors?terms=w01&k=0").await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&get(&app, "/neighbors?terms=w01&k=lots").await, StatusCode::BAD_REQUEST, "bad_request");
    let resp = get(&app, "/neighbors?terms=w01,w1").await;
    assert_error(&resp, StatusCode::UNPROCESSABLE_ENTITY, "unknown_term");
    assert_eq!(resp.1["detail"]["term"], "w1");
    let suggestions = resp.1["detail"]["suggestions"].as_array().unwrap();
    assert!(!suggestions.is_empty());
    assert!(suggestions.iter().all(|s| s.as_str().unwrap().starts_with('w')));
}

#[tokio::test]
async fn term_cap_and_validation() {
    let app = app();
    let id = create(&app, "Cap", &["w01", "w02", "w03", "w04"]).await;
    let uri = format!("/queries/{id}");
    let (status, d) = patch(&app, &uri, json!({ "op": "add_term", "term": "W05" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["terms"], json!(["w01", "w02", "w03", "w04", "w05"]));

    let resp = patch(&app, &uri, json!({ "op": "add_term", "term": "w06" })).await;
    assert_error(&resp, StatusCode::CONFLICT, "term_cap");
    assert!(resp.1["message"].as_str().unwrap().contains('5'));
    assert_eq!(resp.1["detail"]["max_terms"], 5);

    let resp = patch(&app, &uri, json!({ "op": "add_term", "term": "w01" })).await;
    assert_error(&resp, StatusCode::CONFLICT, "duplicate_term");
    for bad in [0.0, -0.2, 1.01] {
        let resp = patch(&app, &uri, json!({ "op": "set_threshold", "threshold": bad })).await;
        assert_error(&resp, StatusCode::UNPROCESSABLE_ENTITY, "threshold");
    }
    let resp = patch(&app, &uri, json!({ "op": "remove_term", "term": "w20" })).await;
    assert_error(&resp, StatusCode::UNPROCESSABLE_ENTITY, "missing_term");
    let resp = patch(&app, &uri, json!({ "op": "rename", "label": "x" })).await;
    assert_error(&resp, StatusCode::BAD_REQUEST, "bad_request");

    // None of the rejected edits reached the history.
    let (_, h) = get(&app, &format!("/queries/{id}/history")).await;
    assert_eq!(h["events"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn creation_errors() {
    let app = app();
    let bad = |body: Value| {
        let app = app.clone();
        async move { post(&app, "/queries", Some(body)).await }
    };
    assert_error(&bad(json!({ "label": "x", "terms": [] })).await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&bad(json!({ "label": " ", "terms": ["w01"] })).await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&bad(json!({ "label": "x" })).await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(
        &bad(json!({ "label": "x", "terms": ["w01", "w02", "w03", "w04", "w05", "w06"] })).await,
        StatusCode::CONFLICT,
        "term_cap",
    );
    assert_error(
        &bad(json!({ "label": "x", "terms": ["w01"], "threshold": 0 })).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "threshold",
    );
    let resp = bad(json!({ "label": "x", "terms": ["w01", "forest"] })).await;
    assert_error(&resp, StatusCode::UNPROCESSABLE_ENTITY, "unknown_term");
    assert_eq!(resp.1["detail"]["term"], "forest");
    let resp = call(&app, Method::POST, "/queries", None).await;
    assert_eq!(resp.0, StatusCode::BAD_REQUEST);
    let (_, all) = get(&app, "/queries").await;
    assert_eq!(all, json!([]));
}

#[tokio::test]
async fn hits_equal_retrieve() {
    let app = app();
    let e = engine(3);
    let id = create(&app, "Hits", &["w02", "w07"]).await;
    patch(&app, &format!("/queries/{id}"), json!({ "op": "set_threshold", "threshold": 0.3 })).await;

    let q = embed_query(&["w02".into(), "w07".into()], &e.study.stats, &e.embeddings).unwrap();
    let oracle = retrieve(&q, 0.3, &e.study.index).unwrap();
    assert!(!oracle.is_empty());

    let (status, desc) = get(&app, &format!("/queries/{id}/hits?order=desc")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(hits_of(&desc["hits"]), oracle);
    let (_, default) = get(&app, &format!("/queries/{id}/hits")).await;
    assert_eq!(default, desc);

    let (_, asc) = get(&app, &format!("/queries/{id}/hits?order=asc")).await;
    let asc = hits_of(&asc["hits"]);
    assert!(asc.windows(2).all(|w| w[0].similarity <= w[1].similarity));
    let mut a: Vec<&str> = asc.iter().map(|h| h.para_id.as_str()).collect();
    let mut d: Vec<&str> = oracle.iter().map(|h| h.para_id.as_str()).collect();
    a.sort_unstable();
    d.sort_unstable();
    assert_eq!(a, d);

    assert_error(
        &get(&app, &format!("/queries/{id}/hits?order=sideways")).await,
        StatusCode::BAD_REQUEST,
        "bad_request",
    );
    assert_error(&get(&app, "/queries/q99/hits").await, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn descent_admits_one_band_per_step() {
    let app = app();
    let e = engine(3);
    let id = create(&app, "Descent", &["w05"]).await;
    patch(&app, &format!("/queries/{id}"), json!({ "op": "set_threshold", "threshold": 0.6 })).await;

    let q = embed_query(&["w05".into()], &e.study.stats, &e.embeddings).unwrap();
    let all = retrieve(&q, -1.0, &e.study.index).unwrap();

    let mut expected_threshold = 0.6f64;
    let mut admitted_total = 0;
    for step in 1..=20 {
        let (status, body) = post(&app, &format!("/queries/{id}/descend"), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let from = expected_threshold;
        expected_threshold = ((from - 0.01) * 100.0).round() / 100.0;
        assert_eq!(body["from"].as_f64().unwrap(), from);
        assert_eq!(body["threshold"].as_f64().unwrap(), expected_threshold, "step {step}");
        assert_eq!(body["draft"]["threshold"], body["threshold"]);

        let band: Vec<RetrievalHit> = all
            .iter()
            .filter(|h| h.similarity >= expected_threshold && h.similarity < from)
            .cloned()
            .collect();
        assert_eq!(hits_of(&body["admitted"]), band, "step {step}");
        admitted_total += band.len();
    }
    assert!(admitted_total > 0, "fixture admits nothing between 0.60 and 0.40");

    let resp = post(&app, &format!("/queries/{id}/descend"), None).await;
    assert_error(&resp, StatusCode::CONFLICT, "floor");
    let (_, d) = get(&app, &format!("/queries/{id}")).await;
    assert_eq!(d["threshold"].as_f64().unwrap(), 0.4);
    assert_eq!(d["revision"], 22);
}

#[tokio::test]
async fn descend_from_default_threshold() {
    let app = app();
    let id = create(&app, "Default", &["w10"]).await;
    let (_, body) = post(&app, &format!("/queries/{id}/descend"), None).await;
    assert_eq!(body["from"].as_f64().unwrap(), 0.55);
    assert_eq!(body["threshold"].as_f64().unwrap(), 0.54);
    for h in hits_of(&body["admitted"]) {
        assert!(h.similarity >= 0.54 && h.similarity < 0.55);
    }
}

#[tokio::test]
async fn classify_takes_the_best_paragraph_per_document() {
    let app = app();
    let e = engine(3);
    let id = create(&app, "Classify", &["w08", "w21"]).await;
    let q = embed_query(&["w08".into(), "w21".into()], &e.study.stats, &e.embeddings).unwrap();
    let all = retrieve(&q, -1.0, &e.study.index).unwrap();
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for h in &all {
        let b = best.entry(&h.doc_id).or_insert(f64::NEG_INFINITY);
        *b = b.max(h.similarity);
    }

    let mut previous = usize::MAX;
    for t in [0.3, 0.45, 0.55, 0.7, 0.9] {
        patch(&app, &format!("/queries/{id}"), json!({ "op": "set_threshold", "threshold": t })).await;
        let (status, body) = post(&app, &format!("/classify/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let labels = body["labels"].as_array().unwrap();
        assert_eq!(labels.len(), 12);
        for l in labels {
            let doc = l["doc_id"].as_str().unwrap();
            let b = best[doc];
            assert_eq!(l["predicted"].as_bool().unwrap(), b >= t, "{doc} at {t}");
            assert_eq!(l["best_similarity"].as_f64().unwrap(), b);
            assert_eq!(l["label"], "Classify");
        }
        let positives = body["positives"].as_u64().unwrap() as usize;
        assert_eq!(positives, best.values().filter(|&&b| b >= t).count());
        assert!(positives <= previous);
        previous = positives;
    }
    assert_error(&post(&app, "/classify/q7", None).await, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn pages_are_served() {
    let app = app();
    let e = engine(3);
    let (status, body) = get(&app, "/documents/doc-03/pages/2").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], e.corpus.get("doc-03").unwrap().pages[1]);
    assert_eq!(body["page_count"], 2);
    assert_error(&get(&app, "/documents/doc-03/pages/3").await, StatusCode::NOT_FOUND, "not_found");
    assert_error(&get(&app, "/documents/doc-03/pages/0").await, StatusCode::NOT_FOUND, "not_found");
    assert_error(&get(&app, "/documents/nope/pages/1").await, StatusCode::NOT_FOUND, "not_found");
    assert_error(&get(&app, "/documents/doc-03/pages/two").await, StatusCode::BAD_REQUEST, "bad_request");
    assert_error(&get(&app, "/no/such/route").await, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn history_replays_to_current_state() {
    let app = app();
    let id = create(&app, "Replay", &["w01", "w02"]).await;
    let uri = format!("/queries/{id}");
    let script = [
        json!({ "op": "add_term", "term": "w03" }),
        json!({ "op": "remove_term", "term": "w01" }),
        json!({ "op": "set_threshold", "threshold": 0.52 }),
        json!({ "op": "add_term", "term": "w01" }),
        json!({ "op": "add_term", "term": "w09" }),
        json!({ "op": "add_term", "term": "w10" }),
        json!({ "op": "remove_term", "term": "w02" }),
    ];
    let mut terms: Vec<String> = vec!["w01".into(), "w02".into()];
    let mut threshold = 0.55;
    for op in script {
        let (status, _) = patch(&app, &uri, op.clone()).await;
        assert_eq!(status, StatusCode::OK);
        match op["op"].as_str().unwrap() {
            "add_term" => terms.push(op["term"].as_str().unwrap().to_owned()),
            "remove_term" => terms.retain(|t| t != op["term"].as_str().unwrap()),
            _ => threshold = op["threshold"].as_f64().unwrap(),
        }
    }
    let (_, descent) = post(&app, &format!("{uri}/descend"), None).await;
    assert_eq!(descent["from"].as_f64().unwrap(), threshold);
    threshold = ((threshold - 0.01) * 100.0_f64).round() / 100.0;

    let (_, d) = get(&app, &uri).await;
    let (_, h) = get(&app, &format!("{uri}/history")).await;
    assert_eq!(d["terms"], json!(terms));
    assert_eq!(d["threshold"].as_f64().unwrap(), threshold);
    assert_eq!(h["replayed"]["terms"], d["terms"]);
    assert_eq!(h["replayed"]["threshold"], d["threshold"]);
    let events = h["events"].as_array().unwrap();
    assert_eq!(events.len(), 9);
    assert_eq!(events[0]["op"], "create");
    assert_eq!(events[8]["op"], "descend");
    let stamps: Vec<&str> = events.iter().map(|e| e["at"].as_str().unwrap()).collect();
    assert!(stamps.windows(2).all(|w| w[0] < w[1]));
}

#[tokio::test]
async fn accept_freezes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        reports: Some(dir.path().join("reports")),
        ..ServiceConfig::default()
    };
    let app = app_with(Session::new("test"), config);
    let id = create(&app, "Buffer zone", &["w04"]).await;
    let uri = format!("/queries/{id}");
    for _ in 0..4 {
        post(&app, &format!("{uri}/descend"), None).await;
    }
    let (status, body) = post(&app, &format!("{uri}/accept"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["query"]["threshold"].as_f64().unwrap(), 0.51);
    assert_eq!(body["query"]["terms"], json!(["w04"]));
    assert!(body["query"]["notes"].as_str().unwrap().contains("descended to 0.51"));
    assert_eq!(body["draft"]["accepted"], true);
    let reports: Vec<String> = body["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(reports.len(), 2);
    assert!(reports[0].ends_with("buffer-zone_0.51.report.txt"));
    assert!(reports.iter().all(|p| std::path::Path::new(p).is_file()));

    assert_error(
        &patch(&app, &uri, json!({ "op": "add_term", "term": "w05" })).await,
        StatusCode::CONFLICT,
        "accepted",
    );
    assert_error(&post(&app, &format!("{uri}/descend"), None).await, StatusCode::CONFLICT, "accepted");
    assert_error(&post(&app, &format!("{uri}/accept"), None).await, StatusCode::CONFLICT, "accepted");
    let (status, _) = post(&app, &format!("/classify/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
}

/// The same requests against two fresh servers give identical responses.
#[tokio::test]
async fn responses_are_deterministic() {
    async fn script(app: &Router) -> Vec<Value> {
        let mut out = Vec::new();
        let id = create(app, "Same", &["w11", "w12"]).await;
        out.push(patch(app, &format!("/queries/{id}"), json!({ "op": "add_term", "term": "w13" })).await.1);
        out.push(post(app, &format!("/queries/{id}/descend"), None).await.1);
        out.push(get(app, &format!("/queries/{id}/hits?order=asc")).await.1);
        out.push(post(app, &format!("/classify/{id}"), None).await.1);
        out.push(get(app, "/neighbors?terms=w11,w13&k=10").await.1);
        out.push(get(app, &format!("/queries/{id}/history")).await.1);
        out.push(get(app, "/session").await.1);
        out
    }
    assert_eq!(script(&app()).await, script(&app()).await);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_are_serialized() {
    let app = app();
    let id = create(&app, "Busy", &["w00"]).await;
    let mut tasks = Vec::new();
    for i in 0..40 {
        let app = app.clone();
        let uri = format!("/queries/{id}");
        tasks.push(tokio::spawn(async move {
            let body = if i % 3 == 0 {
                json!({ "op": "set_threshold", "threshold": 0.3 + f64::from(i) / 100.0 })
            } else if i % 3 == 1 {
                json!({ "op": "add_term", "term": word(1 + i as usize % 8) })
            } else {
                json!({ "op": "remove_term", "term": word(1 + i as usize % 8) })
            };
            patch(&app, &uri, body).await.0
        }));
    }
    let mut ok = 0;
    for t in tasks {
        let status = t.await.unwrap();
        assert!(status == StatusCode::OK || status.is_client_error(), "{status}");
        ok += usize::from(status == StatusCode::OK);
    }
    let (_, h) = get(&app, &format!("/queries/{id}/history")).await;
    let events = h["events"].as_array().unwrap();
    assert_eq!(events.len(), ok + 1);
    let seqs: Vec<u64> = events.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    let (_, d) = get(&app, &format!("/queries/{id}")).await;
    assert_eq!(h["replayed"]["terms"], d["terms"]);
    assert_eq!(h["replayed"]["threshold"], d["threshold"]);
    assert!(d["terms"].as_array().unwrap().len() <= 5);
}

#[tokio::test]
async fn session_log_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    let before = {
        let app = app_with(Session::open("analyst", &log).unwrap(), ServiceConfig::default());
        let id = create(&app, "Kept", &["w06"]).await;
        patch(&app, &format!("/queries/{id}"), json!({ "op": "add_term", "term": "w07" })).await;
        post(&app, &format!("/queries/{id}/descend"), None).await;
        patch(&app, &format!("/queries/{id}"), json!({ "op": "add_term", "term": "nope" })).await;
        create(&app, "Second", &["w08"]).await;
        (get(&app, "/session").await.1, get(&app, &format!("/queries/{id}/history")).await.1)
    };
    let app = app_with(Session::open("analyst", &log).unwrap(), ServiceConfig::default());
    assert_eq!(get(&app, "/session").await.1, before.0);
    assert_eq!(get(&app, "/queries/q1/history").await.1, before.1);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 4);
    let id = create(&app, "Third", &["w09"]).await;
    assert_eq!(id, "q3");
}

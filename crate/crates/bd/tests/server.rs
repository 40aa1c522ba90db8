mod support;

use std::path::Path;
use std::sync::{Arc, OnceLock};

use bd::app;
use bd::config::AppConfig;
use bd::server::{self, AppState};
use bd_core::clock::Clock;
use bd_core::rag::{BackendError, LlmBackend, StubBackend};
use reqwest::blocking::{Client, Response};
use serde_json::{json, Value};
use support::Workspace;

struct Running {
    base: String,
    client: Client,
    _ws: Workspace,
}

/// One server over the fixture index, shared by every test in this file.
fn server() -> &'static Running {
    static SERVER: OnceLock<Running> = OnceLock::new();
    SERVER.get_or_init(|| {
        let ws = Workspace::new("[server]\ncors_origins = [\"http://ui.test\"]\n");
        let config = AppConfig::load(Some(&ws.config), &[], Path::new("/")).unwrap();
        let (index, _) = app::ingest(&config).unwrap();
        let curated = app::curate(&config, &index).unwrap();
        let clock = Clock::Fixed(support::EPOCH.parse().unwrap());
        let generator = app::build_generator(&config, &index, Arc::new(StubBackend), clock).unwrap();
        let state = Arc::new(AppState::new(config, index, generator, curated, clock));
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                server::run(listener, state, std::future::pending()).await.unwrap();
            });
        });
        Running { base, client: Client::new(), _ws: ws }
    })
}

fn get(path: &str) -> Response {
    let s = server();
    s.client.get(format!("{}{path}", s.base)).send().unwrap()
}

fn get_json(path: &str) -> (u16, Value) {
    let r = get(path);
    let status = r.status().as_u16();
    (status, r.json().unwrap())
}

#[test]
fn health() {
    let (status, body) = get_json("/api/health");
    assert_eq!(status, 200);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["docs"], json!([2000, 2000]));
    assert!(body["terms"].as_u64().unwrap() > 1000);
    assert_eq!(body["communities"][1], json!({ "slot": 2, "name": "Democrat" }));
    assert_eq!(body["backend"], "stub-v1");
}

#[test]
fn stats_contract() {
    let (status, body) = get_json("/api/stats?term=zephyr");
    assert_eq!(status, 200);
    assert_eq!(body["doc_count"], json!([3, 0]));
    assert_eq!(body["rate_per_k"], json!([1.5, 0.0]));
    assert_eq!(body["share"], json!([1.0, 0.0]));
    assert_eq!(body["sentiment_mean"][1], Value::Null);
    assert_eq!(body["comparative"]["higher_rate"], json!(1));

    let (_, body) = get_json("/api/stats?term=Budget+Vote");
    assert_eq!(body["term"], "budget vote");
    assert_eq!(body["rate_per_k"], json!([12.0, 11.5]));
    assert_eq!(body["share"], json!([0.511, 0.489]));

    let (_, body) = get_json("/api/stats?term=nothing+like+this");
    assert_eq!(body["doc_count"], json!([0, 0]));
    assert_eq!(body["share"], Value::Null);
    assert_eq!(body["comparative"]["higher_rate"], "tie");
}

#[test]
fn empty_queries_are_400() {
    for path in ["/api/stats?term=", "/api/stats", "/api/stats?term=%20%20", "/api/summary?term=&community=1"] {
        let (status, body) = get_json(path);
        assert_eq!(status, 400, "{path}");
        assert_eq!(body, json!({ "error": "empty query", "code": "empty_query" }), "{path}");
    }
}

#[test]
fn bad_parameters_are_400() {
    let (status, body) = get_json("/api/summary?term=zephyr&community=3");
    assert_eq!(status, 400);
    assert_eq!(body["code"], "bad_community");
    let (status, _) = get_json("/api/samples?term=zephyr");
    assert_eq!(status, 400);
    let (status, body) = get_json("/api/scatter?term=zephyr&seed=abc");
    assert_eq!(status, 400);
    assert_eq!(body["code"], "bad_seed");
}

#[test]
fn unknown_api_path_is_json_404() {
    let (status, body) = get_json("/api/nope");
    assert_eq!(status, 404);
    assert_eq!(body["code"], "not_found");
}

#[test]
fn samples_are_capped_and_seeded() {
    let (status, body) = get_json("/api/samples?term=town+hall&community=1");
    assert_eq!(status, 200);
    assert_eq!(body["matches"], 200);
    assert_eq!(body["doc_ids"].as_array().unwrap().len(), 50);
    assert_eq!(body["texts"].as_array().unwrap().len(), 50);
    let (_, again) = get_json("/api/samples?term=town+hall&community=1");
    assert_eq!(body, again);
    let (_, other) = get_json("/api/samples?term=town+hall&community=1&seed=9");
    assert_ne!(body["doc_ids"], other["doc_ids"]);
    let (_, b) = get_json("/api/samples?term=zephyr&community=2");
    assert_eq!(b["doc_ids"], json!([]));
}

#[test]
fn summary_is_blind_and_grounded() {
    let r = get("/api/summary?term=gun+control&community=2&seed=5");
    assert_eq!(r.status(), 200);
    let body: Value = r.json().unwrap();
    assert_eq!(body["community"], 2);
    assert_eq!(body["display_name"], "Democrat");
    assert_eq!(body["kind"], "summary");
    let prompt = body["prompt"].as_str().unwrap().to_lowercase();
    for name in ["republican", "democrat", "rep", "dem"] {
        assert!(!prompt.split(|c: char| !c.is_alphanumeric()).any(|w| w == name), "{name} in prompt");
    }
    let provenance: Vec<&str> = body["provenance"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(provenance.len(), 50);
    let (_, samples) = get_json("/api/samples?term=gun+control&community=2&seed=5");
    assert_eq!(samples["doc_ids"], json!(provenance));

    let again = get("/api/summary?term=gun+control&community=2&seed=5");
    assert_eq!(again.headers()["x-bd-cache"], "hit");
    assert_eq!(again.json::<Value>().unwrap(), body);
}

#[test]
fn definition_and_alternatives() {
    let (status, body) = get_json("/api/definition?term=illegal+aliens&community=1");
    assert_eq!(status, 200);
    assert_eq!(body["kind"], "definition");
    assert!(!body["text"].as_str().unwrap().is_empty());

    let (status, body) = get_json("/api/alternatives?term=gun+control");
    assert_eq!(status, 200);
    assert_eq!(body["kind"], "alternatives");
    assert!(body.get("community").is_none());
    assert!(!body["alternatives"].as_array().unwrap().is_empty());
    assert_eq!(body["provenance"].as_array().unwrap().len(), 100);
}

#[test]
fn zero_matches_are_insufficient_data() {
    for path in [
        "/api/summary?term=nothing+like+this&community=1",
        "/api/definition?term=zephyr&community=2",
        "/api/alternatives?term=zephyr",
        "/api/scatter?term=nothing+like+this",
    ] {
        let (status, body) = get_json(path);
        assert_eq!(status, 422, "{path}");
        assert_eq!(body["code"], "insufficient_data", "{path}");
    }
}

#[test]
fn scatter_payload() {
    let (status, body) = get_json("/api/scatter?term=this+week");
    assert_eq!(status, 200);
    let n = body["x"].as_array().unwrap().len();
    assert_eq!(n, 80);
    for key in ["y", "label", "community", "doc_id", "text"] {
        assert_eq!(body[key].as_array().unwrap().len(), n, "{key}");
    }
    let labels: std::collections::BTreeSet<i64> =
        body["label"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    assert_eq!(labels, [0, 1].into());
    assert_eq!(body["params"]["eps"], 0.15);
    assert_eq!(body["params"]["embedder"], "hashed-tfidf-d256");
    let within = |v: &Value| v.as_array().unwrap().iter().all(|x| x.as_f64().unwrap().abs() <= 1.0);
    assert!(within(&body["x"]) && within(&body["y"]));
}

#[test]
fn curated_list() {
    let (status, body) = get_json("/api/curated");
    assert_eq!(status, 200);
    assert_eq!(body["count"], 3);
    let terms: Vec<&str> = body["terms"].as_array().unwrap().iter().map(|t| t["term"].as_str().unwrap()).collect();
    assert_eq!(terms, ["illegal aliens", "undocumented workers", "gun control"]);
    assert_eq!(body["terms"][2]["trigger"], "sentiment");
}

#[test]
fn paper_edition_is_html() {
    let r = get("/api/paper-edition");
    assert_eq!(r.status(), 200);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/html"));
    let html = r.text().unwrap();
    assert!(html.contains("<h2") && html.contains("gun control"));
    assert!(html.contains("@media print"));
    assert_eq!(get("/api/paper-edition").text().unwrap(), html);
}

#[test]
fn cors_for_configured_origin() {
    let s = server();
    let r = s.client.get(format!("{}/api/health", s.base)).header("Origin", "http://ui.test").send().unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://ui.test");
    let r = s.client.get(format!("{}/api/health", s.base)).header("Origin", "http://other.test").send().unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
}

/// Signals when a completion starts, then takes a while to answer.
struct SlowBackend(std::sync::Mutex<std::sync::mpsc::Sender<()>>);

impl LlmBackend for SlowBackend {
    fn backend_id(&self) -> &str {
        "slow"
    }

    fn complete(&self, _prompt: &str, _model_id: &str, _seed: u64) -> Result<String, BackendError> {
        self.0.lock().unwrap().send(()).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(300));
        Ok("slow answer".to_string())
    }
}

#[test]
fn graceful_shutdown_finishes_in_flight_requests() {
    let ws = Workspace::new("");
    let config = AppConfig::load(Some(&ws.config), &[], Path::new("/")).unwrap();
    let (index, _) = app::ingest(&config).unwrap();
    let (entered_tx, entered) = std::sync::mpsc::channel();
    let backend = Arc::new(SlowBackend(std::sync::Mutex::new(entered_tx)));
    let generator = app::build_generator(&config, &index, backend, Clock::Fixed(0)).unwrap();
    let state = Arc::new(AppState::new(config, index, generator, vec![], Clock::Fixed(0)));
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (addr, handle) = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = tokio::spawn(server::run(listener, state, async {
            let _ = rx.await;
        }));
        (addr, handle)
    });
    let url = format!("http://{addr}/api/summary?term=town+hall&community=1");
    let request = std::thread::spawn(move || reqwest::blocking::get(url).and_then(|r| r.json::<Value>()));
    entered.recv().unwrap();
    tx.send(()).unwrap();
    let body = request.join().unwrap().unwrap();
    assert_eq!(body["text"], "slow answer");
    rt.block_on(handle).unwrap().unwrap();
    assert!(reqwest::blocking::get(format!("http://{addr}/api/health")).is_err());
}

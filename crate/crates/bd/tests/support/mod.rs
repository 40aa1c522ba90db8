#![allow(dead_code)]

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::Value;
use tempfile::TempDir;

pub const EPOCH: &str = "1700000000";

pub fn fixture_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus.jsonl").canonicalize().unwrap()
}

/// A temporary directory holding a config for the fixture corpus.
pub struct Workspace {
    pub dir: TempDir,
    pub config: PathBuf,
}

impl Workspace {
    pub fn new(extra: &str) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("bd.toml");
        let text = format!(
            "corpus_path = {:?}\nlabels = [\"rep\", \"dem\"]\ndisplay_names = [\"Republican\", \"Democrat\"]\n{extra}",
            fixture_corpus().display().to_string()
        );
        std::fs::write(&config, text).unwrap();
        Workspace { dir, config }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn command(&self, args: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bd"));
        cmd.arg("--config")
            .arg(&self.config)
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("BD_LLM_ENDPOINT")
            .env_remove("BD_LLM_API_KEY")
            .env_remove("BD_CONFIG")
            .env("SOURCE_DATE_EPOCH", EPOCH);
        cmd
    }

    pub fn bd(&self, args: &[&str]) -> Output {
        self.command(args).output().unwrap()
    }

    pub fn bd_with_llm(&self, args: &[&str], endpoint: &str) -> Output {
        self.command(args).env("BD_LLM_ENDPOINT", endpoint).output().unwrap()
    }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

type Responder = dyn Fn(&Value, usize) -> (u16, String) + Send + Sync;

/// OpenAI-compatible endpoint served from a background thread.
pub struct MockLlm {
    pub base: String,
    pub calls: Arc<AtomicUsize>,
}

#[derive(Clone)]
struct MockState {
    respond: Arc<Responder>,
    calls: Arc<AtomicUsize>,
}

async fn completions(State(s): State<MockState>, Json(body): Json<Value>) -> (StatusCode, String) {
    let n = s.calls.fetch_add(1, Ordering::SeqCst);
    let (status, text) = (s.respond)(&body, n);
    (StatusCode::from_u16(status).unwrap(), text)
}

/// `respond` gets the request body and the 0-based call number.
pub fn mock_llm(respond: impl Fn(&Value, usize) -> (u16, String) + Send + Sync + 'static) -> MockLlm {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    let calls = Arc::new(AtomicUsize::new(0));
    let state = MockState { respond: Arc::new(respond), calls: calls.clone() };
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(state);
            axum::serve(listener, app).await.unwrap();
        });
    });
    MockLlm { base, calls }
}

pub fn completion(content: &str) -> String {
    serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string()
}

pub fn prompt_of(body: &Value) -> &str {
    body["messages"][0]["content"].as_str().unwrap_or_default()
}

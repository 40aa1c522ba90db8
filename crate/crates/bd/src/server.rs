//! JSON API over a loaded index.
//!
//! All endpoints are GET. Communities appear as slots 1 and 2; display
//! names come from the config and never reach a prompt.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bd_core::clock::Clock;
use bd_core::curation::CuratedTerm;
use bd_core::edition::{self, Format};
use bd_core::rag::{
    parse_alternatives, sample_matches, GenerationError, GenerationKind, GenerationRequest, Generator, SampleSet,
};
use bd_core::scatter::{build_scatter, HashedTfidf, ScatterError};
use bd_core::{Community, InvertedIndex, TermStats};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::OnceCell;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::app::{self, AppError};
use crate::config::AppConfig;

pub struct AppState {
    pub config: AppConfig,
    pub index: Arc<InvertedIndex>,
    pub generator: Arc<Generator>,
    pub curated: Vec<CuratedTerm>,
    pub clock: Clock,
    edition: OnceCell<String>,
}

impl AppState {
    pub fn new(
        config: AppConfig,
        index: InvertedIndex,
        generator: Generator,
        curated: Vec<CuratedTerm>,
        clock: Clock,
    ) -> AppState {
        AppState {
            config,
            index: Arc::new(index),
            generator: Arc::new(generator),
            curated,
            clock,
            edition: OnceCell::new(),
        }
    }
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "code": self.code }))).into_response()
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> ApiError {
        if e.is_insufficient_data() {
            return ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", "insufficient data");
        }
        match e {
            GenerationError::Prompt(p) => ApiError::internal(p.to_string()),
            e => ApiError::new(StatusCode::BAD_GATEWAY, "generation_failed", e.to_string()),
        }
    }
}

impl From<ScatterError> for ApiError {
    fn from(e: ScatterError) -> ApiError {
        match e {
            ScatterError::InsufficientData | ScatterError::TooFewPoints { .. } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "insufficient_data",
                ScatterError::InsufficientData.to_string(),
            ),
            ScatterError::Index(e) => ApiError::bad_request("bad_query", e.to_string()),
            e => ApiError::internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Params(HashMap<String, String>);

impl Params {
    /// The trimmed `term`, which must contain at least one token.
    fn term(&self) -> ApiResult<String> {
        let term = self.0.get("term").map(|t| t.trim()).unwrap_or_default();
        if term.is_empty() || InvertedIndex::query_tokens(term).is_err() {
            return Err(ApiError::bad_request("empty_query", "empty query"));
        }
        Ok(term.to_string())
    }

    fn community(&self) -> ApiResult<Community> {
        let raw = self.0.get("community").ok_or_else(|| ApiError::bad_request("bad_community", "missing community"))?;
        raw.trim()
            .parse::<u8>()
            .ok()
            .and_then(Community::from_position)
            .ok_or_else(|| ApiError::bad_request("bad_community", format!("community must be 1 or 2, got {raw:?}")))
    }

    fn seed(&self, default: u64) -> ApiResult<u64> {
        match self.0.get("seed") {
            None => Ok(default),
            Some(raw) => {
                raw.trim().parse().map_err(|_| ApiError::bad_request("bad_seed", format!("invalid seed {raw:?}")))
            }
        }
    }
}

fn round(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    // `+ 0.0` turns -0.0 into 0.0.
    (x * scale).round() / scale + 0.0
}

/// TermStats and ComparativeView with boundary rounding: rates to 1
/// decimal, sentiment to 2, shares to 3.
pub fn stats_json(stats: &TermStats) -> Value {
    let cmp = stats.compare();
    json!({
        "term": stats.term,
        "doc_count": stats.doc_count,
        "rate_per_k": stats.rate_per_k.map(|&r| round(r, 1)),
        "share": stats.share.as_ref().map(|s| s.map(|&v| round(v, 3))),
        "sentiment_mean": stats.sentiment_mean.map(|s| s.map(|v| round(v, 2))),
        "comparative": {
            "higher_rate": cmp.higher_rate,
            "higher_sentiment": serde_json::to_value(&cmp).expect("serializable")["higher_sentiment"],
            "rate_delta": round(cmp.rate_delta, 1),
            "sentiment_delta": cmp.sentiment_delta.map(|d| round(d, 2)),
        },
    })
}

fn communities(config: &AppConfig) -> Value {
    json!([
        { "slot": 1, "name": config.display_names[0] },
        { "slot": 2, "name": config.display_names[1] },
    ])
}

async fn health(State(state): State<Shared>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "docs": state.index.totals(),
        "terms": state.index.term_count(),
        "communities": communities(&state.config),
        "backend": state.generator.backend_id(),
    }))
}

async fn stats(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let term = Params(q).term()?;
    let stats = state.index.term_stats(&term).map_err(|e| ApiError::bad_request("empty_query", e.to_string()))?;
    Ok(Json(stats_json(&stats)))
}

fn sample(state: &AppState, term: &str, community: Community, seed: u64) -> ApiResult<SampleSet> {
    sample_matches(&state.index, term, community, state.config.rag.cap, seed)
        .map_err(|e| ApiError::bad_request("bad_query", e.to_string()))
}

async fn samples(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<SampleSet>> {
    let params = Params(q);
    let (term, community, seed) = (params.term()?, params.community()?, params.seed(state.config.rag.seed)?);
    Ok(Json(sample(&state, &term, community, seed)?))
}

/// Runs one generation on the blocking pool. The cache-hit flag goes into a
/// header so bodies stay identical between cold and warm caches.
async fn generate(state: Shared, request: GenerationRequest, display: Option<Community>) -> ApiResult<Response> {
    let generator = state.generator.clone();
    let generated = tokio::task::spawn_blocking(move || generator.cached_generate(&request))
        .await
        .map_err(|e| ApiError::internal(format!("generation task: {e}")))??;
    let r = generated.result;
    let mut body = json!({
        "term": r.request.term,
        "kind": r.request.kind,
        "seed": r.request.seed,
        "model_id": r.request.model_id,
        "text": r.output,
        "truncated": r.truncated,
        "provenance": r.provenance,
        "backend_id": r.backend_id,
        "template_version": r.template_version,
        "created_at": r.created_at,
        "prompt": r.prompt,
    });
    if let Some(c) = display {
        body["community"] = json!(c.position());
        body["display_name"] = json!(state.config.display_names[c.index()]);
    }
    if r.request.kind == GenerationKind::Alternatives {
        body["alternatives"] = json!(parse_alternatives(&r.output));
    }
    let mut response = Json(body).into_response();
    let cache = if generated.cache_hit { "hit" } else { "miss" };
    response.headers_mut().insert("x-bd-cache", HeaderValue::from_static(cache));
    Ok(response)
}

async fn single(state: Shared, q: HashMap<String, String>, kind: GenerationKind) -> ApiResult<Response> {
    let params = Params(q);
    let (term, community, seed) = (params.term()?, params.community()?, params.seed(state.config.rag.seed)?);
    let set = sample(&state, &term, community, seed)?;
    let request = GenerationRequest::single(kind, set, &state.config.rag.model_id, seed);
    generate(state, request, Some(community)).await
}

async fn summary(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    single(state, q, GenerationKind::Summary).await
}

async fn definition(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    single(state, q, GenerationKind::Definition).await
}

async fn alternatives(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    let params = Params(q);
    let (term, seed) = (params.term()?, params.seed(state.config.rag.seed)?);
    let a = sample(&state, &term, Community::A, seed)?;
    let b = sample(&state, &term, Community::B, seed)?;
    let request = GenerationRequest::alternatives(a, b, &state.config.rag.model_id, seed);
    generate(state, request, None).await
}

async fn scatter(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    let params = Params(q);
    let (term, seed) = (params.term()?, params.seed(state.config.rag.seed)?);
    let embedder = HashedTfidf { dim: state.config.scatter.d };
    let payload =
        build_scatter(&state.index, &term, seed, state.config.rag.cap, &embedder, state.config.cluster_params())?;
    Ok(Json(payload).into_response())
}

async fn curated(State(state): State<Shared>) -> Json<Value> {
    let terms: Vec<Value> = state
        .curated
        .iter()
        .map(|t| {
            json!({
                "term": t.term,
                "trigger": t.score.trigger,
                "freq_z": round(t.score.freq_z, 3),
                "sent_gap": t.score.sent_gap.map(|g| round(g, 3)),
                "rank_key": round(t.rank_key, 3),
            })
        })
        .collect();
    Json(json!({ "count": terms.len(), "terms": terms }))
}

async fn paper_edition(State(state): State<Shared>) -> ApiResult<Html<String>> {
    if state.curated.is_empty() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "no_curated_terms", "no curated terms"));
    }
    let html = state
        .edition
        .get_or_try_init(|| async {
            let worker = state.clone();
            tokio::task::spawn_blocking(move || {
                let s = &*worker;
                app::assemble_edition(&s.config, &s.index, &s.curated, &s.generator, s.clock)
                    .map(|e| edition::render(&e, Format::Html))
            })
            .await
            .map_err(|e| ApiError::internal(format!("edition task: {e}")))?
            .map_err(|e| match e {
                AppError::Generation(m) => ApiError::new(StatusCode::BAD_GATEWAY, "generation_failed", m),
                e => ApiError::internal(e.to_string()),
            })
        })
        .await?;
    Ok(Html(html.clone()))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods([Method::GET]).allow_headers([header::CONTENT_TYPE]);
    if origins.iter().any(|o| o == "*") {
        return layer.allow_origin(Any);
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    layer.allow_origin(AllowOrigin::list(list))
}

pub fn router(state: Shared) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/stats", get(stats))
        .route("/summary", get(summary))
        .route("/definition", get(definition))
        .route("/alternatives", get(alternatives))
        .route("/scatter", get(scatter))
        .route("/samples", get(samples))
        .route("/paper-edition", get(paper_edition))
        .route("/curated", get(curated))
        .fallback(api_not_found);
    let mut app = Router::new().nest("/api", api);
    if let Some(dir) = &state.config.server.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(cors(&state.config.server.cors_origins)).layer(TraceLayer::new_for_http()).with_state(state)
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn run(
    listener: TcpListener,
    state: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn termination() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

/// Binds the configured address and serves until a termination signal.
/// `on_bound` receives the actual address (useful with port 0).
pub fn serve_blocking(state: AppState, on_bound: impl FnOnce(SocketAddr)) -> Result<(), AppError> {
    let state = Arc::new(state);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::Other(format!("runtime: {e}")))?;
    let result = runtime.block_on(async {
        let addr = format!("{}:{}", state.config.server.bind, state.config.server.port);
        let listener =
            TcpListener::bind(&addr).await.map_err(|e| AppError::Bind(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| AppError::Bind(e.to_string()))?;
        tracing::info!(%local, "listening");
        on_bound(local);
        run(listener, state.clone(), termination()).await.map_err(|e| AppError::Other(format!("server: {e}")))
    });
    drop(runtime);
    // The live backend's blocking client must be dropped outside the runtime.
    drop(state);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_at_the_boundary() {
        assert_eq!(round(1.25, 1), 1.3);
        assert_eq!(round(-0.001, 2), 0.0);
        assert!(round(-0.001, 2).is_sign_positive());
        assert_eq!(round(2.0 / 3.0, 3), 0.667);
    }

    #[test]
    fn stats_json_shape() {
        let stats = TermStats::from_parts(
            "t".into(),
            bd_core::PerCommunity::new(3, 0),
            bd_core::PerCommunity::new(2000, 2000),
            bd_core::PerCommunity::new(0.5, 0.0),
        );
        let v = stats_json(&stats);
        assert_eq!(v["rate_per_k"], json!([1.5, 0.0]));
        assert_eq!(v["share"], json!([1.0, 0.0]));
        assert_eq!(v["sentiment_mean"], json!([0.17, null]));
        assert_eq!(v["comparative"]["higher_rate"], json!(1));
        assert_eq!(v["comparative"]["higher_sentiment"], json!("undefined"));
        assert_eq!(v["comparative"]["sentiment_delta"], Value::Null);
    }
}

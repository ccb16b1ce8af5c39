//! JSON-over-HTTP front end for compiling rule trees, running training jobs
//! and streaming their reward curves.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /api/domains` | checks and actions offered per domain |
//! | `POST /api/compile` | validate and compile a treespec-v1 document |
//! | `POST /api/train` | queue a training job from a run configuration |
//! | `GET /api/jobs/{id}` | job state and per-seed summaries |
//! | `GET /api/jobs/{id}/metrics?since=&wait_ms=` | reward-curve points, long-polled |
//! | `POST /api/jobs/{id}/evaluate` | evaluate a finished job's policy |

mod jobs;
mod vocab;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use prolonet::baselines::check_tree_domain;
use prolonet::compile::{compile_tree, TreeSpecDoc};
use prolonet::envs::ActionMode;
use prolonet::run::eval_seed;
use prolonet::train::evaluate;
use prolonet::{Domain, RunConfig};

pub use jobs::{JobSnapshot, JobState, MetricPoint};
pub use vocab::{vocabulary, CheckOption, DomainVocabulary};

/// Environment variable holding the default bind address.
pub const BIND_ENV: &str = "PROLONET_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Jobs allowed to train at once; later jobs wait in the queue.
    pub max_concurrent_jobs: usize,
    /// Where jobs write metrics and checkpoints. Nothing is written without it.
    pub data_dir: Option<PathBuf>,
    /// Upper bound on a metrics long-poll.
    pub max_wait: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_concurrent_jobs: 1,
            data_dir: None,
            max_wait: Duration::from_secs(30),
        }
    }
}

struct AppState {
    config: ServiceConfig,
    jobs: jobs::JobStore,
    permits: Arc<Semaphore>,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("invalid request")]
    BadRequest(Vec<String>),
    #[error("unknown job {0}")]
    NotFound(u64),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    errors: Vec<String>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, errors) = match self {
            ApiError::BadRequest(errors) => (StatusCode::BAD_REQUEST, errors),
            e @ ApiError::NotFound(_) => (StatusCode::NOT_FOUND, vec![e.to_string()]),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, vec![m]),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, vec![m]),
        };
        (status, Json(ErrorBody { errors })).into_response()
    }
}

fn bad(message: impl Into<String>) -> ApiError {
    ApiError::BadRequest(vec![message.into()])
}

fn tree_errors(e: prolonet::Error) -> ApiError {
    match e {
        prolonet::Error::InvalidTree(problems) => ApiError::BadRequest(problems),
        other => bad(other.to_string()),
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        permits: Arc::new(Semaphore::new(config.max_concurrent_jobs.max(1))),
        config,
        jobs: jobs::JobStore::default(),
    });
    Router::new()
        .route("/api/domains", get(domains))
        .route("/api/compile", post(compile))
        .route("/api/train", post(train))
        .route("/api/jobs/{id}", get(job_status))
        .route("/api/jobs/{id}/metrics", get(metrics))
        .route("/api/jobs/{id}/evaluate", post(evaluate_job))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}

#[derive(Serialize)]
struct DomainsBody {
    domains: Vec<DomainVocabulary>,
}

async fn domains() -> Json<DomainsBody> {
    Json(DomainsBody {
        domains: Domain::ALL.into_iter().map(vocabulary).collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompileSummary {
    pub nodes: usize,
    pub leaves: usize,
    pub summary: String,
    /// The compiled network in prolonet-v1 form.
    pub model: serde_json::Value,
}

async fn compile(body: Bytes) -> Result<Json<CompileSummary>, ApiError> {
    let doc: TreeSpecDoc =
        serde_json::from_slice(&body).map_err(|e| bad(format!("malformed tree: {e}")))?;
    let spec = doc.to_spec().map_err(ApiError::BadRequest)?;
    if let Some(domain) = doc.domain.as_deref().and_then(Domain::from_name) {
        check_tree_domain(&spec, domain).map_err(tree_errors)?;
    }
    let net = compile_tree(&spec, spec.feature_names.len(), spec.action_names.len())
        .map_err(|e| ApiError::Internal(format!("accepted tree failed to compile: {e}")))?;
    let model = serde_json::from_str(
        &net.to_json()
            .map_err(|e| ApiError::Internal(e.to_string()))?,
    )
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(CompileSummary {
        nodes: net.nodes().len(),
        leaves: net.leaves().len(),
        summary: net.size_summary(),
        model,
    }))
}

#[derive(Serialize)]
struct Created {
    id: u64,
    state: JobState,
}

async fn train(
    State(app): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let config: RunConfig =
        serde_json::from_slice(&body).map_err(|e| bad(format!("malformed run config: {e}")))?;
    if config.tree.is_some() {
        return Err(bad(
            "send the tree inline as tree_spec; server-side paths are not accepted",
        ));
    }
    if config.out.is_some() {
        return Err(bad("out is chosen by the server"));
    }
    config.validate().map_err(|e| bad(e.to_string()))?;
    let tree = config.resolve_tree().map_err(tree_errors)?;
    let job = app
        .jobs
        .create(config, tree, app.config.data_dir.as_deref());
    let created = Created {
        id: job.id,
        state: job.state(),
    };
    let permits = app.permits.clone();
    tokio::spawn(async move {
        let Ok(_permit) = permits.acquire_owned().await else {
            job.fail("service is shutting down".into());
            return;
        };
        let worker = job.clone();
        if let Err(e) = tokio::task::spawn_blocking(move || worker.execute()).await {
            job.fail(format!("training thread stopped: {e}"));
        }
    });
    Ok((StatusCode::ACCEPTED, Json(created)))
}

fn find(app: &AppState, id: u64) -> Result<Arc<jobs::Job>, ApiError> {
    app.jobs.get(id).ok_or(ApiError::NotFound(id))
}

async fn job_status(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Json<JobSnapshot>, ApiError> {
    Ok(Json(find(&app, id)?.snapshot()))
}

#[derive(Debug, Default, Deserialize)]
struct MetricsQuery {
    #[serde(default)]
    since: usize,
    /// Milliseconds to wait for new points when none are available yet.
    #[serde(default)]
    wait_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsPage {
    pub state: JobState,
    pub points: Vec<MetricPoint>,
    /// Pass as `since` to continue the stream.
    pub next: usize,
}

async fn metrics(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<MetricsQuery>,
) -> Result<Json<MetricsPage>, ApiError> {
    let job = find(&app, id)?;
    let deadline =
        tokio::time::Instant::now() + Duration::from_millis(q.wait_ms).min(app.config.max_wait);
    loop {
        let changed = job.changed();
        let (state, points) = job.points_since(q.since);
        let finished = matches!(state, JobState::Done | JobState::Failed);
        if !points.is_empty() || finished || tokio::time::Instant::now() >= deadline {
            let next = q.since + points.len();
            return Ok(Json(MetricsPage {
                state,
                points,
                next,
            }));
        }
        let _ = tokio::time::timeout_at(deadline, changed).await;
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    episodes: usize,
    /// Which seed's policy; the first seed when absent.
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateResult {
    pub seed: u64,
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_length: f64,
    /// Wildfire only: mean drone-to-fire distance.
    pub mean_fire_distance: Option<f64>,
}

async fn evaluate_job(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<EvaluateResult>, ApiError> {
    let job = find(&app, id)?;
    let req: EvaluateRequest =
        serde_json::from_slice(&body).map_err(|e| bad(format!("malformed request: {e}")))?;
    if req.episodes == 0 {
        return Err(bad("episodes must be at least 1"));
    }
    let state = job.state();
    if state != JobState::Done {
        return Err(ApiError::Conflict(
            format!("job {id} is {state:?}, not done").to_lowercase(),
        ));
    }
    let (seed, agent) = job
        .agent(req.seed)
        .ok_or_else(|| bad(format!("job {id} has no seed {:?}", req.seed)))?;
    let domain = job.config.domain;
    let eval = tokio::task::spawn_blocking(move || {
        evaluate(
            &agent,
            domain,
            req.episodes,
            eval_seed(seed),
            ActionMode::Sample,
        )
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(EvaluateResult {
        seed,
        episodes: eval.episodes,
        mean_reward: eval.mean_reward,
        std_reward: eval.std_reward,
        mean_length: eval.mean_length,
        mean_fire_distance: eval.mean_diagnostic,
    }))
}

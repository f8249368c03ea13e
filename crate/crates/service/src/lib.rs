//! HTTP + WebSocket backend for the training environment.
//!
//! Scenarios, live demonstration sessions, strategies, checks and
//! refinement steps. State lives in memory; scenarios, trajectories,
//! strategies and results are also written under a data directory.

mod api;
pub mod error;
mod scenario;
pub mod session;
pub mod store;
mod ws;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::routing::{get, post};
use axum::Router;
use hilsynth::training::{Outcome, TrainingSet, Trajectory};
use hilsynth::ObservationStrategy;
use tokio::sync::Semaphore;

pub use error::ApiError;
pub use scenario::{Compiled, Scenario};
pub use session::{Frame, KnownMap, Session};
pub use store::Store;

/// Upper bound on concurrently running check/refine jobs.
pub const WORKERS: usize = 4;

pub(crate) enum Job {
    Pending,
    Done(serde_json::Value),
    Failed(ApiError),
}

/// Refinement state between a refine step and its immersion sessions.
pub(crate) struct RefineContext {
    pub scenario: Arc<Scenario>,
    pub base: String,
    pub current_id: String,
    pub current: ObservationStrategy,
    /// Per-state probabilities of the checked strategy; fixed for the step.
    pub probs: Vec<f64>,
    pub critical: Vec<usize>,
    pub sessions_applied: usize,
}

#[derive(Default)]
pub(crate) struct Inner {
    pub scenarios: BTreeMap<String, Arc<Scenario>>,
    pub next_scenario: u64,
    pub sessions: BTreeMap<String, Session>,
    pub next_session: u64,
    pub attached: std::collections::BTreeSet<String>,
    pub training: TrainingSet,
    pub jobs: BTreeMap<String, Job>,
    pub next_job: u64,
    pub refines: BTreeMap<String, RefineContext>,
    pub next_refine: u64,
}

pub struct AppState {
    pub store: Store,
    inner: Mutex<Inner>,
    workers: Semaphore,
}

impl AppState {
    /// Opens the data directory and reloads scenarios and completed
    /// trajectories from it.
    pub fn open(data_dir: impl AsRef<Path>) -> std::io::Result<Arc<Self>> {
        let store = Store::open(data_dir)?;
        let mut inner = Inner::default();
        for (name, text) in store.list("scenarios")? {
            if let Ok(sc) = Scenario::from_stored(&name, &text) {
                let n: u64 = name.trim_start_matches("sc-").parse().unwrap_or(0);
                inner.next_scenario = inner.next_scenario.max(n);
                inner.scenarios.insert(name, Arc::new(sc));
            }
        }
        for (name, text) in store.list("trajectories")? {
            if let Ok(t) = serde_json::from_str::<Trajectory>(&text) {
                if t.outcome != Outcome::Abort {
                    let _ = inner.training.record(&t);
                }
                let n: u64 = name.trim_start_matches("se-").parse().unwrap_or(0);
                inner.next_session = inner.next_session.max(n);
            }
        }
        Ok(Arc::new(AppState { store, inner: Mutex::new(inner), workers: Semaphore::new(WORKERS) }))
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Snapshot of the active training set.
    pub fn training_set(&self) -> TrainingSet {
        self.lock().training.clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", post(api::create_scenario))
        .route("/scenarios/{id}", get(api::get_scenario))
        .route("/scenarios/{id}/sessions", post(api::open_session))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/act", post(api::act))
        .route("/sessions/{id}/abort", post(api::abort))
        .route("/sessions/{id}/trajectory", get(api::get_trajectory))
        .route("/sessions/{id}/ws", get(ws::upgrade))
        .route("/training-set", get(api::training_set))
        .route("/strategies", post(api::put_strategy))
        .route("/strategies/clone", post(api::clone_strategy))
        .route("/strategies/{id}", get(api::get_strategy))
        .route("/checks", post(api::check))
        .route("/refine-steps", post(api::refine_step))
        .route("/refines/{id}", get(api::get_refine))
        .route("/results/{id}", get(api::get_result))
        .route("/jobs/{id}", get(api::get_job))
        .route("/heatmap", get(api::heatmap))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: impl AsRef<Path>) -> std::io::Result<()> {
    let state = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

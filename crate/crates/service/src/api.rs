use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use hilsynth::cloning::{scenario_independent_strategy, Provenance, StrategyFile};
use hilsynth::features::ClassTable;
use hilsynth::gridworld::Action;
use hilsynth::refine::{apply_session, critical_states};
use hilsynth::training::{Outcome, TrainingSet};
use hilsynth::verify::{check_spec, heatmap_from, reach_avoid_prob, Verdict};
use hilsynth::{ObservationStrategy, SpecKind};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::scenario::{Compiled, Scenario, ScenarioRequest};
use crate::session::{session_seed, valid_start, Session};
use crate::{AppState, Inner, Job, RefineContext};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    match payload {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::JsonDataError(e)) => Err(ApiError::invalid(e.body_text())),
        Err(e) => Err(ApiError::bad_request(e.body_text())),
    }
}

fn json_text(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn scenario(inner: &Inner, id: &str) -> ApiResult<Arc<Scenario>> {
    inner.scenarios.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("scenario {id}")))
}

// ---- scenarios ----

pub async fn create_scenario(
    State(app): Shared,
    payload: Result<Json<ScenarioRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let mut inner = app.lock();
    let id = format!("sc-{}", inner.next_scenario + 1);
    let sc = Scenario::from_request(id.clone(), req)?;
    inner.next_scenario += 1;
    let canonical = sc.canonical();
    app.store.put("scenarios", &id, &serde_json::to_string_pretty(&canonical).expect("json"))?;
    inner.scenarios.insert(id, Arc::new(sc));
    Ok((StatusCode::CREATED, Json(canonical)).into_response())
}

pub async fn get_scenario(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let sc = scenario(&app.lock(), &id)?;
    Ok(Json(sc.canonical()))
}

// ---- sessions ----

#[derive(Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum OpenSession {
    Fresh,
    Immersion {
        state_id: usize,
        #[serde(default)]
        refine: Option<String>,
    },
}

pub async fn open_session(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<OpenSession>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let mut inner = app.lock();
    let sc = scenario(&inner, &id)?;
    let config = sc.config().ok_or_else(|| ApiError::invalid("sessions need a gridworld scenario"))?.clone();
    let (start, refine) = match req {
        OpenSession::Fresh => (None, None),
        OpenSession::Immersion { state_id, refine } => {
            let s = sc
                .grid_state(state_id)
                .filter(|&s| valid_start(&config, s))
                .ok_or_else(|| ApiError::invalid(format!("state {state_id} is not a valid start")))?;
            if let Some(r) = &refine {
                let ctx = inner.refines.get(r).ok_or_else(|| ApiError::not_found(format!("refine {r}")))?;
                if ctx.scenario.id != sc.id {
                    return Err(ApiError::invalid(format!("refine {r} belongs to scenario {}", ctx.scenario.id)));
                }
            }
            (Some(s), refine)
        }
    };
    inner.next_session += 1;
    let sid = format!("se-{}", inner.next_session);
    let seed = session_seed(config.rng_seed, sc.next_session_counter());
    let session = Session::new(sid.clone(), sc.id.clone(), config, seed, start, refine);
    let frame = session.frame();
    inner.sessions.insert(sid, session);
    Ok((StatusCode::CREATED, Json(frame)).into_response())
}

pub async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<crate::Frame>> {
    let inner = app.lock();
    let s = inner.sessions.get(&id).ok_or_else(|| ApiError::not_found(format!("session {id}")))?;
    Ok(Json(s.frame()))
}

#[derive(Deserialize)]
pub struct ActRequest {
    pub action: String,
}

pub fn parse_action(name: &str) -> ApiResult<Action> {
    name.parse().map_err(|_| ApiError::bad_request(format!("illegal action {name:?}")))
}

/// Applies one action; shared by HTTP and WebSocket.
pub fn step_session(app: &AppState, id: &str, action: &str) -> ApiResult<crate::Frame> {
    let mut inner = app.lock();
    let session = inner.sessions.get_mut(id).ok_or_else(|| ApiError::not_found(format!("session {id}")))?;
    let action = parse_action(action)?;
    let frame = session.act(action).map_err(|_| ApiError::conflict("session_closed", format!("session {id} is closed")))?;
    if frame.terminal.is_some() {
        finish(app, &mut inner, id)?;
    }
    Ok(frame)
}

/// Marks an open session aborted and persists it.
pub fn abort_session(app: &AppState, id: &str) -> ApiResult<crate::Frame> {
    let mut inner = app.lock();
    let session = inner.sessions.get_mut(id).ok_or_else(|| ApiError::not_found(format!("session {id}")))?;
    if !session.is_open() {
        return Err(ApiError::conflict("session_closed", format!("session {id} is closed")));
    }
    session.abort();
    let frame = session.frame();
    finish(app, &mut inner, id)?;
    Ok(frame)
}

/// Persists a closed session, records it into the training set and feeds
/// its refinement context.
fn finish(app: &AppState, inner: &mut Inner, id: &str) -> ApiResult<()> {
    let session = &inner.sessions[id];
    let trajectory = session.trajectory();
    let refine = session.refine.clone();
    app.store.put("trajectories", id, &(trajectory.to_json_line()))?;
    if trajectory.outcome == Outcome::Abort {
        return Ok(());
    }
    inner.training.record(&trajectory).map_err(|e| ApiError::internal(e.to_string()))?;
    if let Some(r) = refine {
        let ctx = inner.refines.get_mut(&r).ok_or_else(|| ApiError::not_found(format!("refine {r}")))?;
        let compiled = ctx.scenario.compiled()?;
        let updated = apply_session(compiled.pomdp(), &ctx.current, &trajectory, &ctx.probs)?;
        ctx.current_id = store_strategy(app, &updated)?;
        ctx.current = updated;
        ctx.sessions_applied += 1;
    }
    Ok(())
}

pub async fn act(
    State(app): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ActRequest>, JsonRejection>,
) -> ApiResult<Json<crate::Frame>> {
    let req = body(payload).map_err(|e| ApiError::bad_request(e.message))?;
    Ok(Json(step_session(&app, &id, &req.action)?))
}

pub async fn abort(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<crate::Frame>> {
    Ok(Json(abort_session(&app, &id)?))
}

pub async fn get_trajectory(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let inner = app.lock();
    let s = inner.sessions.get(&id);
    if s.is_some_and(Session::is_open) {
        return Err(ApiError::conflict("session_open", format!("session {id} is still open")));
    }
    match app.store.get("trajectories", &id)? {
        Some(text) => Ok(json_text(StatusCode::OK, text)),
        None => Err(ApiError::not_found(format!("trajectory {id}"))),
    }
}

pub async fn training_set(State(app): Shared) -> Response {
    let csv = app.training_set().to_csv();
    ([(header::CONTENT_TYPE, "text/csv")], csv).into_response()
}

// ---- strategies ----

fn store_file(app: &AppState, file: &StrategyFile) -> ApiResult<String> {
    Ok(app.store.put_hashed("strategies", &file.to_text())?)
}

fn store_strategy(app: &AppState, strategy: &ObservationStrategy) -> ApiResult<String> {
    store_file(app, &StrategyFile::new(strategy, &Action::names(), None))
}

pub async fn put_strategy(
    State(app): Shared,
    payload: Result<Json<StrategyFile>, JsonRejection>,
) -> ApiResult<Response> {
    let file = body(payload)?;
    file.strategy()?;
    let id = store_file(&app, &file)?;
    Ok((StatusCode::CREATED, Json(json!({ "v": 1, "id": id })).into_response()).into_response())
}

pub async fn get_strategy(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    match app.store.get("strategies", &id)? {
        Some(text) => Ok(json_text(StatusCode::OK, text)),
        None => Err(ApiError::not_found(format!("strategy {id}"))),
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CloneRequest {
    /// Training set as CSV; the active set when absent.
    #[serde(default)]
    pub training_set: Option<String>,
}

pub async fn clone_strategy(
    State(app): Shared,
    payload: Result<Json<CloneRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = match payload {
        Err(JsonRejection::MissingJsonContentType(_)) => CloneRequest::default(),
        other => body(other)?,
    };
    let ts = match req.training_set {
        Some(csv) => TrainingSet::from_csv(&csv).map_err(|e| ApiError::invalid(e.to_string()))?,
        None => app.training_set(),
    };
    let classes = ClassTable::by_features();
    let strategy = scenario_independent_strategy(&ts, &classes);
    let file = StrategyFile::new(&strategy, &Action::names(), Some(Provenance::new(&ts, &classes)));
    let id = store_file(&app, &file)?;
    Ok((StatusCode::CREATED, Json(json!({ "v": 1, "id": id, "samples": ts.size() }))).into_response())
}

fn load_strategy(app: &AppState, id: &str, compiled: &Compiled) -> ApiResult<ObservationStrategy> {
    let text = app.store.get("strategies", id)?.ok_or_else(|| ApiError::not_found(format!("strategy {id}")))?;
    let file = StrategyFile::from_text(&text)?;
    let strategy = file.strategy_for(compiled.pomdp().mdp().action_names())?;
    if let Some(v) = strategy.validate_for(compiled.pomdp()).first() {
        return Err(ApiError::invalid(format!("strategy does not fit the scenario: {v}")));
    }
    Ok(strategy)
}

// ---- jobs ----

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct SpecRequest {
    pub kind: SpecKind,
    pub threshold: f64,
}

impl Default for SpecRequest {
    fn default() -> Self {
        SpecRequest { kind: SpecKind::ReachAvoidProb, threshold: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub strategy: String,
    pub scenario: String,
    #[serde(default)]
    pub spec: SpecRequest,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineRequest {
    pub strategy: String,
    pub scenario: String,
    #[serde(default)]
    pub spec: SpecRequest,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

/// Registers a job and runs `work` on the blocking pool, bounded by the
/// worker semaphore.
fn spawn_job<F>(app: &Arc<AppState>, work: F) -> String
where
    F: FnOnce(&AppState) -> ApiResult<Value> + Send + 'static,
{
    let id = {
        let mut inner = app.lock();
        inner.next_job += 1;
        let id = format!("job-{}", inner.next_job);
        inner.jobs.insert(id.clone(), Job::Pending);
        id
    };
    let app = Arc::clone(app);
    let job = id.clone();
    tokio::spawn(async move {
        let _permit = app.workers.acquire().await.expect("semaphore open");
        let worker = Arc::clone(&app);
        let outcome = tokio::task::spawn_blocking(move || work(&worker))
            .await
            .unwrap_or_else(|e| Err(ApiError::internal(format!("job panicked: {e}"))));
        let state = match outcome {
            Ok(v) => Job::Done(v),
            Err(e) => Job::Failed(e),
        };
        app.lock().jobs.insert(job, state);
    });
    id
}

fn accepted(job: String) -> Response {
    (StatusCode::ACCEPTED, Json(json!({ "v": 1, "job": job, "status": "pending" }))).into_response()
}

/// Looks up scenario and strategy up front so missing refs are a 404 on
/// submission rather than a failed job.
fn resolve(app: &AppState, scenario_id: &str, strategy_id: &str) -> ApiResult<Arc<Scenario>> {
    let sc = scenario(&app.lock(), scenario_id)?;
    if app.store.get("strategies", strategy_id)?.is_none() {
        return Err(ApiError::not_found(format!("strategy {strategy_id}")));
    }
    Ok(sc)
}

pub async fn check(State(app): Shared, payload: Result<Json<CheckRequest>, JsonRejection>) -> ApiResult<Response> {
    let req = body(payload)?;
    let sc = resolve(&app, &req.scenario, &req.strategy)?;
    let job = spawn_job(&app, move |app| {
        let compiled = sc.compiled()?;
        let strategy = load_strategy(app, &req.strategy, &compiled)?;
        let spec = compiled.spec(req.spec.kind, req.spec.threshold)?;
        let mc = compiled.pomdp().induce_mc(&strategy)?;
        let r = check_spec(&mc, &spec)?;
        let mut result = json!({
            "v": 1,
            "scenario": sc.id,
            "strategy": req.strategy,
            "spec": { "kind": spec.kind, "threshold": spec.threshold },
            "prob": r.value_at_initial,
            "cost": r.conditional_expected_cost,
            "verdict": r.verdict,
            "states": mc.num_states(),
            "transitions": mc.num_transitions(),
            "residual": r.residual,
            "iterations": r.iterations,
        });
        let text = serde_json::to_string_pretty(&result).expect("json");
        result["result"] = json!(app.store.put_hashed("results", &text)?);
        Ok(result)
    });
    Ok(accepted(job))
}

pub async fn refine_step(
    State(app): Shared,
    payload: Result<Json<RefineRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let sc = resolve(&app, &req.scenario, &req.strategy)?;
    let job = spawn_job(&app, move |app| {
        let compiled = sc.compiled()?;
        let strategy = load_strategy(app, &req.strategy, &compiled)?;
        let spec = compiled.spec(req.spec.kind, req.spec.threshold)?;
        let mc = compiled.pomdp().induce_mc(&strategy)?;
        let check = check_spec(&mc, &spec)?;
        if check.verdict == Some(Verdict::Sat) {
            return Err(ApiError::conflict("no_counterexample_needed", "strategy already satisfies the specification")
                .with("prob", json!(check.value_at_initial)));
        }
        let cex = critical_states(&mc, &check, &spec, req.k).map_err(|e| ApiError::internal(e.to_string()))?;
        let critical: Vec<Value> =
            cex.critical_states.iter().map(|s| json!({ "state_id": s, "score": cex.scores[s] })).collect();
        // Immersion needs concrete grid states; model scenarios only get the ranking.
        let refine = match compiled.grid() {
            Some(_) => {
                let mut inner = app.lock();
                inner.next_refine += 1;
                let id = format!("rf-{}", inner.next_refine);
                inner.refines.insert(
                    id.clone(),
                    RefineContext {
                        scenario: Arc::clone(&sc),
                        base: req.strategy.clone(),
                        current_id: req.strategy.clone(),
                        current: strategy,
                        probs: check.per_state_prob.clone(),
                        critical: cex.critical_states.clone(),
                        sessions_applied: 0,
                    },
                );
                Some(id)
            }
            None => None,
        };
        let offers: Vec<Value> = match &refine {
            Some(r) => cex
                .critical_states
                .iter()
                .map(|s| json!({ "scenario": sc.id, "mode": "immersion", "state_id": s, "refine": r }))
                .collect(),
            None => Vec::new(),
        };
        Ok(json!({
            "v": 1,
            "scenario": sc.id,
            "strategy": req.strategy,
            "prob": check.value_at_initial,
            "cost": check.conditional_expected_cost,
            "critical_states": critical,
            "refine": refine,
            "offers": offers,
        }))
    });
    Ok(accepted(job))
}

pub async fn get_job(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let inner = app.lock();
    match inner.jobs.get(&id) {
        None => Err(ApiError::not_found(format!("job {id}"))),
        Some(Job::Pending) => Ok(accepted(id)),
        Some(Job::Done(v)) => Ok(Json(json!({ "v": 1, "job": id, "status": "done", "result": v })).into_response()),
        Some(Job::Failed(e)) => {
            let mut b = e.body();
            b["job"] = json!(id);
            b["status"] = json!("failed");
            Ok((e.status, Json(b)).into_response())
        }
    }
}

pub async fn get_refine(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let inner = app.lock();
    let ctx = inner.refines.get(&id).ok_or_else(|| ApiError::not_found(format!("refine {id}")))?;
    Ok(Json(json!({
        "v": 1,
        "id": id,
        "scenario": ctx.scenario.id,
        "base": ctx.base,
        "current": ctx.current_id,
        "critical_states": ctx.critical,
        "sessions_applied": ctx.sessions_applied,
    })))
}

pub async fn get_result(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    match app.store.get("results", &id)? {
        Some(text) => Ok(json_text(StatusCode::OK, text)),
        None => Err(ApiError::not_found(format!("result {id}"))),
    }
}

#[derive(Deserialize)]
pub struct HeatmapQuery {
    pub strategy: String,
    pub scenario: String,
    #[serde(default)]
    pub format: Option<String>,
}

pub async fn heatmap(State(app): Shared, Query(q): Query<HeatmapQuery>) -> ApiResult<Response> {
    let sc = resolve(&app, &q.scenario, &q.strategy)?;
    let worker = Arc::clone(&app);
    let strategy_id = q.strategy.clone();
    let map = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let compiled = sc.compiled()?;
        let grid = compiled.grid().ok_or_else(|| ApiError::invalid("heatmaps need a gridworld scenario"))?;
        let strategy = load_strategy(&worker, &strategy_id, &compiled)?;
        let mc = grid.pomdp.induce_mc(&strategy)?;
        let r = reach_avoid_prob(&mc, &grid.spec.bad, &grid.spec.goal)?;
        Ok(heatmap_from(grid, &r.per_state_prob)?)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    match q.format.as_deref() {
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], map.to_csv()).into_response()),
        None | Some("json") => {
            let mut v = json!(map);
            v["v"] = json!(1);
            v["grid"] = json!(map.grid());
            Ok(Json(v).into_response())
        }
        Some(other) => Err(ApiError::bad_request(format!("unknown format {other:?}"))),
    }
}

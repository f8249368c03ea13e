use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use hilsynth::format::{Model, ModelFile};
use hilsynth::gridworld::{build_pomdp, random_scenario, GridPomdp, GridState, ScenarioConfig, ScenarioRanges};
use hilsynth::{Pomdp, Spec, SpecKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;

/// Accepted `POST /scenarios` bodies.
#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub(crate) enum ScenarioRequest {
    Config { config: ScenarioConfig },
    Ranges { ranges: ScenarioRanges, seed: u64 },
    Model { model: ModelFile },
}

pub enum Source {
    Grid(ScenarioConfig),
    Model(ModelFile),
}

pub struct Scenario {
    pub id: String,
    pub source: Source,
    /// Extra canonical fields (`ranges`, `seed`) echoed back on GET.
    origin: Option<Value>,
    compiled: OnceLock<Result<Arc<Compiled>, ApiError>>,
    sessions: AtomicU64,
}

pub enum Compiled {
    Grid(GridPomdp),
    Model { pomdp: Pomdp, bad: BTreeSet<usize>, goal: BTreeSet<usize> },
}

impl Compiled {
    pub fn pomdp(&self) -> &Pomdp {
        match self {
            Compiled::Grid(g) => &g.pomdp,
            Compiled::Model { pomdp, .. } => pomdp,
        }
    }

    pub fn grid(&self) -> Option<&GridPomdp> {
        match self {
            Compiled::Grid(g) => Some(g),
            Compiled::Model { .. } => None,
        }
    }

    pub fn spec(&self, kind: SpecKind, threshold: f64) -> Result<Spec, ApiError> {
        let (bad, goal) = match self {
            Compiled::Grid(g) => (g.spec.bad.clone(), g.spec.goal.clone()),
            Compiled::Model { bad, goal, .. } => (bad.clone(), goal.clone()),
        };
        Ok(match kind {
            SpecKind::ReachAvoidProb => Spec::reach_avoid(bad, goal, threshold)?,
            SpecKind::ExpectedCost => Spec::expected_cost(bad, goal, threshold)?,
        })
    }
}

impl Scenario {
    pub(crate) fn from_request(id: String, req: ScenarioRequest) -> Result<Self, ApiError> {
        let (source, origin) = match req {
            ScenarioRequest::Config { config } => {
                config.validate()?;
                (Source::Grid(config), None)
            }
            ScenarioRequest::Ranges { ranges, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let config = random_scenario(&mut rng, &ranges)?;
                (Source::Grid(config), Some(json!({ "ranges": ranges, "seed": seed })))
            }
            ScenarioRequest::Model { model } => {
                // Validate eagerly so a bad model is a 422 at creation time.
                match model.clone().into_model()? {
                    Model::Pomdp(_) => {}
                    Model::Mdp(_) => return Err(ApiError::invalid("scenario model needs an observation per state")),
                }
                if !model.labels.contains_key("goal") {
                    return Err(ApiError::invalid("scenario model needs a \"goal\" label"));
                }
                (Source::Model(model), None)
            }
        };
        Ok(Scenario { id, source, origin, compiled: OnceLock::new(), sessions: AtomicU64::new(0) })
    }

    pub(crate) fn from_stored(id: &str, text: &str) -> Result<Self, ApiError> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| ApiError::invalid(e.to_string()))?;
        let obj = v.as_object_mut().ok_or_else(|| ApiError::invalid("not an object"))?;
        let origin = match (obj.remove("ranges"), obj.remove("seed")) {
            (Some(r), Some(s)) => Some(json!({ "ranges": r, "seed": s })),
            _ => None,
        };
        obj.remove("v");
        obj.remove("id");
        let req: ScenarioRequest = serde_json::from_value(v).map_err(|e| ApiError::invalid(e.to_string()))?;
        let source = match req {
            ScenarioRequest::Config { config } => Source::Grid(config),
            ScenarioRequest::Model { model } => Source::Model(model),
            ScenarioRequest::Ranges { .. } => return Err(ApiError::invalid("stored scenario lacks its config")),
        };
        Ok(Scenario { id: id.to_owned(), source, origin, compiled: OnceLock::new(), sessions: AtomicU64::new(0) })
    }

    /// `{v, id, config | model, [ranges, seed]}`.
    pub fn canonical(&self) -> Value {
        let mut v = match &self.source {
            Source::Grid(c) => json!({ "v": 1, "id": self.id, "config": c }),
            Source::Model(m) => json!({ "v": 1, "id": self.id, "model": m }),
        };
        if let (Some(obj), Some(Value::Object(extra))) = (v.as_object_mut(), &self.origin) {
            obj.extend(extra.clone());
        }
        v
    }

    pub fn config(&self) -> Option<&ScenarioConfig> {
        match &self.source {
            Source::Grid(c) => Some(c),
            Source::Model(_) => None,
        }
    }

    /// Compiles once; later calls share the result.
    pub fn compiled(&self) -> Result<Arc<Compiled>, ApiError> {
        self.compiled
            .get_or_init(|| {
                Ok(Arc::new(match &self.source {
                    Source::Grid(c) => Compiled::Grid(build_pomdp(c)?),
                    Source::Model(m) => {
                        let pomdp = match m.clone().into_model()? {
                            Model::Pomdp(p) => p,
                            Model::Mdp(_) => return Err(ApiError::invalid("model has no observations")),
                        };
                        let bad = pomdp.mdp().label("bad");
                        let goal = pomdp.mdp().label("goal");
                        Compiled::Model { pomdp, bad, goal }
                    }
                }))
            })
            .clone()
    }

    pub fn next_session_counter(&self) -> u64 {
        self.sessions.fetch_add(1, Ordering::Relaxed)
    }

    /// Decodes a gridworld state id (`agent_cell * cells + obstacle_cell`).
    pub fn grid_state(&self, state_id: usize) -> Option<GridState> {
        let c = self.config()?;
        let n = c.num_cells();
        (state_id < n * n).then(|| GridState { agent: c.pos(state_id / n), obstacle: c.pos(state_id % n) })
    }
}

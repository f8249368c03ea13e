//! Counterexample-guided refinement: rank critical states of the induced
//! chain, replay demonstrations from them, and shift each visited
//! observation's row towards the demonstrated action.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloning::strategy_hash;
use crate::error::{CheckError, ModelError, RefineError};
use crate::gridworld::{GridPomdp, GridState, ScenarioConfig};
use crate::model::{ActionId, Distribution, Mc, ObsId, ObservationStrategy, Pomdp, Spec, StateId};
use crate::training::{default_max_steps, run_episode, ScriptedDemonstrator, Trajectory};
use crate::verify::{check_spec, CheckResult, Verdict};

/// Floor on the denominator of the refinement weight.
pub const WEIGHT_FLOOR: f64 = 1e-3;

/// Critical states ranked by descending score, ties by state id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub critical_states: Vec<StateId>,
    pub scores: BTreeMap<StateId, f64>,
    pub strategy_snapshot: Option<String>,
}

/// Expected visits to every state from the initial state, treating `bad`,
/// `goal` and states that cannot succeed as absorbing.
pub fn occupancy(mc: &Mc, bad: &BTreeSet<StateId>, goal: &BTreeSet<StateId>, probs: &[f64]) -> Result<Vec<f64>, CheckError> {
    let n = mc.num_states();
    let absorbing = |s: StateId| bad.contains(&s) || goal.contains(&s) || probs[s] <= 0.0;
    let mut preds: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| !absorbing(s)) {
        for (t, p) in mc.row(s).iter() {
            preds[t].push((s, p));
        }
    }
    // forward breadth-first order from the initial state
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([mc.initial()]);
    seen[mc.initial()] = true;
    while let Some(s) = queue.pop_front() {
        order.push(s);
        if absorbing(s) {
            continue;
        }
        for t in mc.row(s).support() {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    let mut x = vec![0.0; n];
    let tolerance = 1e-10;
    for iterations in 0.. {
        if iterations >= 1_000_000 {
            return Err(CheckError::NoConvergence { iterations, residual: f64::NAN });
        }
        let mut residual: f64 = 0.0;
        for &s in &order {
            let start = if s == mc.initial() { 1.0 } else { 0.0 };
            let v = start + preds[s].iter().map(|&(t, p)| x[t] * p).sum::<f64>();
            residual = residual.max((v - x[s]).abs() / v.max(1.0));
            x[s] = v;
        }
        if residual <= tolerance {
            break;
        }
    }
    Ok(x)
}

/// The `k` reachable states outside `bad ∪ goal` with the largest expected
/// failure mass `occupancy · (1 − Pr_reach)`.
pub fn critical_states(mc: &Mc, check: &CheckResult, spec: &Spec, k: usize) -> Result<Counterexample, RefineError> {
    if check.verdict != Some(Verdict::Unsat) {
        return Err(RefineError::NoCounterexampleNeeded);
    }
    let probs = &check.per_state_prob;
    let occ = occupancy(mc, &spec.bad, &spec.goal, probs)?;
    let mut ranked: Vec<(StateId, f64)> = (0..mc.num_states())
        .filter(|s| !spec.bad.contains(s) && !spec.goal.contains(s) && occ[*s] > 0.0)
        .map(|s| (s, occ[s] * (1.0 - probs[s])))
        .filter(|&(_, score)| score > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(Counterexample {
        critical_states: ranked.iter().map(|r| r.0).collect(),
        scores: ranked.into_iter().collect(),
        strategy_snapshot: None,
    })
}

/// Weight per action: `1 / max(η, Σ_s Pr(s|z)·Pr_reach(s))` for `chosen`,
/// one for every other action.
pub fn refinement_weight(pomdp: &Pomdp, z: ObsId, chosen: ActionId, probs: &[f64]) -> Result<Vec<f64>, ModelError> {
    let prior = pomdp.observation_prior(z)?;
    let mass: f64 = prior.iter().map(|(s, p)| p * probs[s]).sum();
    let mut w = vec![1.0; pomdp.mdp().num_actions()];
    w[chosen] = 1.0 / mass.max(WEIGHT_FLOOR);
    Ok(w)
}

/// Multiplies row `z` by `weights` and renormalizes; other rows unchanged.
pub fn bayes_update(
    strategy: &ObservationStrategy,
    z: &str,
    weights: &[f64],
) -> Result<ObservationStrategy, ModelError> {
    let row = strategy.get(z).ok_or_else(|| ModelError::StrategyIncomplete(z.to_owned()))?;
    let weighted: Vec<(usize, f64)> = row.iter().map(|(a, p)| (a, p * weights.get(a).copied().unwrap_or(1.0))).collect();
    let c: f64 = weighted.iter().map(|e| e.1).sum();
    if !(c > 0.0) {
        return Err(ModelError::EmptySupport);
    }
    let mut out = strategy.clone();
    out.set(z, Distribution::from_raw(weighted.into_iter().map(|(a, p)| (a, p / c))));
    Ok(out)
}

/// Applies one completed session: each observation visited gets a single
/// update towards the action chosen at its last visit.
pub fn apply_session(
    pomdp: &Pomdp,
    strategy: &ObservationStrategy,
    trajectory: &Trajectory,
    probs: &[f64],
) -> Result<ObservationStrategy, ModelError> {
    let mut last: BTreeMap<String, ActionId> = BTreeMap::new();
    for step in &trajectory.steps {
        last.insert(step.obs.to_string(), step.action.id());
    }
    let mut out = strategy.clone();
    for (name, a) in last {
        let z = pomdp.observation_id(&name).ok_or_else(|| ModelError::UnknownObservation(name.clone()))?;
        let w = refinement_weight(pomdp, z, a, probs)?;
        out = bayes_update(&out, &name, &w)?;
    }
    Ok(out)
}

/// Source of demonstration sessions started at a given state.
pub trait Demonstrator {
    fn session(&mut self, config: &ScenarioConfig, start: GridState, session_id: &str) -> Result<Trajectory, RefineError>;
}

/// The scripted demonstrator with its own seeded random stream.
pub struct ScriptedSessions {
    pub demonstrator: ScriptedDemonstrator,
    rng: ChaCha8Rng,
}

impl ScriptedSessions {
    pub fn new(demonstrator: ScriptedDemonstrator, seed: u64) -> Self {
        ScriptedSessions { demonstrator, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Demonstrator for ScriptedSessions {
    fn session(&mut self, config: &ScenarioConfig, start: GridState, session_id: &str) -> Result<Trajectory, RefineError> {
        Ok(run_episode(config, start, &self.demonstrator, &mut self.rng, default_max_steps(config), session_id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_iters: usize,
    /// Critical states per iteration.
    pub k: usize,
    pub sessions_per_state: usize,
    /// Stop once the value changes by less than this between iterations.
    pub plateau: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { max_iters: 10, k: 5, sessions_per_state: 1, plateau: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub prob: f64,
    pub cost: Option<f64>,
    pub strategy_hash: String,
    /// Sessions that produced this iteration's strategy.
    pub num_sessions: usize,
    pub critical_states: Vec<StateId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Sat,
    MaxIters,
    Plateau,
    NoCandidates,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub strategy: ObservationStrategy,
    pub history: Vec<HistoryEntry>,
    /// Strategy checked at each history entry.
    pub snapshots: Vec<ObservationStrategy>,
    pub stop: StopReason,
}

/// A refinement run cut short; `history` holds the completed iterations.
#[derive(Debug)]
pub struct RefineAbort {
    pub error: RefineError,
    pub history: Vec<HistoryEntry>,
}

pub fn history_jsonl(history: &[HistoryEntry]) -> String {
    history.iter().map(|h| serde_json::to_string(h).expect("history serializes") + "\n").collect()
}

/// Check, extract critical states, replay sessions from them, update, and
/// repeat until the spec holds, `max_iters` refinements were made, or the
/// value plateaus.
pub fn refine_loop(
    grid: &GridPomdp,
    spec: &Spec,
    initial: ObservationStrategy,
    demonstrator: &mut dyn Demonstrator,
    opts: &RefineOptions,
) -> Result<RefineOutcome, RefineAbort> {
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut snapshots = Vec::new();
    let mut strategy = initial;
    let mut sessions = 0;
    let mut session_counter = 0;
    for iter in 0.. {
        let step = (|| -> Result<(Mc, CheckResult), RefineError> {
            let mc = grid.pomdp.induce_mc(&strategy)?;
            let check = check_spec(&mc, spec)?;
            Ok((mc, check))
        })();
        let (mc, check) = match step {
            Ok(v) => v,
            Err(error) => return Err(RefineAbort { error, history }),
        };
        let prev = history.last().map(|h| h.prob);
        history.push(HistoryEntry {
            iter,
            prob: check.value_at_initial,
            cost: check.conditional_expected_cost,
            strategy_hash: strategy_hash(&strategy),
            num_sessions: sessions,
            critical_states: Vec::new(),
        });
        snapshots.push(strategy.clone());
        let stop = if check.verdict == Some(Verdict::Sat) {
            Some(StopReason::Sat)
        } else if iter >= opts.max_iters {
            Some(StopReason::MaxIters)
        } else if prev.is_some_and(|p| (check.value_at_initial - p).abs() < opts.plateau) {
            Some(StopReason::Plateau)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(RefineOutcome { strategy, history, snapshots, stop });
        }
        let cex = match critical_states(&mc, &check, spec, opts.k) {
            Ok(c) => c,
            Err(error) => return Err(RefineAbort { error, history }),
        };
        let starts: Vec<GridState> = cex.critical_states.iter().filter_map(|&s| grid.grid_state(s)).collect();
        history.last_mut().expect("just pushed").critical_states = cex.critical_states;
        if starts.is_empty() {
            return Ok(RefineOutcome { strategy, history, snapshots, stop: StopReason::NoCandidates });
        }
        sessions = 0;
        for start in &starts {
            for _ in 0..opts.sessions_per_state {
                let id = format!("refine-{iter}-{session_counter}");
                session_counter += 1;
                let updated = demonstrator
                    .session(&grid.config, *start, &id)
                    .and_then(|t| Ok(apply_session(&grid.pomdp, &strategy, &t, &check.per_state_prob)?));
                match updated {
                    Ok(s) => strategy = s,
                    Err(error) => return Err(RefineAbort { error, history }),
                }
                sessions += 1;
            }
        }
    }
    unreachable!("loop returns")
}

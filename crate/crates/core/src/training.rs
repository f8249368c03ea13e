//! Demonstration data: the training set of observation/action counts,
//! trajectory logs, the Hoeffding sample-size bound, and a scripted
//! demonstrator that stands in for a human operator.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TrainingError;
use crate::gridworld::{
    classify, observe, simulate_step, Action, AgentStart, Event, GridState, ObsVector, Pos, ScenarioConfig,
    ScenarioRanges, NEIGHBOURS,
};

/// Counts of demonstrated actions per observation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingSet {
    counts: BTreeMap<ObsVector, [u64; 4]>,
    size: u64,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: ObsVector, a: Action, n: u64) {
        self.counts.entry(z).or_default()[a.id()] += n;
        self.size += n;
    }

    pub fn count(&self, z: ObsVector, a: Action) -> u64 {
        self.counts.get(&z).map_or(0, |row| row[a.id()])
    }

    /// Counts for every action at `z` (zeros when unseen).
    pub fn row(&self, z: ObsVector) -> [u64; 4] {
        self.counts.get(&z).copied().unwrap_or_default()
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn observations(&self) -> impl Iterator<Item = ObsVector> + '_ {
        self.counts.keys().copied()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Empirical action frequencies at `z`, if there is any data.
    pub fn conditional(&self, z: ObsVector) -> Option<[f64; 4]> {
        let row = self.counts.get(&z)?;
        let total: u64 = row.iter().sum();
        (total > 0).then(|| row.map(|c| c as f64 / total as f64))
    }

    /// Adds one count per step after checking the trajectory against its
    /// scenario.
    pub fn record(&mut self, trajectory: &Trajectory) -> Result<(), TrainingError> {
        trajectory.validate()?;
        for step in &trajectory.steps {
            self.add(step.obs, step.action, 1);
        }
        Ok(())
    }

    /// `obs_bits,action,count` rows for non-zero counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("obs_bits,action,count\n");
        for (z, row) in &self.counts {
            for a in Action::ALL {
                if row[a.id()] > 0 {
                    let _ = writeln!(out, "{z},{a},{}", row[a.id()]);
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TrainingError> {
        let mut ts = Self::new();
        let bad = |l: &str| TrainingError::InvalidParams(format!("malformed training-set row {l:?}"));
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let mut cols = line.split(',');
            let (Some(z), Some(a), Some(n), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(bad(line));
            };
            ts.add(z.parse().map_err(|_| bad(line))?, a.parse().map_err(|_| bad(line))?, n.parse().map_err(|_| bad(line))?);
        }
        Ok(ts)
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}

/// Smallest `n` with `n ≥ ln(2/δ) / (2ε²)`.
pub fn hoeffding_min_samples(epsilon: f64, delta: f64) -> Result<u64, TrainingError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TrainingError::InvalidParams(format!("epsilon {epsilon} outside (0,1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TrainingError::InvalidParams(format!("delta {delta} outside (0,1)")));
    }
    Ok(((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

/// Sample requirement after pooling with an assumed efficiency factor.
pub fn with_efficiency(samples: u64, factor: f64) -> Result<u64, TrainingError> {
    if !(factor >= 1.0) {
        return Err(TrainingError::InvalidParams(format!("efficiency factor {factor} below 1")));
    }
    Ok((samples as f64 / factor).ceil() as u64)
}

/// Largest change in any empirical action frequency between two snapshots,
/// over observations with data in both. Zero when they share none.
pub fn saturation_distance(before: &TrainingSet, after: &TrainingSet) -> f64 {
    before
        .observations()
        .filter_map(|z| Some((before.conditional(z)?, after.conditional(z)?)))
        .flat_map(|(p, q)| (0..4).map(move |i| (p[i] - q[i]).abs()))
        .fold(0.0, f64::max)
}

pub fn saturation_check(before: &TrainingSet, after: &TrainingSet, epsilon: f64) -> bool {
    saturation_distance(before, after) <= epsilon
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Goal,
    Crash,
    Abort,
}

/// One decision: the state it was taken in, what was observed, the action,
/// and the event the action caused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: GridState,
    pub obs: ObsVector,
    pub action: Action,
    pub event: Event,
}

/// A logged demonstration episode; serialized as one JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub session_id: String,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub steps: Vec<Step>,
    pub outcome: Outcome,
}

impl Trajectory {
    /// Checks observations, successor states and events against the
    /// scenario's dynamics.
    pub fn validate(&self) -> Result<(), TrainingError> {
        let reject = |i: usize, m: &str| Err(TrainingError::RejectedTrajectory(format!("step {i}: {m}")));
        let config = &self.scenario;
        config.validate().map_err(|e| TrainingError::RejectedTrajectory(e.to_string()))?;
        let last = self.steps.len().saturating_sub(1);
        for (i, step) in self.steps.iter().enumerate() {
            if !config.in_grid(step.state.agent) || !config.in_grid(step.state.obstacle) {
                return reject(i, "state outside the grid");
            }
            if observe(step.state, config) != step.obs {
                return reject(i, "observation does not match state");
            }
            if classify(step.state, config) != Event::None {
                return reject(i, "decision taken in a terminal state");
            }
            let agent = config.move_agent(step.state.agent, step.action);
            let moves = config.obstacle_moves(step.state.obstacle);
            let possible: BTreeSet<Event> =
                moves.iter().map(|&(o, _)| classify(GridState { agent, obstacle: o }, config)).collect();
            if !possible.contains(&step.event) {
                return reject(i, "event impossible after this action");
            }
            if i < last {
                let next = self.steps[i + 1].state;
                if next.agent != agent || !moves.iter().any(|&(o, _)| o == next.obstacle) {
                    return reject(i + 1, "state is not a successor of the previous step");
                }
                if step.event != Event::None {
                    return reject(i, "terminal event before the last step");
                }
            }
        }
        let final_event = self.steps.last().map_or(Event::None, |s| s.event);
        let consistent = matches!(
            (self.outcome, final_event),
            (Outcome::Goal, Event::Goal) | (Outcome::Crash, Event::Crash) | (Outcome::Abort, Event::None)
        );
        if !consistent {
            return reject(last, "outcome does not match the final event");
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }
}

pub fn read_log(text: &str) -> Result<Vec<Trajectory>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub fn write_log(trajectories: &[Trajectory]) -> String {
    trajectories.iter().map(|t| t.to_json_line() + "\n").collect()
}

/// Training set rebuilt from trajectory logs.
pub fn training_set_from(trajectories: &[Trajectory]) -> Result<TrainingSet, TrainingError> {
    let mut ts = TrainingSet::new();
    for t in trajectories {
        ts.record(t)?;
    }
    Ok(ts)
}

/// Bits set by walls and landmarks alone when the agent stands at `p`.
pub fn static_observation(p: Pos, config: &ScenarioConfig) -> ObsVector {
    let mut z = ObsVector::default();
    for (i, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
        let blocked = match p.offset(dx, dy, config.width, config.height) {
            None => true,
            Some(q) => config.is_landmark(q),
        };
        z.set(i + 1, blocked);
    }
    z
}

/// Whether standing at `p` can produce `z`: the static bits must all be set
/// and at most one more bit can come from the obstacle.
fn consistent(p: Pos, z: ObsVector, config: &ScenarioConfig) -> bool {
    let s = static_observation(p, config).index();
    let z = z.index();
    s & !z == 0 && (z & !s).count_ones() <= 1
}

/// The demonstrator's belief over its own cell, from the known static map
/// and the observations seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    /// Uniform over landmark-free cells consistent with `z`.
    pub fn initial(config: &ScenarioConfig, z: ObsVector) -> Self {
        let mut probs: Vec<f64> =
            config.cells().map(|p| if !config.is_landmark(p) && consistent(p, z, config) { 1.0 } else { 0.0 }).collect();
        if probs.iter().all(|&p| p == 0.0) {
            probs = config.cells().map(|p| if config.is_landmark(p) { 0.0 } else { 1.0 }).collect();
        }
        let mut b = Belief { probs };
        b.normalize();
        b
    }

    pub fn concentrated(config: &ScenarioConfig, p: Pos) -> Self {
        let mut probs = vec![0.0; config.num_cells()];
        probs[config.cell(p)] = 1.0;
        Belief { probs }
    }

    fn normalize(&mut self) {
        let total: f64 = self.probs.iter().sum();
        if total > 0.0 {
            self.probs.iter_mut().for_each(|p| *p /= total);
        }
    }

    pub fn prob(&self, config: &ScenarioConfig, p: Pos) -> f64 {
        self.probs[config.cell(p)]
    }

    /// Most likely cell and its mass; ties go to the lowest cell index.
    pub fn mode(&self, config: &ScenarioConfig) -> (Pos, f64) {
        let (c, &p) = self
            .probs
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        (config.pos(c), p)
    }

    fn shifted(&self, config: &ScenarioConfig, action: Action) -> Vec<f64> {
        let mut next = vec![0.0; self.probs.len()];
        for (c, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                next[config.cell(config.move_agent(config.pos(c), action))] += p;
            }
        }
        next
    }

    /// Moves the belief with `action` and conditions it on `z`. Falls back to
    /// a fresh belief when no cell explains `z`.
    pub fn update(&mut self, config: &ScenarioConfig, action: Action, z: ObsVector) {
        let mut next = self.shifted(config, action);
        for (c, p) in next.iter_mut().enumerate() {
            let pos = config.pos(c);
            if config.is_landmark(pos) || !consistent(pos, z, config) {
                *p = 0.0;
            }
        }
        if next.iter().all(|&p| p == 0.0) {
            *self = Belief::initial(config, z);
        } else {
            self.probs = next;
            self.normalize();
        }
    }
}

fn entropy(probs: impl Iterator<Item = f64>) -> f64 {
    -probs.filter(|&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Shortest landmark-avoiding path lengths to the goal.
pub fn goal_distances(config: &ScenarioConfig) -> Vec<usize> {
    let mut dist = vec![usize::MAX; config.num_cells()];
    let mut queue = VecDeque::from([config.goal]);
    dist[config.cell(config.goal)] = 0;
    while let Some(p) = queue.pop_front() {
        let d = dist[config.cell(p)];
        for a in Action::ALL {
            let (dx, dy) = a.delta();
            if let Some(q) = p.offset(dx, dy, config.width, config.height) {
                if !config.is_landmark(q) && dist[config.cell(q)] == usize::MAX {
                    dist[config.cell(q)] = d + 1;
                    queue.push_back(q);
                }
            }
        }
    }
    dist
}

/// A synthetic operator. While unsure of its position it moves to where the
/// next observation is expected to be most informative; once the belief
/// mode reaches `confidence` it descends the goal distance. Actions into
/// observed-occupied cells are never chosen unless every neighbour is
/// occupied. With probability `noise` it picks a random safe action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedDemonstrator {
    pub noise: f64,
    pub confidence: f64,
}

impl Default for ScriptedDemonstrator {
    fn default() -> Self {
        ScriptedDemonstrator { noise: 0.1, confidence: 0.9 }
    }
}

impl ScriptedDemonstrator {
    pub fn with_noise(noise: f64) -> Self {
        ScriptedDemonstrator { noise, ..Self::default() }
    }

    pub fn choose<R: Rng + ?Sized>(&self, config: &ScenarioConfig, belief: &Belief, z: ObsVector, rng: &mut R) -> Action {
        let safe: Vec<Action> = Action::ALL.into_iter().filter(|a| !z.get(a.target_bit())).collect();
        if safe.is_empty() {
            return Action::ALL[rng.random_range(0..4)];
        }
        // draw unconditionally so the random stream does not depend on branch
        let u: f64 = rng.random();
        let pick = rng.random_range(0..safe.len());
        if u < self.noise {
            return safe[pick];
        }
        let dist = goal_distances(config);
        let (mode, mass) = belief.mode(config);
        let safe = least_threatened(config, mode, z, &safe);
        let cost = |p: Pos| dist[config.cell(p)] as f64;
        if mass >= self.confidence {
            return *safe
                .iter()
                .min_by(|a, b| cost(config.move_agent(mode, **a)).total_cmp(&cost(config.move_agent(mode, **b))))
                .expect("non-empty");
        }
        let score = |a: Action| {
            let shifted = belief.shifted(config, a);
            let mut groups: BTreeMap<ObsVector, Vec<f64>> = BTreeMap::new();
            let mut expected_cost = 0.0;
            for (c, &p) in shifted.iter().enumerate() {
                if p > 0.0 {
                    let pos = config.pos(c);
                    groups.entry(static_observation(pos, config)).or_default().push(p);
                    expected_cost += p * cost(pos).min(1e6);
                }
            }
            let h: f64 = groups
                .values()
                .map(|g| {
                    let m: f64 = g.iter().sum();
                    m * entropy(g.iter().map(|p| p / m))
                })
                .sum();
            (h, expected_cost)
        };
        *safe
            .iter()
            .min_by(|a, b| {
                let (ha, ca) = score(**a);
                let (hb, cb) = score(**b);
                ha.total_cmp(&hb).then(ca.total_cmp(&cb))
            })
            .expect("non-empty")
    }
}

/// Actions whose landing cell the visible moving obstacle cannot step
/// into next, or the least exposed ones when every action is exposed.
/// Occupied bits not explained by walls and landmarks around `at` are taken
/// to be the obstacle.
fn least_threatened(config: &ScenarioConfig, at: Pos, z: ObsVector, safe: &[Action]) -> Vec<Action> {
    let fixed = static_observation(at, config);
    let moving: Vec<(i64, i64)> =
        (1..=8).filter(|&i| z.get(i) && !fixed.get(i)).map(|i| NEIGHBOURS[i - 1]).collect();
    let exposure = |a: Action| {
        let (dx, dy) = if config.move_agent(at, a) == at { (0, 0) } else { a.delta() };
        moving.iter().filter(|&&(ox, oy)| (ox - dx).abs() + (oy - dy).abs() == 1).count()
    };
    let least = safe.iter().map(|&a| exposure(a)).min().unwrap_or(0);
    safe.iter().copied().filter(|&a| exposure(a) == least).collect()
}

/// Default step budget for one episode.
pub fn default_max_steps(config: &ScenarioConfig) -> usize {
    4 * config.num_cells()
}

/// Plays one episode from `start` until goal, crash or the step budget.
pub fn run_episode<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    start: GridState,
    demonstrator: &ScriptedDemonstrator,
    rng: &mut R,
    max_steps: usize,
    session_id: impl Into<String>,
) -> Trajectory {
    let mut state = start;
    let mut z = observe(state, config);
    let mut belief = Belief::initial(config, z);
    let mut steps = Vec::new();
    let mut outcome = Outcome::Abort;
    if classify(state, config) == Event::None {
        for _ in 0..max_steps {
            let action = demonstrator.choose(config, &belief, z, rng);
            let (next, event) = simulate_step(state, action, config, rng);
            steps.push(Step { state, obs: z, action, event });
            match event {
                Event::Goal => {
                    outcome = Outcome::Goal;
                    break;
                }
                Event::Crash => {
                    outcome = Outcome::Crash;
                    break;
                }
                Event::None => {}
            }
            state = next;
            z = observe(state, config);
            belief.update(config, action, z);
        }
    }
    Trajectory { session_id: session_id.into(), scenario: config.clone(), seed: None, steps, outcome }
}

/// Uniformly chosen start for a scenario, honouring a fixed agent start.
pub fn sample_start<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> GridState {
    let agent = match config.agent_start {
        AgentStart::Fixed(p) => p,
        AgentStart::Random => {
            let free = config.free_cells();
            free[rng.random_range(0..free.len())]
        }
    };
    GridState { agent, obstacle: config.obstacle_start }
}

/// Runs episodes on freshly sampled scenarios until the training set holds
/// at least `target` samples.
pub fn collect_demonstrations<R: Rng + ?Sized>(
    ranges: &ScenarioRanges,
    demonstrator: &ScriptedDemonstrator,
    target: u64,
    rng: &mut R,
) -> Result<(TrainingSet, Vec<Trajectory>), crate::error::ScenarioError> {
    let mut ts = TrainingSet::new();
    let mut log = Vec::new();
    while ts.size() < target {
        let config = crate::gridworld::random_scenario(rng, ranges)?;
        let start = sample_start(&config, rng);
        let t = run_episode(&config, start, demonstrator, rng, default_max_steps(&config), format!("demo-{}", log.len()));
        ts.record(&t).expect("simulated trajectories are consistent");
        log.push(t);
    }
    Ok((ts, log))
}

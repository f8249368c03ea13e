//! Gridworld scenarios: an agent, one randomly moving obstacle, static
//! landmarks and a goal cell.
//!
//! States are pairs (agent cell, obstacle cell) over the whole grid plus one
//! absorbing crash sink. The agent moves deterministically; moving into a
//! wall leaves it in place. Then the obstacle moves uniformly to one of its
//! in-grid, landmark-free 4-neighbours (staying put only when none exists).
//! A state whose agent shares a cell with the obstacle or a landmark is a
//! collision and leads to the sink; goal states are absorbing.
//!
//! The agent observes its 8-neighbourhood: bit `i` of the observation is set
//! when neighbour `i` is outside the grid, a landmark, or the obstacle.
//! Neighbours are numbered counter-clockwise from down-left:
//!
//! ```text
//!   3 4 5
//!   2 . 6
//!   1 8 7
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::model::{ActionId, Distribution, Mdp, Pomdp, Spec, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Pos { x, y }
    }

    /// Neighbour at offset `(dx, dy)` if it is inside a `width × height` grid.
    pub fn offset(self, dx: i64, dy: i64, width: usize, height: usize) -> Option<Pos> {
        let x = self.x as i64 + dx;
        let y = self.y as i64 + dy;
        (x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height).then(|| Pos::new(x as usize, y as usize))
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl From<[usize; 2]> for Pos {
    fn from([x, y]: [usize; 2]) -> Self {
        Pos { x, y }
    }
}

impl From<Pos> for [usize; 2] {
    fn from(p: Pos) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// One-step agent moves. Ids follow declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn id(self) -> ActionId {
        self as ActionId
    }

    pub fn from_id(id: ActionId) -> Option<Action> {
        Self::ALL.get(id).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, 1),
            Action::Down => (0, -1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Left => "left",
            Action::Right => "right",
            Action::Up => "up",
            Action::Down => "down",
        }
    }

    /// Observation bit (1-based) covering the cell this action moves into.
    pub fn target_bit(self) -> usize {
        match self {
            Action::Left => 2,
            Action::Up => 4,
            Action::Right => 6,
            Action::Down => 8,
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|a| a.name().to_owned()).collect()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown action {s:?}"))
    }
}

/// A fixed-width observation bit vector. Bit `i` (1-based) is `O_i`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObsBits<const N: usize> {
    bits: u32,
}

/// Visibility-1 observations.
pub type ObsVector = ObsBits<8>;

impl<const N: usize> ObsBits<N> {
    pub const WIDTH: usize = N;

    pub fn from_index(bits: u32) -> Self {
        assert!(N <= 32 && (N == 32 || bits < (1u32 << N)));
        ObsBits { bits }
    }

    pub fn index(self) -> usize {
        self.bits as usize
    }

    pub fn from_set(set: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::default();
        for i in set {
            v.set(i, true);
        }
        v
    }

    pub fn get(self, i: usize) -> bool {
        assert!((1..=N).contains(&i));
        self.bits & (1 << (i - 1)) != 0
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!((1..=N).contains(&i));
        if on {
            self.bits |= 1 << (i - 1);
        } else {
            self.bits &= !(1 << (i - 1));
        }
    }

    pub fn bit(self, i: usize) -> i64 {
        self.get(i) as i64
    }

    pub fn count(self) -> u32 {
        self.bits.count_ones()
    }

    /// Every vector of this width, in index order.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..(1u64 << N)).map(|b| ObsBits { bits: b as u32 })
    }
}

impl<const N: usize> fmt::Display for ObsBits<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=N {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl<const N: usize> fmt::Debug for ObsBits<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObsBits({self})")
    }
}

impl<const N: usize> FromStr for ObsBits<N> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != N {
            return Err(format!("expected {N} bits, got {s:?}"));
        }
        let mut v = Self::default();
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i + 1, true),
                _ => return Err(format!("invalid bit {c:?} in {s:?}")),
            }
        }
        Ok(v)
    }
}

impl<const N: usize> Serialize for ObsBits<N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, const N: usize> Deserialize<'de> for ObsBits<N> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Offsets of the eight neighbours, indexed by observation bit - 1.
pub const NEIGHBOURS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AgentStart {
    #[default]
    Random,
    Fixed(Pos),
}

impl Serialize for AgentStart {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AgentStart::Random => s.serialize_str("random"),
            AgentStart::Fixed(p) => p.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for AgentStart {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Keyword(String),
            At([usize; 2]),
        }
        match Repr::deserialize(d)? {
            Repr::Keyword(k) if k == "random" => Ok(AgentStart::Random),
            Repr::Keyword(k) => Err(serde::de::Error::custom(format!("unknown agent_start {k:?}"))),
            Repr::At(p) => Ok(AgentStart::Fixed(p.into())),
        }
    }
}

fn one() -> u8 {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One concrete gridworld instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub landmarks: Vec<Pos>,
    pub obstacle_start: Pos,
    pub goal: Pos,
    pub agent_start: AgentStart,
    #[serde(default = "one")]
    pub visibility: u8,
    pub rng_seed: u64,
    /// Reserved for multi-obstacle families; must be empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_obstacles: Vec<Pos>,
    /// Test hook: the obstacle never moves.
    #[serde(default, skip_serializing_if = "is_false")]
    pub frozen_obstacle: bool,
}

impl ScenarioConfig {
    pub fn new(width: usize, height: usize, goal: Pos, obstacle_start: Pos) -> Self {
        ScenarioConfig {
            width,
            height,
            landmarks: Vec::new(),
            obstacle_start,
            goal,
            agent_start: AgentStart::Random,
            visibility: 1,
            rng_seed: 0,
            extra_obstacles: Vec::new(),
            frozen_obstacle: false,
        }
    }

    pub fn with_landmarks(mut self, landmarks: impl IntoIterator<Item = Pos>) -> Self {
        self.landmarks = landmarks.into_iter().collect();
        self
    }

    pub fn with_start(mut self, start: Pos) -> Self {
        self.agent_start = AgentStart::Fixed(start);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidScenario(m));
        if self.width < 3 || self.height < 3 {
            return bad(format!("grid {}x{} smaller than 3x3", self.width, self.height));
        }
        if self.visibility != 1 {
            return bad(format!("visibility {} unsupported", self.visibility));
        }
        if !self.extra_obstacles.is_empty() {
            return bad("only one dynamic obstacle is supported".into());
        }
        let mut positions = vec![("goal", self.goal), ("obstacle_start", self.obstacle_start)];
        positions.extend(self.landmarks.iter().map(|&l| ("landmark", l)));
        if let AgentStart::Fixed(p) = self.agent_start {
            positions.push(("agent_start", p));
        }
        for (what, p) in positions {
            if !self.in_grid(p) {
                return bad(format!("{what} {p} outside the grid"));
            }
        }
        if self.is_landmark(self.goal) {
            return bad("goal on a landmark".into());
        }
        if self.obstacle_start == self.goal {
            return bad("obstacle starts on the goal".into());
        }
        if self.is_landmark(self.obstacle_start) {
            return bad("obstacle starts on a landmark".into());
        }
        if let AgentStart::Fixed(p) = self.agent_start {
            if self.is_landmark(p) {
                return bad("agent starts on a landmark".into());
            }
            if p == self.obstacle_start {
                return bad("agent starts on the obstacle".into());
            }
        }
        Ok(())
    }

    pub fn in_grid(&self, p: Pos) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn is_landmark(&self, p: Pos) -> bool {
        self.landmarks.contains(&p)
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, p: Pos) -> usize {
        p.y * self.width + p.x
    }

    pub fn pos(&self, cell: usize) -> Pos {
        Pos::new(cell % self.width, cell / self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.num_cells()).map(|c| self.pos(c))
    }

    /// Cells where a session may start: not a landmark, not the obstacle.
    pub fn free_cells(&self) -> Vec<Pos> {
        self.cells().filter(|&p| !self.is_landmark(p) && p != self.obstacle_start).collect()
    }

    /// Where the agent lands after `action`; walls block.
    pub fn move_agent(&self, agent: Pos, action: Action) -> Pos {
        let (dx, dy) = action.delta();
        agent.offset(dx, dy, self.width, self.height).unwrap_or(agent)
    }

    /// Moves of the obstacle from `obstacle` with their probabilities.
    pub fn obstacle_moves(&self, obstacle: Pos) -> Vec<(Pos, f64)> {
        if self.frozen_obstacle {
            return vec![(obstacle, 1.0)];
        }
        let legal: Vec<Pos> = Action::ALL
            .iter()
            .filter_map(|a| {
                let (dx, dy) = a.delta();
                obstacle.offset(dx, dy, self.width, self.height)
            })
            .filter(|&p| !self.is_landmark(p))
            .collect();
        if legal.is_empty() {
            return vec![(obstacle, 1.0)];
        }
        let p = 1.0 / legal.len() as f64;
        legal.into_iter().map(|q| (q, p)).collect()
    }

    pub fn is_collision(&self, state: GridState) -> bool {
        state.agent == state.obstacle || self.is_landmark(state.agent)
    }

    /// Initial state for a fixed start.
    pub fn start_state(&self) -> Option<GridState> {
        match self.agent_start {
            AgentStart::Fixed(agent) => Some(GridState { agent, obstacle: self.obstacle_start }),
            AgentStart::Random => None,
        }
    }
}

/// Agent and obstacle positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct GridState {
    pub agent: Pos,
    pub obstacle: Pos,
}

impl GridState {
    pub fn new(agent: Pos, obstacle: Pos) -> Self {
        GridState { agent, obstacle }
    }
}

impl From<[usize; 4]> for GridState {
    fn from([xa, ya, xo, yo]: [usize; 4]) -> Self {
        GridState { agent: Pos::new(xa, ya), obstacle: Pos::new(xo, yo) }
    }
}

impl From<GridState> for [usize; 4] {
    fn from(s: GridState) -> Self {
        [s.agent.x, s.agent.y, s.obstacle.x, s.obstacle.y]
    }
}

impl fmt::Display for GridState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.agent.x, self.agent.y, self.obstacle.x, self.obstacle.y)
    }
}

pub fn observe(state: GridState, config: &ScenarioConfig) -> ObsVector {
    let mut z = ObsVector::default();
    for (i, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
        let occupied = match state.agent.offset(dx, dy, config.width, config.height) {
            None => true,
            Some(p) => p == state.obstacle || config.is_landmark(p),
        };
        z.set(i + 1, occupied);
    }
    z
}

/// Obstacle successor distribution over cell indices.
pub fn obstacle_step(obstacle: Pos, config: &ScenarioConfig) -> Distribution {
    Distribution::from_raw(config.obstacle_moves(obstacle).into_iter().map(|(p, q)| (config.cell(p), q)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    None,
    Crash,
    Goal,
}

/// Outcome classification of a state reached after a step.
pub fn classify(state: GridState, config: &ScenarioConfig) -> Event {
    if config.is_collision(state) {
        Event::Crash
    } else if state.agent == config.goal {
        Event::Goal
    } else {
        Event::None
    }
}

/// Samples one step of the live dynamics: the agent moves, then the obstacle.
pub fn simulate_step<R: Rng + ?Sized>(
    state: GridState,
    action: Action,
    config: &ScenarioConfig,
    rng: &mut R,
) -> (GridState, Event) {
    let agent = config.move_agent(state.agent, action);
    let moves = config.obstacle_moves(state.obstacle);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut obstacle = moves[moves.len() - 1].0;
    for (p, q) in &moves {
        acc += q;
        if u < acc {
            obstacle = *p;
            break;
        }
    }
    let next = GridState { agent, obstacle };
    (next, classify(next, config))
}

/// Name of the crash sink's observation.
pub const CRASH_OBSERVATION: &str = "crash";

/// A scenario compiled into a POMDP with its reach-avoid sets.
#[derive(Clone, Debug)]
pub struct GridPomdp {
    pub config: ScenarioConfig,
    pub pomdp: Pomdp,
    pub spec: Spec,
}

impl GridPomdp {
    pub fn num_cells(&self) -> usize {
        self.config.num_cells()
    }

    pub fn sink(&self) -> StateId {
        self.num_cells() * self.num_cells()
    }

    pub fn state_id(&self, s: GridState) -> StateId {
        self.config.cell(s.agent) * self.num_cells() + self.config.cell(s.obstacle)
    }

    /// `None` for the crash sink.
    pub fn grid_state(&self, id: StateId) -> Option<GridState> {
        let n = self.num_cells();
        (id < n * n).then(|| GridState { agent: self.config.pos(id / n), obstacle: self.config.pos(id % n) })
    }

    /// The same model started at `agent` with the obstacle at its start cell.
    pub fn with_start(&self, agent: Pos) -> Result<GridPomdp, ScenarioError> {
        let mut config = self.config.clone();
        config.agent_start = AgentStart::Fixed(agent);
        config.validate()?;
        let initial = self.state_id(GridState { agent, obstacle: config.obstacle_start });
        let pomdp = self.pomdp.clone().with_initial(initial).map_err(|e| ScenarioError::InvalidScenario(e.to_string()))?;
        Ok(GridPomdp { config, pomdp, spec: self.spec.clone() })
    }
}

/// Compiles a scenario. With a random agent start the initial state is the
/// first free cell; use [`GridPomdp::with_start`] to enumerate the others.
pub fn build_pomdp(config: &ScenarioConfig) -> Result<GridPomdp, ScenarioError> {
    config.validate()?;
    let n = config.num_cells();
    let sink = n * n;
    let id = |s: GridState| config.cell(s.agent) * n + config.cell(s.obstacle);
    let obstacle_rows: Vec<Vec<(usize, f64)>> =
        (0..n).map(|c| config.obstacle_moves(config.pos(c)).into_iter().map(|(p, q)| (config.cell(p), q)).collect()).collect();

    let mut choices = Vec::with_capacity(sink + 1);
    let mut names = Vec::with_capacity(sink + 1);
    let mut obs = Vec::with_capacity(sink + 1);
    let mut bad = BTreeSet::from([sink]);
    let mut goal = BTreeSet::new();
    let all_actions = |d: Distribution| Action::ALL.iter().map(|a| (a.id(), d.clone())).collect::<Vec<_>>();

    for agent_cell in 0..n {
        for obstacle_cell in 0..n {
            let s = GridState { agent: config.pos(agent_cell), obstacle: config.pos(obstacle_cell) };
            let here = id(s);
            names.push(s.to_string());
            obs.push(observe(s, config).to_string());
            let row = match classify(s, config) {
                Event::Crash => {
                    bad.insert(here);
                    all_actions(Distribution::dirac(sink))
                }
                Event::Goal => {
                    goal.insert(here);
                    all_actions(Distribution::dirac(here))
                }
                Event::None => Action::ALL
                    .iter()
                    .map(|&a| {
                        let agent = config.cell(config.move_agent(s.agent, a));
                        let row = obstacle_rows[obstacle_cell].iter().map(|&(o, q)| (agent * n + o, q));
                        (a.id(), Distribution::from_raw(row))
                    })
                    .collect(),
            };
            choices.push(row);
        }
    }
    names.push("crash".to_owned());
    obs.push(CRASH_OBSERVATION.to_owned());
    choices.push(all_actions(Distribution::dirac(sink)));

    let initial = match config.agent_start {
        AgentStart::Fixed(agent) => id(GridState { agent, obstacle: config.obstacle_start }),
        AgentStart::Random => {
            let first = config.free_cells()[0];
            id(GridState { agent: first, obstacle: config.obstacle_start })
        }
    };
    let labels = [("bad".to_owned(), bad.clone()), ("goal".to_owned(), goal.clone())].into();
    let invalid = |e: crate::error::ModelError| ScenarioError::InvalidScenario(e.to_string());
    let mdp = Mdp::new(names, Action::names(), initial, choices).map_err(invalid)?.with_labels(labels);
    let pomdp = Pomdp::from_labels(mdp, &obs).map_err(invalid)?;
    let spec = Spec::reach_avoid(bad, goal, 0.0).map_err(invalid)?;
    Ok(GridPomdp { config: config.clone(), pomdp, spec })
}

/// Inclusive ranges for sampling scenarios. `None` position fields are
/// sampled uniformly; `Some` fixes them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    pub width: (usize, usize),
    pub height: (usize, usize),
    /// Draw one size for both dimensions.
    #[serde(default)]
    pub square: bool,
    pub landmarks: (usize, usize),
    #[serde(default)]
    pub random_start: bool,
    #[serde(default)]
    pub fixed_landmarks: Option<Vec<Pos>>,
    #[serde(default)]
    pub fixed_goal: Option<Pos>,
    #[serde(default)]
    pub fixed_obstacle: Option<Pos>,
    #[serde(default)]
    pub fixed_start: Option<Pos>,
    #[serde(default)]
    pub fixed_seed: Option<u64>,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        ScenarioRanges {
            width: (4, 11),
            height: (4, 11),
            square: true,
            landmarks: (0, 3),
            random_start: false,
            fixed_landmarks: None,
            fixed_goal: None,
            fixed_obstacle: None,
            fixed_start: None,
            fixed_seed: None,
        }
    }
}

impl ScenarioRanges {
    /// Everything pinned to `config`.
    pub fn fixed(config: &ScenarioConfig) -> Self {
        ScenarioRanges {
            width: (config.width, config.width),
            height: (config.height, config.height),
            square: false,
            landmarks: (config.landmarks.len(), config.landmarks.len()),
            random_start: config.agent_start == AgentStart::Random,
            fixed_landmarks: Some(config.landmarks.clone()),
            fixed_goal: Some(config.goal),
            fixed_obstacle: Some(config.obstacle_start),
            fixed_start: match config.agent_start {
                AgentStart::Fixed(p) => Some(p),
                AgentStart::Random => None,
            },
            fixed_seed: Some(config.rng_seed),
        }
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Samples a valid scenario by rejection.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, ranges: &ScenarioRanges) -> Result<ScenarioConfig, ScenarioError> {
    let invalid = |m: &str| Err(ScenarioError::InvalidRanges(m.to_owned()));
    for (lo, hi) in [ranges.width, ranges.height, ranges.landmarks] {
        if lo > hi {
            return invalid("empty range");
        }
    }
    if ranges.width.0 < 3 || ranges.height.0 < 3 {
        return invalid("grid dimensions must be at least 3");
    }
    if ranges.square && ranges.width.0.max(ranges.height.0) > ranges.width.1.min(ranges.height.1) {
        return invalid("square grid impossible with these ranges");
    }
    let max_cells = ranges.width.1 * ranges.height.1;
    if ranges.landmarks.0 + 3 > max_cells {
        return invalid("too many landmarks for the largest grid");
    }
    for _ in 0..MAX_REJECTIONS {
        let (width, height) = if ranges.square {
            let lo = ranges.width.0.max(ranges.height.0);
            let hi = ranges.width.1.min(ranges.height.1);
            let n = rng.random_range(lo..=hi);
            (n, n)
        } else {
            (rng.random_range(ranges.width.0..=ranges.width.1), rng.random_range(ranges.height.0..=ranges.height.1))
        };
        let pick = |rng: &mut R| Pos::new(rng.random_range(0..width), rng.random_range(0..height));
        let landmarks = match &ranges.fixed_landmarks {
            Some(l) => l.clone(),
            None => {
                let count = rng.random_range(ranges.landmarks.0..=ranges.landmarks.1);
                let mut set = BTreeSet::new();
                let mut tries = 0;
                while set.len() < count && tries < 100 * (count + 1) {
                    set.insert(pick(rng));
                    tries += 1;
                }
                set.into_iter().collect()
            }
        };
        let goal = ranges.fixed_goal.unwrap_or_else(|| pick(rng));
        let obstacle_start = ranges.fixed_obstacle.unwrap_or_else(|| pick(rng));
        let agent_start = match (ranges.fixed_start, ranges.random_start) {
            (Some(p), _) => AgentStart::Fixed(p),
            (None, true) => AgentStart::Random,
            (None, false) => AgentStart::Fixed(pick(rng)),
        };
        let rng_seed = ranges.fixed_seed.unwrap_or_else(|| rng.random());
        let config = ScenarioConfig {
            width,
            height,
            landmarks,
            obstacle_start,
            goal,
            agent_start,
            visibility: 1,
            rng_seed,
            extra_obstacles: Vec::new(),
            frozen_obstacle: false,
        };
        if config.validate().is_ok() && !config.free_cells().is_empty() {
            return Ok(config);
        }
    }
    invalid("no valid scenario found by rejection sampling")
}

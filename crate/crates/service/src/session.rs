//! Live demonstration sessions. A session owns the true state and a seeded
//! random stream; clients only ever see frames.

use hilsynth::gridworld::{classify, observe, simulate_step, Action, Event, GridState, Pos, ScenarioConfig};
use hilsynth::training::sample_start;
use hilsynth::training::{Outcome, Step, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Static map shown to the operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnownMap {
    pub width: usize,
    pub height: usize,
    pub landmarks: Vec<Pos>,
    pub goal: Pos,
}

/// Server-to-client message. Deliberately has no position fields.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub v: u32,
    pub session: String,
    pub obs: String,
    pub step: usize,
    pub known_map: KnownMap,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Outcome>,
}

#[derive(Debug)]
pub struct Closed;

pub struct Session {
    pub id: String,
    pub scenario_id: String,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub immersion: bool,
    /// Refinement context fed by this session when it ends.
    pub refine: Option<String>,
    rng: ChaCha8Rng,
    state: GridState,
    steps: Vec<Step>,
    outcome: Option<Outcome>,
}

/// Seed of the `counter`-th session of a scenario.
pub fn session_seed(scenario_seed: u64, counter: u64) -> u64 {
    let mut z = scenario_seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Session {
    /// Fresh sessions draw the start from the session stream; immersion
    /// sessions start at `start`.
    pub fn new(
        id: String,
        scenario_id: String,
        config: ScenarioConfig,
        seed: u64,
        start: Option<GridState>,
        refine: Option<String>,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let immersion = start.is_some();
        let state = start.unwrap_or_else(|| fresh_start(&config, &mut rng));
        Session { id, scenario_id, config, seed, immersion, refine, rng, state, steps: Vec::new(), outcome: None }
    }

    pub fn is_open(&self) -> bool {
        self.outcome.is_none()
    }

    pub fn frame(&self) -> Frame {
        Frame {
            v: 1,
            session: self.id.clone(),
            obs: observe(self.state, &self.config).to_string(),
            step: self.steps.len(),
            known_map: KnownMap {
                width: self.config.width,
                height: self.config.height,
                landmarks: self.config.landmarks.clone(),
                goal: self.config.goal,
            },
            terminal: self.outcome,
        }
    }

    pub fn act(&mut self, action: Action) -> Result<Frame, Closed> {
        if !self.is_open() {
            return Err(Closed);
        }
        let obs = observe(self.state, &self.config);
        let (next, event) = simulate_step(self.state, action, &self.config, &mut self.rng);
        self.steps.push(Step { state: self.state, obs, action, event });
        self.state = next;
        self.outcome = match event {
            Event::Goal => Some(Outcome::Goal),
            Event::Crash => Some(Outcome::Crash),
            Event::None => None,
        };
        Ok(self.frame())
    }

    pub fn abort(&mut self) {
        if self.is_open() {
            self.outcome = Some(Outcome::Abort);
        }
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            session_id: self.id.clone(),
            scenario: self.config.clone(),
            seed: Some(self.seed),
            steps: self.steps.clone(),
            outcome: self.outcome.unwrap_or(Outcome::Abort),
        }
    }
}

/// States visited when replaying `actions` with a session's seed: the start
/// followed by each successor, with the event of every step.
pub fn replay(
    config: &ScenarioConfig,
    seed: u64,
    immersion_start: Option<GridState>,
    actions: &[Action],
) -> (GridState, Vec<(GridState, Event)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = immersion_start.unwrap_or_else(|| fresh_start(config, &mut rng));
    let mut state = start;
    let mut out = Vec::new();
    for &a in actions {
        let (next, event) = simulate_step(state, a, config, &mut rng);
        out.push((next, event));
        state = next;
    }
    (start, out)
}

/// Draws starts until one is not already terminal (a random start may land
/// on the goal or the obstacle).
fn fresh_start(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> GridState {
    let mut s = sample_start(config, rng);
    for _ in 0..1000 {
        if classify(s, config) == Event::None {
            break;
        }
        s = sample_start(config, rng);
    }
    s
}

/// Whether a session may start at `s`.
pub fn valid_start(config: &ScenarioConfig, s: GridState) -> bool {
    config.in_grid(s.agent) && config.in_grid(s.obstacle) && classify(s, config) == Event::None
}

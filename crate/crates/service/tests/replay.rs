use std::collections::BTreeMap;

use hilsynth::gridworld::{build_pomdp, Action, GridState, Pos, ScenarioConfig};
use hilsynth_service::session::{replay, session_seed};

#[test]
fn replayed_session_steps_follow_the_model_rows() {
    let config = ScenarioConfig::new(5, 5, Pos::new(4, 4), Pos::new(2, 2))
        .with_landmarks([Pos::new(0, 3)])
        .with_start(Pos::new(1, 1))
        .with_seed(5);
    let grid = build_pomdp(&config).unwrap();
    let start = GridState::new(Pos::new(1, 2), Pos::new(2, 2));
    let n = 100_000;
    for action in Action::ALL {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..n {
            let (_, out) = replay(&config, session_seed(config.rng_seed, i), Some(start), &[action]);
            *counts.entry(grid.state_id(out[0].0)).or_default() += 1;
        }
        let row = grid.pomdp.mdp().transition(grid.state_id(start), action.id()).unwrap();
        for (t, p) in row.iter() {
            let freq = counts.get(&t).copied().unwrap_or(0) as f64 / n as f64;
            assert!((freq - p).abs() < 0.01, "{action:?} -> {t}: {freq} vs {p}");
        }
        assert!(counts.keys().all(|t| row.prob(*t) > 0.0));
    }
}

use std::collections::BTreeMap;

use hilsynth::gridworld::{build_pomdp, random_scenario, simulate_step, Action, Event, GridState, Pos, ScenarioConfig, ScenarioRanges};
use hilsynth::model::{Distribution, ObservationStrategy};
use hilsynth::verify::{mdp_max_reach, reach_avoid_prob};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn simulator_frequencies_match_model_rows() {
    let config = ScenarioConfig::new(4, 4, Pos::new(3, 3), Pos::new(1, 1)).with_landmarks([Pos::new(2, 2)]);
    let grid = build_pomdp(&config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (GridState::new(Pos::new(0, 0), Pos::new(1, 1)), Action::Right),
        (GridState::new(Pos::new(1, 2), Pos::new(2, 1)), Action::Down),
        (GridState::new(Pos::new(3, 0), Pos::new(3, 1)), Action::Up),
        (GridState::new(Pos::new(0, 3), Pos::new(0, 0)), Action::Left),
    ];
    let samples = 25_000;
    for (state, action) in cases {
        let row = grid.pomdp.mdp().transition(grid.state_id(state), action.id()).unwrap();
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for _ in 0..samples {
            let (next, event) = simulate_step(state, action, &config, &mut rng);
            // collision states lead on to the sink; the event marks them
            assert_eq!(event == Event::Crash, grid.spec.bad.contains(&grid.state_id(next)));
            *seen.entry(grid.state_id(next)).or_default() += 1;
        }
        for (t, p) in row.iter() {
            let freq = seen.get(&t).copied().unwrap_or(0) as f64 / samples as f64;
            assert!((freq - p).abs() < 0.015, "{state} {action}: {t} {freq} vs {p}");
        }
        assert!(seen.keys().all(|t| row.prob(*t) > 0.0));
    }
}

#[test]
fn frozen_obstacle_gives_certain_arrival() {
    let mut config = ScenarioConfig::new(3, 3, Pos::new(2, 2), Pos::new(2, 0)).with_start(Pos::new(0, 0));
    config.frozen_obstacle = true;
    let grid = build_pomdp(&config).unwrap();
    let r = mdp_max_reach(grid.pomdp.mdp(), &grid.spec.bad, &grid.spec.goal).unwrap();
    for p in config.free_cells() {
        assert!((r.per_state_prob[grid.state_id(GridState::new(p, config.obstacle_start))] - 1.0).abs() < 1e-12);
    }
}

fn random_strategy(grid: &hilsynth::gridworld::GridPomdp, rng: &mut ChaCha8Rng) -> ObservationStrategy {
    ObservationStrategy::from_rows(grid.pomdp.observation_names().iter().map(|z| {
        let w: Vec<f64> = (0..4).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = w.iter().sum();
        let row = if total == 0.0 {
            Distribution::dirac(rng.random_range(0..4))
        } else {
            Distribution::from_raw(w.iter().enumerate().map(|(a, x)| (a, x / total)))
        };
        (z.clone(), row)
    }))
}

#[test]
fn induced_values_never_exceed_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let ranges = ScenarioRanges { width: (4, 6), height: (4, 6), landmarks: (0, 2), ..ScenarioRanges::default() };
    for _ in 0..3 {
        let config = random_scenario(&mut rng, &ranges).unwrap();
        let grid = build_pomdp(&config).unwrap();
        let bound = mdp_max_reach(grid.pomdp.mdp(), &grid.spec.bad, &grid.spec.goal).unwrap();
        for _ in 0..10 {
            let mc = grid.pomdp.induce_mc(&random_strategy(&grid, &mut rng)).unwrap();
            let r = reach_avoid_prob(&mc, &grid.spec.bad, &grid.spec.goal).unwrap();
            for (v, b) in r.per_state_prob.iter().zip(&bound.per_state_prob) {
                assert!(*v <= b + 1e-8);
            }
        }
    }
}

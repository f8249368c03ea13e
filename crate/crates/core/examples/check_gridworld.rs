//! Builds a gridworld POMDP, checks a cloned strategy on it and compares
//! with the full-observability bound.
//!
//!     cargo run --release --example check_gridworld -- [size]

use std::time::Instant;

use hilsynth::cloning::initial_strategy;
use hilsynth::features::ClassTable;
use hilsynth::gridworld::{build_pomdp, Pos, ScenarioConfig, ScenarioRanges};
use hilsynth::training::{collect_demonstrations, ScriptedDemonstrator};
use hilsynth::verify::{check_spec, mdp_max_reach};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n: usize = std::env::args().nth(1).map_or(10, |a| a.parse().expect("grid size"));
    let config = ScenarioConfig::new(n, n, Pos::new(n - 1, n - 1), Pos::new(n / 2, n / 2))
        .with_landmarks([Pos::new(n / 2 - 1, n / 2 + 1)])
        .with_start(Pos::new(0, 0));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (ts, _) = collect_demonstrations(&ScenarioRanges::default(), &ScriptedDemonstrator::default(), 1060, &mut rng).unwrap();

    let t = Instant::now();
    let grid = build_pomdp(&config).unwrap();
    let build = t.elapsed();
    let strategy = initial_strategy(&ts, &ClassTable::by_features(), &grid.pomdp);
    let t = Instant::now();
    let mc = grid.pomdp.induce_mc(&strategy).unwrap();
    let result = check_spec(&mc, &grid.spec.clone().with_threshold(0.5).unwrap()).unwrap();
    let check = t.elapsed();
    let bound = mdp_max_reach(grid.pomdp.mdp(), &grid.spec.bad, &grid.spec.goal).unwrap();

    println!("{n}x{n}: {} states, {} transitions", grid.pomdp.num_states(), mc.num_transitions());
    println!("build {:.1} ms, induce+check {:.1} ms", build.as_secs_f64() * 1e3, check.as_secs_f64() * 1e3);
    println!(
        "cloned strategy: prob {:.4}, cost {}, {:?} after {} sweeps",
        result.value_at_initial,
        result.conditional_expected_cost.map_or("-".into(), |c| format!("{c:.2}")),
        result.verdict.unwrap(),
        result.iterations
    );
    println!("full-observability bound: {:.4}", bound.value_at_initial);
}

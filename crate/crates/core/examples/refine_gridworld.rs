//! Clones an initial strategy from scripted demonstrations on random
//! scenarios, then refines it on a fixed 4×4 scenario by replaying sessions
//! from the critical states of each failed check.
//!
//!     cargo run --release --example refine_gridworld -- [seed] [samples] [k]

use hilsynth::cloning::initial_strategy;
use hilsynth::features::ClassTable;
use hilsynth::gridworld::{build_pomdp, Pos, ScenarioConfig, ScenarioRanges};
use hilsynth::refine::{refine_loop, RefineOptions, ScriptedSessions};
use hilsynth::training::{collect_demonstrations, ScriptedDemonstrator};
use hilsynth::verify::mdp_max_reach;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seed = args.first().copied().unwrap_or(0);
    let samples = args.get(1).copied().unwrap_or(265);
    let k = args.get(2).copied().unwrap_or(20) as usize;

    let demonstrator = ScriptedDemonstrator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ts, log) = collect_demonstrations(&ScenarioRanges::default(), &demonstrator, samples, &mut rng).unwrap();
    println!("{} samples from {} episodes", ts.size(), log.len());

    let config = ScenarioConfig::new(4, 4, Pos::new(3, 3), Pos::new(3, 0))
        .with_landmarks([Pos::new(1, 2)])
        .with_start(Pos::new(0, 0));
    let grid = build_pomdp(&config).unwrap();
    let spec = grid.spec.clone().with_threshold(0.99).unwrap();
    let bound = mdp_max_reach(grid.pomdp.mdp(), &spec.bad, &spec.goal).unwrap();
    println!("full-observability bound {:.4}", bound.value_at_initial);

    let initial = initial_strategy(&ts, &ClassTable::by_features(), &grid.pomdp);
    let mut sessions = ScriptedSessions::new(demonstrator, seed);
    let opts = RefineOptions { k, ..RefineOptions::default() };
    let out = refine_loop(&grid, &spec, initial, &mut sessions, &opts).unwrap();
    for h in &out.history {
        println!(
            "iter {:2}  prob {:.4}  cost {:>6}  sessions {:2}  critical {}",
            h.iter,
            h.prob,
            h.cost.map_or("-".into(), |c| format!("{c:.2}")),
            h.num_sessions,
            h.critical_states.len()
        );
    }
    println!("stopped: {:?}", out.stop);
}

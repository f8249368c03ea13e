//! Scripted demonstrations on random scenarios, cloned into a
//! scenario-independent strategy. Writes the strategy file to stdout.
//!
//!     cargo run --example demonstrate_and_clone -- [seed] [samples] > strategy.json

use hilsynth::cloning::{scenario_independent_strategy, strategy_entropy_report, Provenance, StrategyFile};
use hilsynth::features::ClassTable;
use hilsynth::gridworld::{Action, ScenarioRanges};
use hilsynth::training::{collect_demonstrations, hoeffding_min_samples, with_efficiency, ScriptedDemonstrator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seed = args.first().copied().unwrap_or(1);
    let target = args.get(1).copied().unwrap_or_else(|| with_efficiency(hoeffding_min_samples(0.05, 0.01).unwrap(), 4.0).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ts, log) = collect_demonstrations(&ScenarioRanges::default(), &ScriptedDemonstrator::default(), target, &mut rng).unwrap();
    let goals = log.iter().filter(|t| t.outcome == hilsynth::training::Outcome::Goal).count();
    eprintln!("{} samples, {} episodes, {} reached the goal, {} distinct observations", ts.size(), log.len(), goals, ts.observations().count());

    let classes = ClassTable::by_features();
    let strategy = scenario_independent_strategy(&ts, &classes);
    let report = strategy_entropy_report(&strategy, 4);
    let uniform = report.iter().filter(|r| r.uniform).count();
    let mean = report.iter().map(|r| r.bits).sum::<f64>() / report.len() as f64;
    eprintln!("{} rows, {} uniform, mean entropy {:.3} bits", report.len(), uniform, mean);

    let file = StrategyFile::new(&strategy, &Action::names(), Some(Provenance::new(&ts, &classes)));
    print!("{}", file.to_text());
}

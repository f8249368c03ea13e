//! The eight-state POMDP where a randomized memoryless strategy beats every
//! deterministic one: the value at the blue states grows as 2/3 + p/3 with
//! the probability `p` of choosing "up" for 0 < p < 1, deterministic "up"
//! gets 2/3, and only full observability reaches 1.

use std::collections::BTreeSet;

use hilsynth::fixtures::{blue_choice, randomization_vs_memory};
use hilsynth::verify::{mdp_max_reach, reach_avoid_prob};

fn main() {
    let pomdp = randomization_vs_memory();
    let goal = pomdp.mdp().label("goal");
    let bad = BTreeSet::new();
    println!("   p   Pr(reach s7)   2/3 + p/3");
    for p in [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0] {
        let mc = pomdp.induce_mc(&blue_choice(p)).unwrap();
        let v = reach_avoid_prob(&mc, &bad, &goal).unwrap().value_at_initial;
        // at p = 0 or 1 one blue state loops forever
        let closed = if p > 0.0 && p < 1.0 { format!("{:.6}", 2.0 / 3.0 + p / 3.0) } else { "-".into() };
        println!("{p:5.2}   {v:.6}       {closed}");
    }
    let bound = mdp_max_reach(pomdp.mdp(), &bad, &goal).unwrap();
    println!("underlying MDP: {:.6}", bound.value_at_initial);
}

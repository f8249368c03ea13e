use std::collections::BTreeSet;

use hilsynth::fixtures::{blue_choice, randomization_vs_memory};
use hilsynth::format::read_pomdp;
use hilsynth::model::{Distribution, Mc};
use hilsynth::verify::{conditional_expected_cost, mdp_max_reach, reach_avoid_iterate, reach_avoid_prob, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mc(rng: &mut ChaCha8Rng) -> (Mc, BTreeSet<usize>, BTreeSet<usize>) {
    let n = rng.random_range(2..=6);
    let rows = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=n);
            let weights: Vec<(usize, f64)> =
                (0..k).map(|_| (rng.random_range(0..n), rng.random_range(0.05..1.0))).collect();
            let total: f64 = weights.iter().map(|w| w.1).sum();
            Distribution::from_raw(weights.into_iter().map(|(t, w)| (t, w / total)))
        })
        .collect();
    let mut goal = BTreeSet::new();
    let mut bad = BTreeSet::new();
    for s in 0..n {
        match rng.random_range(0..5) {
            0 => {
                goal.insert(s);
            }
            1 => {
                bad.insert(s);
            }
            _ => {}
        }
    }
    let initial = rng.random_range(0..n);
    (Mc::from_rows(initial, rows).unwrap(), bad, goal)
}

/// Probability of hitting `goal` within `horizon` steps while avoiding `bad`.
fn bounded(mc: &Mc, bad: &BTreeSet<usize>, goal: &BTreeSet<usize>, horizon: usize) -> Vec<f64> {
    let n = mc.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| if goal.contains(&s) { 1.0 } else { 0.0 }).collect();
    for _ in 0..horizon {
        x = (0..n)
            .map(|s| {
                if goal.contains(&s) {
                    1.0
                } else if bad.contains(&s) {
                    0.0
                } else {
                    mc.row(s).iter().map(|(t, p)| p * x[t]).sum()
                }
            })
            .collect();
    }
    x
}

#[test]
fn random_chains_match_bounded_dynamic_programme() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (mc, bad, goal) = random_mc(&mut rng);
        let r = reach_avoid_prob(&mc, &bad, &goal).unwrap();
        let dp = bounded(&mc, &bad, &goal, 10_000);
        for (a, b) in r.per_state_prob.iter().zip(&dp) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let as_mdp = mdp_max_reach(&mc.to_mdp(), &bad, &goal).unwrap();
        assert_eq!(as_mdp.per_state_prob, r.per_state_prob);
    }
}

#[test]
fn jacobi_and_gauss_seidel_agree_and_grow() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let (mc, bad, goal) = random_mc(&mut rng);
        let gs = reach_avoid_iterate(&mc, &bad, &goal, Method::GaussSeidel, 4000).unwrap();
        let mut prev = reach_avoid_iterate(&mc, &bad, &goal, Method::Jacobi, 0).unwrap();
        for k in 1..25 {
            let cur = reach_avoid_iterate(&mc, &bad, &goal, Method::Jacobi, k).unwrap();
            assert!(prev.iter().zip(&cur).all(|(a, b)| a <= b));
            prev = cur;
        }
        let jacobi = reach_avoid_iterate(&mc, &bad, &goal, Method::Jacobi, 8000).unwrap();
        for (a, b) in gs.iter().zip(&jacobi) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn hand_mixture_costs() {
    let d = |e: &[(usize, f64)]| Distribution::new(e.iter().copied()).unwrap();
    // two routes of length 1 and 3 taken with probability 1/4 and 3/4
    let mc = Mc::from_rows(0, vec![d(&[(4, 0.25), (1, 0.75)]), d(&[(2, 1.0)]), d(&[(4, 1.0)]), d(&[(3, 1.0)]), d(&[(4, 1.0)])]).unwrap();
    let c = conditional_expected_cost(&mc, &BTreeSet::new(), &BTreeSet::from([4])).unwrap().unwrap();
    assert!((c - (0.25 * 1.0 + 0.75 * 3.0)).abs() < 1e-9);
    // geometric retry: stay with 1/2, so the expected number of steps is 2
    let mc = Mc::from_rows(0, vec![d(&[(0, 0.5), (1, 0.5)]), d(&[(1, 1.0)])]).unwrap();
    let c = conditional_expected_cost(&mc, &BTreeSet::new(), &BTreeSet::from([1])).unwrap().unwrap();
    assert!((c - 2.0).abs() < 1e-9);
    // failures do not count: 1/3 crash right away, the rest arrive in 2
    let mc = Mc::from_rows(
        0,
        vec![d(&[(1, 2.0 / 3.0), (3, 1.0 / 3.0)]), d(&[(2, 1.0)]), d(&[(2, 1.0)]), d(&[(3, 1.0)])],
    )
    .unwrap();
    let c = conditional_expected_cost(&mc, &BTreeSet::from([3]), &BTreeSet::from([2])).unwrap().unwrap();
    assert!((c - 2.0).abs() < 1e-9);
}

#[test]
fn bundled_fixture_file_values() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/randomization_vs_memory.json")).unwrap();
    let pomdp = read_pomdp(&text).unwrap();
    assert_eq!(pomdp, randomization_vs_memory());
    let goal = pomdp.mdp().label("goal");
    let none = BTreeSet::new();
    let value = |p: f64| reach_avoid_prob(&pomdp.induce_mc(&blue_choice(p)).unwrap(), &none, &goal).unwrap().value_at_initial;
    assert!((value(1.0) - 2.0 / 3.0).abs() < 1e-9);
    for p in [0.25, 0.5, 0.75] {
        assert!((value(p) - (2.0 / 3.0 + p / 3.0)).abs() < 1e-9);
    }
    assert!((mdp_max_reach(pomdp.mdp(), &none, &goal).unwrap().value_at_initial - 1.0).abs() < 1e-9);
}

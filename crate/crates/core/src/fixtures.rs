//! Small hand-built models used by tests, examples and the CLI.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Distribution, Mdp, ObservationStrategy, Pomdp};

pub const A: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;

/// Eight-state POMDP where randomization at the three blue states partially
/// simulates memory. `s0` branches to green `s1` (2/3) and yellow `s2` (1/3);
/// `s1` reaches blue `s3` or `s4` evenly, `s2` reaches blue `s5`. At `s3`
/// "up" loops and "down" exits to the goal `s7`; `s4` is the mirror image;
/// at `s5` "up" reaches `s7` and "down" falls into the trap `s6`.
pub fn randomization_vs_memory() -> Pomdp {
    let d = |e: &[(usize, f64)]| Distribution::new(e.iter().copied()).unwrap();
    let choices = vec![
        vec![(A, d(&[(1, 2.0 / 3.0), (2, 1.0 / 3.0)]))],
        vec![(A, d(&[(3, 0.5), (4, 0.5)]))],
        vec![(A, Distribution::dirac(5))],
        vec![(UP, Distribution::dirac(3)), (DOWN, Distribution::dirac(7))],
        vec![(UP, Distribution::dirac(7)), (DOWN, Distribution::dirac(4))],
        vec![(UP, Distribution::dirac(7)), (DOWN, Distribution::dirac(6))],
        vec![(A, Distribution::dirac(6))],
        vec![(A, Distribution::dirac(7))],
    ];
    let labels = BTreeMap::from([
        ("bad".to_owned(), BTreeSet::new()),
        ("goal".to_owned(), BTreeSet::from([7])),
    ]);
    let mdp = Mdp::new(
        (0..8).map(|i| format!("s{i}")).collect(),
        vec!["a".into(), "up".into(), "down".into()],
        0,
        choices,
    )
    .unwrap()
    .with_labels(labels);
    Pomdp::from_labels(mdp, &["red", "green", "yellow", "blue", "blue", "blue", "white", "white"]).unwrap()
}

/// Picks "up" with probability `p` at the blue observation.
pub fn blue_choice(p: f64) -> ObservationStrategy {
    let mut s = ObservationStrategy::new();
    for z in ["red", "green", "yellow", "white"] {
        s.set(z, Distribution::dirac(A));
    }
    s.set("blue", Distribution::from_raw([(UP, p), (DOWN, 1.0 - p)]));
    s
}

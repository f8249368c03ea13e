//! Action-based features of observation/action pairs and the equivalence
//! classes they induce.
//!
//! `f1` counts occupied neighbours. `f2` and `f3` measure how far the move's
//! x and y components point away from the occupied cells on the left/right
//! and lower/upper sides of the view. Pairs with equal tuples are pooled when
//! cloning a strategy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, ObsVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureTuple {
    pub f1: u32,
    pub f2: u32,
    pub f3: u32,
}

pub fn feature(z: ObsVector, a: Action) -> FeatureTuple {
    let (ax, ay) = a.delta();
    let sum = |bits: &[usize]| bits.iter().map(|&i| z.bit(i)).sum::<i64>();
    FeatureTuple {
        f1: z.count(),
        f2: (ax - sum(&[1, 2, 3]) + sum(&[5, 6, 7])).unsigned_abs() as u32,
        f3: (ay - sum(&[1, 7, 8]) + sum(&[3, 4, 5])).unsigned_abs() as u32,
    }
}

pub fn equivalent(z1: ObsVector, a1: Action, z2: ObsVector, a2: Action) -> bool {
    feature(z1, a1) == feature(z2, a2)
}

/// A partition of all 256×4 observation/action pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassTable {
    class_of: Vec<usize>,
    members: Vec<Vec<(ObsVector, Action)>>,
    keys: Vec<String>,
}

fn pair_index(z: ObsVector, a: Action) -> usize {
    z.index() * Action::ALL.len() + a.id()
}

fn all_pairs() -> impl Iterator<Item = (ObsVector, Action)> {
    ObsVector::all().flat_map(|z| Action::ALL.into_iter().map(move |a| (z, a)))
}

impl ClassTable {
    /// Classes keyed by [`FeatureTuple`], ordered lexicographically by tuple.
    pub fn by_features() -> Self {
        let mut grouped: BTreeMap<FeatureTuple, Vec<(ObsVector, Action)>> = BTreeMap::new();
        for (z, a) in all_pairs() {
            grouped.entry(feature(z, a)).or_default().push((z, a));
        }
        Self::from_groups(grouped.into_iter().map(|(k, v)| (format!("{},{},{}", k.f1, k.f2, k.f3), v)))
    }

    /// Every pair in its own class; cloning then reduces to empirical
    /// conditional frequencies.
    pub fn singletons() -> Self {
        Self::from_groups(all_pairs().map(|(z, a)| (format!("{z}:{a}"), vec![(z, a)])))
    }

    fn from_groups(groups: impl Iterator<Item = (String, Vec<(ObsVector, Action)>)>) -> Self {
        let mut class_of = vec![usize::MAX; 256 * Action::ALL.len()];
        let mut members = Vec::new();
        let mut keys = Vec::new();
        for (key, group) in groups {
            for &(z, a) in &group {
                class_of[pair_index(z, a)] = members.len();
            }
            members.push(group);
            keys.push(key);
        }
        debug_assert!(class_of.iter().all(|&c| c != usize::MAX));
        ClassTable { class_of, members, keys }
    }

    pub fn class_of(&self, z: ObsVector, a: Action) -> usize {
        self.class_of[pair_index(z, a)]
    }

    pub fn members(&self, class: usize) -> &[(ObsVector, Action)] {
        &self.members[class]
    }

    pub fn classes(&self) -> impl Iterator<Item = (&str, &[(ObsVector, Action)])> {
        self.keys.iter().map(String::as_str).zip(self.members.iter().map(Vec::as_slice))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `class,obs_bits,action` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,obs_bits,action\n");
        for (key, members) in self.classes() {
            for (z, a) in members {
                let _ = writeln!(out, "\"{key}\",{z},{a}");
            }
        }
        out
    }
}

/// Class-size statistics for inspection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassStats {
    pub classes: usize,
    pub largest: usize,
    pub largest_per_action: usize,
    pub mean_size: f64,
}

pub fn class_stats(table: &ClassTable) -> ClassStats {
    let largest = table.members.iter().map(Vec::len).max().unwrap_or(0);
    let largest_per_action = table
        .members
        .iter()
        .flat_map(|m| Action::ALL.map(|a| m.iter().filter(|(_, b)| *b == a).count()))
        .max()
        .unwrap_or(0);
    ClassStats {
        classes: table.len(),
        largest,
        largest_per_action,
        mean_size: (256 * Action::ALL.len()) as f64 / table.len().max(1) as f64,
    }
}

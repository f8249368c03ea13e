//! Explicit-state model files.
//!
//! ```json
//! {
//!   "v": 1,
//!   "states": [{ "name": "s0", "obs": "red" }, ...],
//!   "initial": "s0",
//!   "actions": ["a", "up", "down"],
//!   "transitions": [["s0", "a", [["s1", "0.6666666666666666"], ["s2", "0.3333333333333333"]]], ...],
//!   "labels": { "goal": ["s7"], "bad": [] }
//! }
//! ```
//!
//! Probabilities are decimal strings in shortest round-trip form (at most 17
//! significant digits), so `write(read(text)) == text` for files produced by
//! [`write_model`]. `obs` is optional; a file where every state carries one
//! reads as a POMDP.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::model::{Distribution, Mdp, Pomdp};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub v: u32,
    pub states: Vec<StateEntry>,
    pub initial: String,
    pub actions: Vec<String>,
    pub transitions: Vec<(String, String, Vec<(String, ProbString)>)>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<String>,
}

/// An `f64` carried as its shortest round-trip decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbString(pub f64);

impl Serialize for ProbString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ProbString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse::<f64>().map(ProbString).map_err(serde::de::Error::custom)
    }
}

/// A parsed model: a plain MDP, or a POMDP when every state is observed.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mdp(Mdp),
    Pomdp(Pomdp),
}

impl Model {
    pub fn mdp(&self) -> &Mdp {
        match self {
            Model::Mdp(m) => m,
            Model::Pomdp(p) => p.mdp(),
        }
    }
}

impl ModelFile {
    pub fn from_pomdp(pomdp: &Pomdp) -> Self {
        let mut file = Self::from_mdp(pomdp.mdp());
        for (s, entry) in file.states.iter_mut().enumerate() {
            entry.obs = Some(pomdp.observation_name(pomdp.observation(s)).to_owned());
        }
        file
    }

    pub fn from_mdp(mdp: &Mdp) -> Self {
        let names = mdp.state_names();
        let transitions = (0..mdp.num_states())
            .flat_map(|s| {
                mdp.choices(s).iter().map(move |(a, dist)| {
                    (
                        names[s].clone(),
                        mdp.action_names()[*a].clone(),
                        dist.iter().map(|(t, p)| (names[t].clone(), ProbString(p))).collect(),
                    )
                })
            })
            .collect();
        ModelFile {
            v: FORMAT_VERSION,
            states: names.iter().map(|n| StateEntry { name: n.clone(), obs: None }).collect(),
            initial: names[mdp.initial()].clone(),
            actions: mdp.action_names().to_vec(),
            transitions,
            labels: mdp
                .labels()
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|&s| names[s].clone()).collect()))
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<Model, FormatError> {
        if self.v != FORMAT_VERSION {
            return Err(FormatError::Malformed(format!("unsupported version {}", self.v)));
        }
        let index: BTreeMap<&str, usize> =
            self.states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        if index.len() != self.states.len() {
            return Err(FormatError::Malformed("duplicate state name".into()));
        }
        let state = |name: &str| {
            index.get(name).copied().ok_or_else(|| FormatError::Malformed(format!("unknown state {name}")))
        };
        let action_index: BTreeMap<&str, usize> =
            self.actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut choices = vec![Vec::new(); self.states.len()];
        for (s, a, targets) in &self.transitions {
            let a_id = *action_index
                .get(a.as_str())
                .ok_or_else(|| FormatError::Malformed(format!("unknown action {a}")))?;
            let entries = targets
                .iter()
                .map(|(t, p)| Ok((state(t)?, p.0)))
                .collect::<Result<Vec<_>, FormatError>>()?;
            choices[state(s)?].push((a_id, Distribution::new(entries)?));
        }
        let mut labels = BTreeMap::new();
        for (k, members) in &self.labels {
            let set = members.iter().map(|m| state(m)).collect::<Result<BTreeSet<_>, _>>()?;
            labels.insert(k.clone(), set);
        }
        let names: Vec<String> = self.states.iter().map(|s| s.name.clone()).collect();
        let mdp = Mdp::new(names, self.actions.clone(), state(&self.initial)?, choices)?.with_labels(labels);
        let obs: Option<Vec<&str>> = self.states.iter().map(|s| s.obs.as_deref()).collect();
        Ok(match obs {
            Some(obs) => Model::Pomdp(Pomdp::from_labels(mdp, &obs)?),
            None => Model::Mdp(mdp),
        })
    }
}

pub fn read_model(text: &str) -> Result<Model, FormatError> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

pub fn read_pomdp(text: &str) -> Result<Pomdp, FormatError> {
    match read_model(text)? {
        Model::Pomdp(p) => Ok(p),
        Model::Mdp(_) => Err(FormatError::Malformed("model has no observations".into())),
    }
}

pub fn write_model(model: &Model) -> String {
    let file = match model {
        Model::Mdp(m) => ModelFile::from_mdp(m),
        Model::Pomdp(p) => ModelFile::from_pomdp(p),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model file serializes");
    text.push('\n');
    text
}

pub fn write_pomdp(pomdp: &Pomdp) -> String {
    write_model(&Model::Pomdp(pomdp.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::randomization_vs_memory;
    use proptest::prelude::*;

    #[test]
    fn fixture_round_trips_bit_exact() {
        let text = write_pomdp(&randomization_vs_memory());
        let back = read_pomdp(&text).unwrap();
        assert_eq!(back, randomization_vs_memory());
        assert_eq!(write_pomdp(&back), text);
    }

    #[test]
    fn bundled_fixture_matches_builder() {
        let text = include_str!("../fixtures/randomization_vs_memory.json");
        assert_eq!(read_pomdp(text).unwrap(), randomization_vs_memory());
        assert_eq!(write_pomdp(&read_pomdp(text).unwrap()), text);
    }

    #[test]
    fn rejects_unknown_names_and_bad_rows() {
        let text = r#"{"v":1,"states":[{"name":"a"}],"initial":"a","actions":["x"],
            "transitions":[["a","x",[["b","1"]]]]}"#;
        assert!(read_model(text).is_err());
        let text = r#"{"v":1,"states":[{"name":"a"}],"initial":"a","actions":["x"],
            "transitions":[["a","x",[["a","0.9"]]]]}"#;
        assert!(read_model(text).is_err());
        let text = r#"{"v":1,"states":[{"name":"a"}],"initial":"a","actions":["x"],
            "transitions":[["a","x",[["a","1"]]]]}"#;
        assert!(matches!(read_model(text).unwrap(), Model::Mdp(_)));
    }

    fn arb_rows() -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
        (1usize..6, 1usize..4).prop_flat_map(|(n, k)| {
            prop::collection::vec(
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), 1..=k),
                n,
            )
        })
    }

    proptest! {
        #[test]
        fn random_models_round_trip(rows in arb_rows()) {
            let n = rows.len();
            let choices = rows
                .iter()
                .map(|acts| {
                    acts.iter()
                        .enumerate()
                        .map(|(a, w)| {
                            let total: f64 = w.iter().sum::<f64>() + 1e-3;
                            let mut e: Vec<(usize, f64)> = w.iter().enumerate().map(|(t, x)| (t, x / total)).collect();
                            e.push((0, 1e-3 / total));
                            (a, Distribution::new(e).unwrap())
                        })
                        .collect()
                })
                .collect();
            let mdp = Mdp::new(
                (0..n).map(|i| format!("q{i}")).collect(),
                vec!["a0".into(), "a1".into(), "a2".into()],
                0,
                choices,
            )
            .unwrap();
            let model = Model::Mdp(mdp);
            let text = write_model(&model);
            let back = read_model(&text).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(write_model(&back), text);
        }
    }
}

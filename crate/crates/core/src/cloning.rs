//! Behaviour cloning: turns demonstration counts into a memoryless
//! randomized strategy, pooling evidence across feature-equivalent
//! observation/action pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::FormatError;
use crate::features::ClassTable;
use crate::format::ProbString;
use crate::gridworld::{Action, ObsVector};
use crate::model::{ActionId, Distribution, ObservationStrategy, Pomdp};
use crate::training::TrainingSet;

/// Per-pair empirical ratios `Ω(z,a) / Σ_a' Ω(z,a')`, zero where `z` has no data.
fn ratios(ts: &TrainingSet) -> Vec<Option<f64>> {
    let mut out = vec![None; 256 * 4];
    for z in ts.observations() {
        if let Some(p) = ts.conditional(z) {
            for a in Action::ALL {
                out[z.index() * 4 + a.id()] = Some(p[a.id()]);
            }
        }
    }
    out
}

/// Pooled, unnormalized weight of every action at `z`: the sum of the
/// ratios of all members of the pair's class. Members whose observation has
/// no data are skipped.
pub fn aggregate(ts: &TrainingSet, classes: &ClassTable, z: ObsVector) -> [f64; 4] {
    aggregate_with(&ratios(ts), classes, z)
}

fn aggregate_with(ratios: &[Option<f64>], classes: &ClassTable, z: ObsVector) -> [f64; 4] {
    Action::ALL.map(|a| {
        classes
            .members(classes.class_of(z, a))
            .iter()
            .filter_map(|&(zj, aj)| ratios[zj.index() * 4 + aj.id()])
            .sum()
    })
}

/// Divides each action's aggregate by their total; `None` when all are zero.
pub fn normalize_aggregates(weights: [f64; 4]) -> Option<[f64; 4]> {
    let total: f64 = weights.iter().sum();
    (total > 0.0).then(|| weights.map(|w| w / total))
}

fn row_for(ratios: &[Option<f64>], classes: &ClassTable, name: &str, enabled: &[ActionId]) -> Distribution {
    let Ok(z) = name.parse::<ObsVector>() else {
        return Distribution::uniform(enabled.iter().copied());
    };
    match normalize_aggregates(aggregate_with(ratios, classes, z)) {
        Some(p) => Distribution::from_raw(Action::ALL.map(|a| (a.id(), p[a.id()]))),
        None => Distribution::uniform(enabled.iter().copied()),
    }
}

/// Cloned strategy over the named observations. Names that are not 8-bit
/// observation strings get the uniform row.
pub fn clone_strategy<'a>(
    ts: &TrainingSet,
    classes: &ClassTable,
    observations: impl IntoIterator<Item = &'a str>,
) -> ObservationStrategy {
    let ratios = ratios(ts);
    let all: Vec<ActionId> = Action::ALL.iter().map(|a| a.id()).collect();
    ObservationStrategy::from_rows(
        observations.into_iter().map(|name| (name.to_owned(), row_for(&ratios, classes, name, &all))),
    )
}

/// Cloned strategy for every observation of a gridworld POMDP.
pub fn initial_strategy(ts: &TrainingSet, classes: &ClassTable, pomdp: &Pomdp) -> ObservationStrategy {
    let ratios = ratios(ts);
    ObservationStrategy::from_rows((0..pomdp.num_observations()).map(|z| {
        let enabled = pomdp.enabled_at(z).unwrap_or_default();
        let name = pomdp.observation_name(z);
        (name.to_owned(), row_for(&ratios, classes, name, &enabled))
    }))
}

/// Cloned rows for all 256 observation vectors plus the crash observation.
pub fn scenario_independent_strategy(ts: &TrainingSet, classes: &ClassTable) -> ObservationStrategy {
    let names: Vec<String> = ObsVector::all()
        .map(|z| z.to_string())
        .chain([crate::gridworld::CRASH_OBSERVATION.to_owned()])
        .collect();
    clone_strategy(ts, classes, names.iter().map(String::as_str))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyRow {
    pub observation: String,
    pub bits: f64,
    pub uniform: bool,
}

/// Shannon entropy of every row, flagging rows uniform over `num_actions`.
pub fn strategy_entropy_report(strategy: &ObservationStrategy, num_actions: usize) -> Vec<EntropyRow> {
    strategy
        .rows()
        .iter()
        .map(|(z, row)| {
            let bits = -row.iter().filter(|(_, p)| *p > 0.0).map(|(_, p)| p * p.log2()).sum::<f64>();
            let first = row.entries().first().map_or(0.0, |e| e.1);
            let uniform = row.len() == num_actions && row.iter().all(|(_, p)| p == first);
            EntropyRow { observation: z.clone(), bits: bits.max(0.0), uniform }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub training_set_sha256: String,
    pub class_table_sha256: String,
}

impl Provenance {
    pub fn new(ts: &TrainingSet, classes: &ClassTable) -> Self {
        Provenance {
            training_set_sha256: ts.sha256(),
            class_table_sha256: hex::encode(Sha256::digest(classes.to_csv().as_bytes())),
        }
    }
}

/// On-disk strategy: observation name to `{action: probability}`, zero
/// entries omitted, probabilities as decimal strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub v: u32,
    pub actions: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, ProbString>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl StrategyFile {
    pub fn new(strategy: &ObservationStrategy, actions: &[String], provenance: Option<Provenance>) -> Self {
        let rows = strategy
            .rows()
            .iter()
            .map(|(z, row)| (z.clone(), row.iter().map(|(a, p)| (actions[a].clone(), ProbString(p))).collect()))
            .collect();
        StrategyFile { v: 1, actions: actions.to_vec(), rows, provenance }
    }

    pub fn strategy(&self) -> Result<ObservationStrategy, FormatError> {
        self.strategy_for(&self.actions)
    }

    /// Rows with action ids taken from `action_names`, e.g. a model's
    /// action list.
    pub fn strategy_for(&self, action_names: &[String]) -> Result<ObservationStrategy, FormatError> {
        if self.v != 1 {
            return Err(FormatError::Malformed(format!("unsupported version {}", self.v)));
        }
        let rows = self
            .rows
            .iter()
            .map(|(z, row)| {
                let entries = row
                    .iter()
                    .map(|(a, p)| {
                        let id = action_names
                            .iter()
                            .position(|n| n == a)
                            .ok_or_else(|| FormatError::Malformed(format!("unknown action {a}")))?;
                        Ok((id, p.0))
                    })
                    .collect::<Result<Vec<_>, FormatError>>()?;
                Ok((z.clone(), Distribution::new(entries)?))
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Ok(ObservationStrategy::from_rows(rows))
    }

    /// Canonical text: pretty JSON with sorted keys and a trailing newline.
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("strategy serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Content hash of a gridworld strategy, independent of provenance.
pub fn strategy_hash(strategy: &ObservationStrategy) -> String {
    StrategyFile::new(strategy, &Action::names(), None).sha256()
}

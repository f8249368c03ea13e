//! Explicit-state probabilistic models: distributions, MDPs, Markov chains,
//! POMDPs with deterministic observation maps, and memoryless randomized
//! observation-based strategies.
//!
//! States, actions and observations are dense `usize` indices with a separate
//! name table. Every model is immutable after construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::ModelError;

pub type StateId = usize;
pub type ActionId = usize;
pub type ObsId = usize;

/// Absolute tolerance on row sums.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Deviations below this are float noise and are kept as-is, so that a model
/// written to disk and read back is bit-identical.
const RENORMALIZE_ABOVE: f64 = 1e-12;

/// A finite probability distribution stored sparsely as `(outcome, mass)`
/// pairs sorted by outcome. Zero-mass outcomes are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    entries: Vec<(usize, f64)>,
}

impl Distribution {
    /// Builds a distribution, merging duplicate outcomes. Rows whose sum is
    /// within [`PROB_TOLERANCE`] of one are renormalized; anything further
    /// off is rejected.
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, ModelError> {
        let dist = Self::from_raw(entries);
        if let Some((outcome, p)) = dist.entries.iter().find(|(_, p)| !(*p >= 0.0) || !p.is_finite()) {
            return Err(ModelError::NegativeProbability { outcome: *outcome, value: *p });
        }
        if dist.entries.is_empty() {
            return Err(ModelError::EmptySupport);
        }
        let sum = dist.sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ModelError::RowSum { sum });
        }
        Ok(if (sum - 1.0).abs() > RENORMALIZE_ABOVE {
            Distribution {
                entries: dist.entries.into_iter().map(|(o, p)| (o, p / sum)).collect(),
            }
        } else {
            dist
        })
    }

    /// Builds a distribution without checking the sum. Used to represent
    /// malformed input so that [`Validate`] can report on it.
    pub fn from_raw(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (o, p) in entries {
            *merged.entry(o).or_insert(0.0) += p;
        }
        Distribution {
            entries: merged.into_iter().filter(|(_, p)| *p != 0.0).collect(),
        }
    }

    pub fn dirac(outcome: usize) -> Self {
        Distribution { entries: vec![(outcome, 1.0)] }
    }

    /// Uniform over the given outcomes. Panics on an empty set.
    pub fn uniform(outcomes: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = outcomes.into_iter().collect();
        assert!(!set.is_empty(), "uniform distribution over an empty set");
        let p = 1.0 / set.len() as f64;
        Distribution { entries: set.into_iter().map(|o| (o, p)).collect() }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.entries
            .binary_search_by_key(&outcome, |(o, _)| *o)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(o, _)| *o)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn violations(&self) -> Option<RowProblem> {
        if self.entries.is_empty() {
            return Some(RowProblem::Empty);
        }
        if let Some((o, p)) = self.entries.iter().find(|(_, p)| !(*p >= 0.0) || !p.is_finite()) {
            return Some(RowProblem::Negative(*o, *p));
        }
        let sum = self.sum();
        ((sum - 1.0).abs() > PROB_TOLERANCE).then_some(RowProblem::Sum(sum))
    }
}

enum RowProblem {
    Empty,
    Negative(usize, f64),
    Sum(f64),
}

/// A rule broken by a model, named after the state or observation at fault.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    RowSumViolation { state: StateId, action: Option<ActionId>, sum: f64 },
    NegativeProbability { state: StateId, outcome: usize, value: f64 },
    EmptyRow { state: StateId, action: Option<ActionId> },
    Deadlock { state: StateId },
    InitialOutOfRange { initial: StateId },
    TargetOutOfRange { state: StateId, target: StateId },
    ActionOutOfRange { state: StateId, action: ActionId },
    DuplicateAction { state: StateId, action: ActionId },
    ObservationConsistency { state: StateId, other: StateId },
    ObservationOutOfRange { state: StateId, observation: ObsId },
    UnobservedObservation { observation: ObsId },
    ObservationMapLength { expected: usize, actual: usize },
    StrategyMissing { observation: String },
    IllegalSupport { observation: String, action: ActionId },
    StrategyRow { observation: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Total check of a model's structural invariants.
pub trait Validate {
    /// Empty iff every invariant holds.
    fn validate(&self) -> Vec<Violation>;
}

fn row_violation(state: StateId, action: Option<ActionId>, row: &Distribution, n: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    match row.violations() {
        Some(RowProblem::Empty) => out.push(Violation::EmptyRow { state, action }),
        Some(RowProblem::Negative(outcome, value)) => {
            out.push(Violation::NegativeProbability { state, outcome, value })
        }
        Some(RowProblem::Sum(sum)) => out.push(Violation::RowSumViolation { state, action, sum }),
        None => {}
    }
    for target in row.support().filter(|&t| t >= n) {
        out.push(Violation::TargetOutOfRange { state, target });
    }
    out
}

/// A Markov decision process with named states and actions. Each state lists
/// its enabled actions sorted by action id.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    state_names: Vec<String>,
    action_names: Vec<String>,
    initial: StateId,
    choices: Vec<Vec<(ActionId, Distribution)>>,
    labels: BTreeMap<String, BTreeSet<StateId>>,
}

impl Mdp {
    /// Validating constructor.
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<String>,
        initial: StateId,
        choices: Vec<Vec<(ActionId, Distribution)>>,
    ) -> Result<Self, ModelError> {
        let mdp = Self::new_unchecked(state_names, action_names, initial, choices);
        let violations = mdp.validate();
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn new_unchecked(
        state_names: Vec<String>,
        action_names: Vec<String>,
        initial: StateId,
        mut choices: Vec<Vec<(ActionId, Distribution)>>,
    ) -> Self {
        for row in &mut choices {
            row.sort_by_key(|(a, _)| *a);
        }
        Mdp { state_names, action_names, initial, choices, labels: BTreeMap::new() }
    }

    pub fn with_labels(mut self, labels: BTreeMap<String, BTreeSet<StateId>>) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_initial(mut self, initial: StateId) -> Result<Self, ModelError> {
        if initial >= self.num_states() {
            return Err(ModelError::Invalid(vec![Violation::InitialOutOfRange { initial }]));
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name)
    }

    /// Enabled actions of `s` with their successor distributions.
    pub fn choices(&self, s: StateId) -> &[(ActionId, Distribution)] {
        &self.choices[s]
    }

    pub fn enabled(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.choices[s].iter().map(|(a, _)| *a)
    }

    pub fn transition(&self, s: StateId, a: ActionId) -> Option<&Distribution> {
        self.choices[s]
            .binary_search_by_key(&a, |(b, _)| *b)
            .ok()
            .map(|i| &self.choices[s][i].1)
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<StateId>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> BTreeSet<StateId> {
        self.labels.get(name).cloned().unwrap_or_default()
    }

    pub fn num_transitions(&self) -> usize {
        self.choices.iter().flatten().map(|(_, d)| d.len()).sum()
    }
}

impl Validate for Mdp {
    fn validate(&self) -> Vec<Violation> {
        let n = self.num_states();
        let mut out = Vec::new();
        if self.initial >= n {
            out.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        for (s, row) in self.choices.iter().enumerate() {
            if row.is_empty() {
                out.push(Violation::Deadlock { state: s });
            }
            for (i, (a, dist)) in row.iter().enumerate() {
                if *a >= self.num_actions() {
                    out.push(Violation::ActionOutOfRange { state: s, action: *a });
                }
                if i > 0 && row[i - 1].0 == *a {
                    out.push(Violation::DuplicateAction { state: s, action: *a });
                }
                out.extend(row_violation(s, Some(*a), dist, n));
            }
        }
        for s in self.choices.len()..n {
            out.push(Violation::Deadlock { state: s });
        }
        out
    }
}

/// A discrete-time Markov chain: one successor distribution per state.
#[derive(Clone, Debug, PartialEq)]
pub struct Mc {
    state_names: Vec<String>,
    initial: StateId,
    rows: Vec<Distribution>,
    labels: BTreeMap<String, BTreeSet<StateId>>,
}

impl Mc {
    pub fn new(state_names: Vec<String>, initial: StateId, rows: Vec<Distribution>) -> Result<Self, ModelError> {
        let mc = Self::new_unchecked(state_names, initial, rows);
        let violations = mc.validate();
        if violations.is_empty() {
            Ok(mc)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn new_unchecked(state_names: Vec<String>, initial: StateId, rows: Vec<Distribution>) -> Self {
        Mc { state_names, initial, rows, labels: BTreeMap::new() }
    }

    /// Anonymous states named `s0`, `s1`, ...
    pub fn from_rows(initial: StateId, rows: Vec<Distribution>) -> Result<Self, ModelError> {
        let names = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Self::new(names, initial, rows)
    }

    pub fn with_labels(mut self, labels: BTreeMap<String, BTreeSet<StateId>>) -> Self {
        self.labels = labels;
        self
    }

    pub fn with_initial(mut self, initial: StateId) -> Self {
        assert!(initial < self.num_states());
        self.initial = initial;
        self
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn row(&self, s: StateId) -> &Distribution {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<StateId>> {
        &self.labels
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Distribution::len).sum()
    }

    /// The chain as an MDP with a single action `"tau"` everywhere.
    pub fn to_mdp(&self) -> Mdp {
        Mdp::new_unchecked(
            self.state_names.clone(),
            vec!["tau".to_owned()],
            self.initial,
            self.rows.iter().map(|r| vec![(0, r.clone())]).collect(),
        )
        .with_labels(self.labels.clone())
    }
}

impl Validate for Mc {
    fn validate(&self) -> Vec<Violation> {
        let n = self.num_states();
        let mut out = Vec::new();
        if self.initial >= n {
            out.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        for (s, row) in self.rows.iter().enumerate() {
            out.extend(row_violation(s, None, row, n));
        }
        out
    }
}

/// A POMDP: an MDP plus a deterministic state-to-observation map.
#[derive(Clone, Debug, PartialEq)]
pub struct Pomdp {
    mdp: Mdp,
    obs_names: Vec<String>,
    obs_of: Vec<ObsId>,
}

impl Pomdp {
    pub fn new(mdp: Mdp, obs_names: Vec<String>, obs_of: Vec<ObsId>) -> Result<Self, ModelError> {
        let pomdp = Self::new_unchecked(mdp, obs_names, obs_of);
        let violations = pomdp.validate();
        if violations.is_empty() {
            Ok(pomdp)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn new_unchecked(mdp: Mdp, obs_names: Vec<String>, obs_of: Vec<ObsId>) -> Self {
        Pomdp { mdp, obs_names, obs_of }
    }

    /// Builds the observation table from per-state observation labels,
    /// numbering observations in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(mdp: Mdp, labels: &[S]) -> Result<Self, ModelError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<&str, ObsId> = BTreeMap::new();
        let mut obs_of = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let id = *index.entry(label).or_insert_with(|| {
                names.push(label.to_owned());
                names.len() - 1
            });
            obs_of.push(id);
        }
        Self::new(mdp, names, obs_of)
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn into_mdp(self) -> Mdp {
        self.mdp
    }

    pub fn with_initial(self, initial: StateId) -> Result<Self, ModelError> {
        Ok(Pomdp { mdp: self.mdp.with_initial(initial)?, ..self })
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_observations(&self) -> usize {
        self.obs_names.len()
    }

    pub fn observation(&self, s: StateId) -> ObsId {
        self.obs_of[s]
    }

    pub fn observation_names(&self) -> &[String] {
        &self.obs_names
    }

    pub fn observation_name(&self, z: ObsId) -> &str {
        &self.obs_names[z]
    }

    pub fn observation_id(&self, name: &str) -> Option<ObsId> {
        self.obs_names.iter().position(|n| n == name)
    }

    /// States carrying observation `z`.
    pub fn preimage(&self, z: ObsId) -> impl Iterator<Item = StateId> + '_ {
        self.obs_of.iter().enumerate().filter(move |(_, o)| **o == z).map(|(s, _)| s)
    }

    /// Enabled actions shared by every state with observation `z`.
    pub fn enabled_at(&self, z: ObsId) -> Option<Vec<ActionId>> {
        self.preimage(z).next().map(|s| self.mdp.enabled(s).collect())
    }

    /// Maximum-entropy prior over the states that produce observation `z`.
    pub fn observation_prior(&self, z: ObsId) -> Result<Distribution, ModelError> {
        if z >= self.num_observations() {
            return Err(ModelError::UnknownObservation(z.to_string()));
        }
        let states: Vec<StateId> = self.preimage(z).collect();
        if states.is_empty() {
            return Err(ModelError::UnknownObservation(self.obs_names[z].clone()));
        }
        Ok(Distribution::uniform(states))
    }

    /// Markov chain induced by a memoryless observation-based strategy: the
    /// row of `s` is the strategy-weighted mixture of the action rows of `s`.
    pub fn induce_mc(&self, strategy: &ObservationStrategy) -> Result<Mc, ModelError> {
        let per_obs = strategy.resolve(self)?;
        let mut rows = Vec::with_capacity(self.num_states());
        let mut acc: BTreeMap<StateId, f64> = BTreeMap::new();
        for s in 0..self.num_states() {
            let choice = per_obs[self.obs_of[s]];
            acc.clear();
            for (a, pa) in choice.iter() {
                let row = self.mdp.transition(s, a).ok_or_else(|| ModelError::IllegalSupport {
                    observation: self.obs_names[self.obs_of[s]].clone(),
                    action: self.mdp.action_names.get(a).cloned().unwrap_or_else(|| a.to_string()),
                })?;
                for (t, pt) in row.iter() {
                    *acc.entry(t).or_insert(0.0) += pa * pt;
                }
            }
            rows.push(Distribution::from_raw(acc.iter().map(|(t, p)| (*t, *p))));
        }
        Ok(Mc::new_unchecked(self.mdp.state_names.clone(), self.mdp.initial, rows)
            .with_labels(self.mdp.labels.clone()))
    }
}

impl Validate for Pomdp {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.mdp.validate();
        let n = self.num_states();
        if self.obs_of.len() != n {
            out.push(Violation::ObservationMapLength { expected: n, actual: self.obs_of.len() });
            return out;
        }
        let mut witness: Vec<Option<StateId>> = vec![None; self.num_observations()];
        for (s, &z) in self.obs_of.iter().enumerate() {
            if z >= self.num_observations() {
                out.push(Violation::ObservationOutOfRange { state: s, observation: z });
                continue;
            }
            match witness[z] {
                None => witness[z] = Some(s),
                Some(w) => {
                    if !self.mdp.enabled(w).eq(self.mdp.enabled(s)) {
                        out.push(Violation::ObservationConsistency { state: w, other: s });
                    }
                }
            }
        }
        for (z, w) in witness.iter().enumerate() {
            if w.is_none() {
                out.push(Violation::UnobservedObservation { observation: z });
            }
        }
        out
    }
}

/// A memoryless randomized strategy that picks an action distribution per
/// observation. Rows are keyed by observation name so one strategy can be
/// applied to every POMDP of a scenario family; action ids index the
/// family's shared action table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationStrategy {
    rows: BTreeMap<String, Distribution>,
}

impl ObservationStrategy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = (String, Distribution)>) -> Self {
        ObservationStrategy { rows: rows.into_iter().collect() }
    }

    /// Uniform over the enabled actions of every observation of `pomdp`.
    pub fn uniform(pomdp: &Pomdp) -> Self {
        Self::from_rows((0..pomdp.num_observations()).map(|z| {
            let enabled = pomdp.enabled_at(z).unwrap_or_default();
            (pomdp.observation_name(z).to_owned(), Distribution::uniform(enabled))
        }))
    }

    pub fn set(&mut self, observation: impl Into<String>, choice: Distribution) {
        self.rows.insert(observation.into(), choice);
    }

    pub fn get(&self, observation: &str) -> Option<&Distribution> {
        self.rows.get(observation)
    }

    pub fn rows(&self) -> &BTreeMap<String, Distribution> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pointwise mixture `t·self + (1−t)·other` over the observations of both.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        let keys: BTreeSet<&String> = self.rows.keys().chain(other.rows.keys()).collect();
        Self::from_rows(keys.into_iter().map(|k| {
            let a = self.rows.get(k).map(|d| d.iter().map(|(o, p)| (o, t * p)).collect::<Vec<_>>());
            let b = other.rows.get(k).map(|d| d.iter().map(|(o, p)| (o, (1.0 - t) * p)).collect::<Vec<_>>());
            (k.clone(), Distribution::from_raw(a.into_iter().flatten().chain(b.into_iter().flatten())))
        }))
    }

    /// Looks up the row of every observation of `pomdp`, checking totality and
    /// the support condition.
    pub(crate) fn resolve<'a>(&'a self, pomdp: &Pomdp) -> Result<Vec<&'a Distribution>, ModelError> {
        (0..pomdp.num_observations())
            .map(|z| {
                let name = pomdp.observation_name(z);
                let row = self.rows.get(name).ok_or_else(|| ModelError::StrategyIncomplete(name.to_owned()))?;
                let enabled = pomdp.enabled_at(z).unwrap_or_default();
                if let Some(a) = row.support().find(|a| !enabled.contains(a)) {
                    return Err(ModelError::IllegalSupport {
                        observation: name.to_owned(),
                        action: pomdp.mdp().action_names().get(a).cloned().unwrap_or_else(|| a.to_string()),
                    });
                }
                Ok(row)
            })
            .collect()
    }

    /// Violations of this strategy relative to `pomdp`.
    pub fn validate_for(&self, pomdp: &Pomdp) -> Vec<Violation> {
        let mut out = Vec::new();
        for z in 0..pomdp.num_observations() {
            let name = pomdp.observation_name(z);
            let Some(row) = self.rows.get(name) else {
                out.push(Violation::StrategyMissing { observation: name.to_owned() });
                continue;
            };
            let enabled = pomdp.enabled_at(z).unwrap_or_default();
            for a in row.support().filter(|a| !enabled.contains(a)) {
                out.push(Violation::IllegalSupport { observation: name.to_owned(), action: a });
            }
        }
        out.extend(self.validate());
        out
    }
}

impl Validate for ObservationStrategy {
    fn validate(&self) -> Vec<Violation> {
        self.rows
            .iter()
            .filter_map(|(z, row)| {
                row.violations().map(|p| Violation::StrategyRow {
                    observation: z.clone(),
                    detail: match p {
                        RowProblem::Empty => "empty row".to_owned(),
                        RowProblem::Negative(a, v) => format!("negative mass {v} on action {a}"),
                        RowProblem::Sum(s) => format!("row sums to {s}"),
                    },
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecKind {
    ReachAvoidProb,
    ExpectedCost,
}

/// A quantitative reach-avoid requirement: `P≥λ(¬B U G)` or `EC≤κ(¬B U G)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spec {
    pub kind: SpecKind,
    pub bad: BTreeSet<StateId>,
    pub goal: BTreeSet<StateId>,
    pub threshold: f64,
}

impl Spec {
    pub fn reach_avoid(bad: BTreeSet<StateId>, goal: BTreeSet<StateId>, lambda: f64) -> Result<Self, ModelError> {
        Spec { kind: SpecKind::ReachAvoidProb, bad, goal, threshold: lambda }.checked()
    }

    pub fn expected_cost(bad: BTreeSet<StateId>, goal: BTreeSet<StateId>, kappa: f64) -> Result<Self, ModelError> {
        Spec { kind: SpecKind::ExpectedCost, bad, goal, threshold: kappa }.checked()
    }

    pub fn with_threshold(self, threshold: f64) -> Result<Self, ModelError> {
        Spec { threshold, ..self }.checked()
    }

    fn checked(self) -> Result<Self, ModelError> {
        if let Some(s) = self.bad.intersection(&self.goal).next() {
            return Err(ModelError::InvalidSpec(format!("state {s} is both bad and goal")));
        }
        let ok = match self.kind {
            SpecKind::ReachAvoidProb => (0.0..=1.0).contains(&self.threshold),
            SpecKind::ExpectedCost => self.threshold >= 0.0,
        };
        if !ok {
            return Err(ModelError::InvalidSpec(format!("threshold {} out of range", self.threshold)));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Pomdp {
        let mdp = Mdp::new(
            vec!["s0".into(), "s1".into()],
            vec!["a".into(), "b".into()],
            0,
            vec![
                vec![(0, Distribution::dirac(1)), (1, Distribution::dirac(0))],
                vec![(0, Distribution::dirac(1)), (1, Distribution::dirac(1))],
            ],
        )
        .unwrap();
        Pomdp::from_labels(mdp, &["z", "z"]).unwrap()
    }

    #[test]
    fn distribution_renormalizes_small_deviation() {
        let d = Distribution::new([(0, 0.5), (1, 0.5 - 5e-10)]).unwrap();
        assert!((d.sum() - 1.0).abs() < 1e-15);
        assert!(matches!(Distribution::new([(0, 0.5), (1, 0.48)]), Err(ModelError::RowSum { .. })));
        assert!(matches!(Distribution::new([(0, 1.5), (1, -0.5)]), Err(ModelError::NegativeProbability { .. })));
        assert!(matches!(Distribution::new([]), Err(ModelError::EmptySupport)));
    }

    #[test]
    fn distribution_keeps_float_noise_exact() {
        let d = Distribution::new([(0, 2.0 / 3.0), (1, 1.0 / 3.0)]).unwrap();
        assert_eq!(d.prob(0), 2.0 / 3.0);
        assert_eq!(d.prob(1), 1.0 / 3.0);
    }

    #[test]
    fn mixture_row() {
        let pomdp = two_state();
        let strat = ObservationStrategy::from_rows([("z".to_owned(), Distribution::new([(0, 0.3), (1, 0.7)]).unwrap())]);
        let mc = pomdp.induce_mc(&strat).unwrap();
        assert_eq!(mc.row(0).prob(1), 0.3);
        assert_eq!(mc.row(0).prob(0), 0.7);
        assert_eq!(mc.row(1).prob(1), 1.0);
    }

    #[test]
    fn induce_errors() {
        let pomdp = two_state();
        let err = pomdp.induce_mc(&ObservationStrategy::new()).unwrap_err();
        assert!(matches!(err, ModelError::StrategyIncomplete(z) if z == "z"));
        let strat = ObservationStrategy::from_rows([("z".to_owned(), Distribution::dirac(5))]);
        assert!(matches!(pomdp.induce_mc(&strat), Err(ModelError::IllegalSupport { .. })));
    }

    #[test]
    fn single_action_pomdp_induces_its_rows() {
        let rows = vec![Distribution::new([(1, 0.25), (0, 0.75)]).unwrap(), Distribution::dirac(1)];
        let mc = Mc::from_rows(0, rows.clone()).unwrap();
        let pomdp = Pomdp::from_labels(mc.to_mdp(), &["x", "y"]).unwrap();
        let induced = pomdp.induce_mc(&ObservationStrategy::uniform(&pomdp)).unwrap();
        assert_eq!(induced.rows(), &rows[..]);
    }

    #[test]
    fn validate_reports_row_sum() {
        let mc = Mc::new_unchecked(vec!["s0".into()], 0, vec![Distribution::from_raw([(0, 0.98)])]);
        assert_eq!(mc.validate(), vec![Violation::RowSumViolation { state: 0, action: None, sum: 0.98 }]);
    }

    #[test]
    fn validate_reports_observation_consistency() {
        let mdp = Mdp::new(
            vec!["s0".into(), "s1".into()],
            vec!["a".into(), "b".into()],
            0,
            vec![vec![(0, Distribution::dirac(1))], vec![(1, Distribution::dirac(1))]],
        )
        .unwrap();
        let pomdp = Pomdp::new_unchecked(mdp, vec!["z".into()], vec![0, 0]);
        assert_eq!(pomdp.validate(), vec![Violation::ObservationConsistency { state: 0, other: 1 }]);
    }

    #[test]
    fn validate_reports_deadlock_and_unobserved() {
        let mdp = Mdp::new_unchecked(vec!["s0".into()], vec!["a".into()], 0, vec![vec![]]);
        let pomdp = Pomdp::new_unchecked(mdp, vec!["z".into(), "w".into()], vec![0]);
        let v = pomdp.validate();
        assert!(v.contains(&Violation::Deadlock { state: 0 }));
        assert!(v.contains(&Violation::UnobservedObservation { observation: 1 }));
    }

    #[test]
    fn prior_is_uniform_over_preimage() {
        let mdp = Mc::from_rows(0, (0..6).map(Distribution::dirac).collect()).unwrap().to_mdp();
        let pomdp = Pomdp::from_labels(mdp, &["a", "b", "c", "a", "b", "c"]).unwrap();
        let prior = pomdp.observation_prior(2).unwrap();
        assert_eq!(prior.entries(), &[(2, 0.5), (5, 0.5)]);
        assert!(matches!(pomdp.observation_prior(9), Err(ModelError::UnknownObservation(_))));
    }

    #[test]
    fn spec_rejects_overlap() {
        let s: BTreeSet<_> = [1].into();
        assert!(Spec::reach_avoid(s.clone(), s.clone(), 0.5).is_err());
        assert!(Spec::reach_avoid(BTreeSet::new(), s.clone(), 1.5).is_err());
        assert!(Spec::expected_cost(BTreeSet::new(), s, -1.0).is_err());
    }
}

//! Explicit-state probabilistic model checking of reach-avoid properties.
//!
//! Both Markov chains and MDPs go through one solver: a graph pass fixes the
//! states with value 0 and 1, and value iteration from below computes the
//! rest to an absolute residual. For an MDP the iteration maximizes over
//! actions, giving the full-observability upper bound for any POMDP
//! strategy.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::CheckError;
use crate::gridworld::GridPomdp;
use crate::model::{Distribution, Mc, Mdp, ObservationStrategy, Spec, SpecKind, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    GaussSeidel,
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { tolerance: 1e-10, max_iterations: 1_000_000, method: Method::GaussSeidel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "SAT")]
    Sat,
    #[serde(rename = "UNSAT")]
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_state_prob: Vec<f64>,
    pub value_at_initial: f64,
    /// Expected steps to the goal given that it is reached safely; `None`
    /// when the goal is unreachable.
    pub conditional_expected_cost: Option<f64>,
    pub verdict: Option<Verdict>,
    pub residual: f64,
    pub iterations: usize,
}

impl CheckResult {
    pub fn without_per_state(mut self) -> Self {
        self.per_state_prob.clear();
        self
    }
}

/// Successor choices per state, shared by the chain and MDP paths.
struct Choices<'a> {
    rows: Vec<Vec<&'a Distribution>>,
    preds: Vec<Vec<StateId>>,
}

impl<'a> Choices<'a> {
    fn new(rows: Vec<Vec<&'a Distribution>>) -> Self {
        let mut preds = vec![Vec::new(); rows.len()];
        for (s, choices) in rows.iter().enumerate() {
            let succ: BTreeSet<StateId> = choices.iter().flat_map(|d| d.support()).collect();
            for t in succ {
                preds[t].push(s);
            }
        }
        Choices { rows, preds }
    }

    fn of_mc(mc: &'a Mc) -> Self {
        Self::new(mc.rows().iter().map(|r| vec![r]).collect())
    }

    fn of_mdp(mdp: &'a Mdp) -> Self {
        Self::new((0..mdp.num_states()).map(|s| mdp.choices(s).iter().map(|(_, d)| d).collect()).collect())
    }

    fn len(&self) -> usize {
        self.rows.len()
    }
}

fn check_sets(n: usize, bad: &BTreeSet<StateId>, goal: &BTreeSet<StateId>) -> Result<(), CheckError> {
    if let Some(s) = bad.intersection(goal).next() {
        return Err(CheckError::InvalidSpec(format!("state {s} is both bad and goal")));
    }
    if let Some(s) = bad.iter().chain(goal).find(|&&s| s >= n) {
        return Err(CheckError::InvalidSpec(format!("state {s} out of range")));
    }
    Ok(())
}

/// States that can reach the goal through non-bad states under some choice.
/// Also returns the backward distance to the goal.
fn can_reach(ch: &Choices, bad: &[bool], goal: &[bool]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; ch.len()];
    let mut queue: VecDeque<StateId> = (0..ch.len()).filter(|&s| goal[s]).collect();
    for &s in &queue {
        dist[s] = 0;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &ch.preds[t] {
            if dist[s] == usize::MAX && !bad[s] && !goal[s] {
                dist[s] = dist[t] + 1;
                queue.push_back(s);
            }
        }
    }
    dist
}

/// States with value one under some choice: a greatest fixed point over
/// the candidate set `u`, with an inner reachability pass that only uses
/// choices staying inside `u`.
fn value_one(ch: &Choices, bad: &[bool], goal: &[bool], reach: &[usize]) -> Vec<bool> {
    let n = ch.len();
    let mut u: Vec<bool> = (0..n).map(|s| reach[s] != usize::MAX).collect();
    loop {
        let mut v: Vec<bool> = goal.to_vec();
        let mut queue: VecDeque<StateId> = (0..n).filter(|&s| goal[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &ch.preds[t] {
                if v[s] || bad[s] || !u[s] {
                    continue;
                }
                let ok = ch.rows[s].iter().any(|d| d.support().all(|x| u[x]) && d.support().any(|x| v[x]));
                if ok {
                    v[s] = true;
                    queue.push_back(s);
                }
            }
        }
        if v == u {
            return u;
        }
        u = v;
    }
}

struct Solution {
    values: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn sweep_value(ch: &Choices, x: &[f64], s: StateId) -> f64 {
    ch.rows[s]
        .iter()
        .map(|d| d.iter().map(|(t, p)| p * x[t]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Value iteration for the maximal probability of `¬bad U goal`. Runs at
/// most `sweeps` sweeps when given; otherwise iterates to tolerance.
fn solve(
    ch: &Choices,
    bad: &BTreeSet<StateId>,
    goal: &BTreeSet<StateId>,
    opts: &CheckOptions,
    sweeps: Option<usize>,
) -> Result<Solution, CheckError> {
    let n = ch.len();
    let bad_mask: Vec<bool> = (0..n).map(|s| bad.contains(&s)).collect();
    let goal_mask: Vec<bool> = (0..n).map(|s| goal.contains(&s)).collect();
    let reach = can_reach(ch, &bad_mask, &goal_mask);
    let one = value_one(ch, &bad_mask, &goal_mask, &reach);
    let mut x: Vec<f64> = one.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect();
    let mut maybe: Vec<StateId> = (0..n).filter(|&s| reach[s] != usize::MAX && !one[s]).collect();
    maybe.sort_by_key(|&s| (reach[s], s));
    let cap = sweeps.unwrap_or(opts.max_iterations);
    let mut residual = if maybe.is_empty() { 0.0 } else { f64::INFINITY };
    let mut iterations = 0;
    let mut next = x.clone();
    while iterations < cap && residual > opts.tolerance {
        residual = 0.0;
        match opts.method {
            Method::GaussSeidel => {
                for &s in &maybe {
                    let v = sweep_value(ch, &x, s);
                    residual = f64::max(residual, (v - x[s]).abs());
                    x[s] = v;
                }
            }
            Method::Jacobi => {
                for &s in &maybe {
                    next[s] = sweep_value(ch, &x, s);
                    residual = f64::max(residual, (next[s] - x[s]).abs());
                }
                for &s in &maybe {
                    x[s] = next[s];
                }
            }
        }
        iterations += 1;
    }
    if sweeps.is_none() && residual > opts.tolerance {
        return Err(CheckError::NoConvergence { iterations, residual });
    }
    Ok(Solution { values: x, residual, iterations })
}

pub fn reach_avoid_prob(mc: &Mc, bad: &BTreeSet<StateId>, goal: &BTreeSet<StateId>) -> Result<CheckResult, CheckError> {
    reach_avoid_prob_with(mc, bad, goal, &CheckOptions::default())
}

/// Probability of reaching `goal` without passing through `bad`, per state.
pub fn reach_avoid_prob_with(
    mc: &Mc,
    bad: &BTreeSet<StateId>,
    goal: &BTreeSet<StateId>,
    opts: &CheckOptions,
) -> Result<CheckResult, CheckError> {
    check_sets(mc.num_states(), bad, goal)?;
    let sol = solve(&Choices::of_mc(mc), bad, goal, opts, None)?;
    Ok(CheckResult {
        value_at_initial: sol.values[mc.initial()],
        per_state_prob: sol.values,
        conditional_expected_cost: None,
        verdict: None,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// Values after exactly `sweeps` sweeps from the zero vector.
pub fn reach_avoid_iterate(
    mc: &Mc,
    bad: &BTreeSet<StateId>,
    goal: &BTreeSet<StateId>,
    method: Method,
    sweeps: usize,
) -> Result<Vec<f64>, CheckError> {
    check_sets(mc.num_states(), bad, goal)?;
    let opts = CheckOptions { tolerance: 0.0, method, ..CheckOptions::default() };
    Ok(solve(&Choices::of_mc(mc), bad, goal, &opts, Some(sweeps))?.values)
}

/// Maximal reach-avoid probabilities over all strategies of `mdp`.
pub fn mdp_max_reach(mdp: &Mdp, bad: &BTreeSet<StateId>, goal: &BTreeSet<StateId>) -> Result<CheckResult, CheckError> {
    mdp_max_reach_with(mdp, bad, goal, &CheckOptions::default())
}

pub fn mdp_max_reach_with(
    mdp: &Mdp,
    bad: &BTreeSet<StateId>,
    goal: &BTreeSet<StateId>,
    opts: &CheckOptions,
) -> Result<CheckResult, CheckError> {
    check_sets(mdp.num_states(), bad, goal)?;
    let sol = solve(&Choices::of_mdp(mdp), bad, goal, opts, None)?;
    Ok(CheckResult {
        value_at_initial: sol.values[mdp.initial()],
        per_state_prob: sol.values,
        conditional_expected_cost: None,
        verdict: None,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// Expected steps to `goal` conditioned on reaching it while avoiding
/// `bad`, from every state. `None` where the success probability is zero.
pub fn conditional_expected_costs(
    mc: &Mc,
    bad: &BTreeSet<StateId>,
    goal: &BTreeSet<StateId>,
    success: &[f64],
    opts: &CheckOptions,
) -> Result<Vec<Option<f64>>, CheckError> {
    let n = mc.num_states();
    let live: Vec<StateId> = (0..n).filter(|&s| success[s] > 0.0 && !goal.contains(&s) && !bad.contains(&s)).collect();
    let mut order = live.clone();
    let reach = can_reach(
        &Choices::of_mc(mc),
        &(0..n).map(|s| bad.contains(&s)).collect::<Vec<_>>(),
        &(0..n).map(|s| goal.contains(&s)).collect::<Vec<_>>(),
    );
    order.sort_by_key(|&s| (reach[s], s));
    // success-weighted step mass: m(s) = Σ P(s,t)·(w(t) + m(t))
    let mut mass = vec![0.0; n];
    let mut residual = if order.is_empty() { 0.0 } else { f64::INFINITY };
    let mut iterations = 0;
    while residual > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(CheckError::NoConvergence { iterations, residual });
        }
        residual = 0.0;
        for &s in &order {
            let v: f64 = mc
                .row(s)
                .iter()
                .filter(|(t, _)| success[*t] > 0.0)
                .map(|(t, p)| p * (success[t] + mass[t]))
                .sum();
            residual = f64::max(residual, (v - mass[s]).abs() / v.abs().max(1.0));
            mass[s] = v;
        }
        iterations += 1;
    }
    Ok((0..n)
        .map(|s| {
            if success[s] <= 0.0 || bad.contains(&s) {
                None
            } else if goal.contains(&s) {
                Some(0.0)
            } else {
                Some(mass[s] / success[s])
            }
        })
        .collect())
}

/// Conditional expected cost from the initial state, one unit per step.
pub fn conditional_expected_cost(mc: &Mc, bad: &BTreeSet<StateId>, goal: &BTreeSet<StateId>) -> Result<Option<f64>, CheckError> {
    let r = reach_avoid_prob(mc, bad, goal)?;
    Ok(conditional_expected_costs(mc, bad, goal, &r.per_state_prob, &CheckOptions::default())?[mc.initial()])
}

/// Probability and conditional cost at the initial state, with a verdict
/// against `spec`.
pub fn check_spec(mc: &Mc, spec: &Spec) -> Result<CheckResult, CheckError> {
    check_spec_with(mc, spec, &CheckOptions::default())
}

pub fn check_spec_with(mc: &Mc, spec: &Spec, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    let mut r = reach_avoid_prob_with(mc, &spec.bad, &spec.goal, opts)?;
    r.conditional_expected_cost =
        conditional_expected_costs(mc, &spec.bad, &spec.goal, &r.per_state_prob, opts)?[mc.initial()];
    let sat = match spec.kind {
        SpecKind::ReachAvoidProb => r.value_at_initial >= spec.threshold,
        SpecKind::ExpectedCost => r.conditional_expected_cost.is_some_and(|c| c <= spec.threshold),
    };
    r.verdict = Some(if sat { Verdict::Sat } else { Verdict::Unsat });
    Ok(r)
}

/// Safe-arrival probability per start cell, with the obstacle at its start.
/// Landmark and obstacle cells hold `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Row-major from `y = 0`.
    pub cells: Vec<Option<f64>>,
}

impl Heatmap {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.cells[y * self.width + x]
    }

    /// `grid[y][x]`.
    pub fn grid(&self) -> Vec<Vec<Option<f64>>> {
        self.cells.chunks(self.width).map(<[_]>::to_vec).collect()
    }

    /// `x,y,prob` rows; blocked cells have an empty `prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,prob\n");
        for y in 0..self.height {
            for x in 0..self.width {
                match self.get(x, y) {
                    Some(p) => writeln!(out, "{x},{y},{p}"),
                    None => writeln!(out, "{x},{y},"),
                }
                .expect("write to string");
            }
        }
        out
    }
}

pub fn heatmap(grid: &GridPomdp, strategy: &ObservationStrategy) -> Result<Heatmap, CheckError> {
    let mc = grid.pomdp.induce_mc(strategy)?;
    let r = reach_avoid_prob(&mc, &grid.spec.bad, &grid.spec.goal)?;
    heatmap_from(grid, &r.per_state_prob)
}

/// Heatmap read off per-state probabilities of an induced chain.
pub fn heatmap_from(grid: &GridPomdp, per_state: &[f64]) -> Result<Heatmap, CheckError> {
    let c = &grid.config;
    let free: BTreeSet<_> = c.free_cells().into_iter().collect();
    let cells = c
        .cells()
        .map(|p| {
            free.contains(&p)
                .then(|| per_state[grid.state_id(crate::gridworld::GridState { agent: p, obstacle: c.obstacle_start })])
        })
        .collect();
    Ok(Heatmap { width: c.width, height: c.height, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{blue_choice, randomization_vs_memory};

    fn mc(rows: &[&[(usize, f64)]]) -> Mc {
        Mc::from_rows(0, rows.iter().map(|r| Distribution::new(r.iter().copied()).unwrap()).collect()).unwrap()
    }

    fn set(s: &[usize]) -> BTreeSet<usize> {
        s.iter().copied().collect()
    }

    #[test]
    fn randomization_fixture_values() {
        let pomdp = randomization_vs_memory();
        let goal = pomdp.mdp().label("goal");
        let up = pomdp.induce_mc(&blue_choice(1.0)).unwrap();
        let r = reach_avoid_prob(&up, &BTreeSet::new(), &goal).unwrap();
        assert!((r.value_at_initial - 2.0 / 3.0).abs() < 1e-9);
        let half = pomdp.induce_mc(&blue_choice(0.5)).unwrap();
        let r = reach_avoid_prob(&half, &BTreeSet::new(), &goal).unwrap();
        assert!((r.value_at_initial - 5.0 / 6.0).abs() < 1e-9);
        let bound = mdp_max_reach(pomdp.mdp(), &BTreeSet::new(), &goal).unwrap();
        assert!((bound.value_at_initial - 1.0).abs() < 1e-9);
    }

    #[test]
    fn initial_in_goal() {
        let m = mc(&[&[(0, 1.0)]]);
        assert_eq!(reach_avoid_prob(&m, &set(&[]), &set(&[0])).unwrap().value_at_initial, 1.0);
    }

    #[test]
    fn overlap_rejected() {
        let m = mc(&[&[(0, 1.0)]]);
        assert!(matches!(reach_avoid_prob(&m, &set(&[0]), &set(&[0])), Err(CheckError::InvalidSpec(_))));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let m = mc(&[&[(0, 0.9), (1, 0.1)], &[(1, 1.0)]]);
        let opts = CheckOptions { max_iterations: 3, method: Method::Jacobi, ..CheckOptions::default() };
        let m2 = mc(&[&[(1, 0.5), (2, 0.5)], &[(0, 0.5), (3, 0.5)], &[(2, 1.0)], &[(3, 1.0)]]);
        let _ = m;
        // prob1 precomputation leaves only 0↔1 to iterate
        match reach_avoid_prob_with(&m2, &set(&[2]), &set(&[3]), &opts) {
            Err(CheckError::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn corridor_cost() {
        let m = mc(&[&[(1, 1.0)], &[(2, 1.0)], &[(3, 1.0)], &[(3, 1.0)]]);
        assert_eq!(conditional_expected_cost(&m, &set(&[]), &set(&[3])).unwrap(), Some(3.0));
    }

    #[test]
    fn two_path_mixture_cost() {
        // s0 -> goal directly (1/2) or through s1, s2 (1/2)
        let m = mc(&[&[(3, 0.5), (1, 0.5)], &[(2, 1.0)], &[(3, 1.0)], &[(3, 1.0)]]);
        let c = conditional_expected_cost(&m, &set(&[]), &set(&[3])).unwrap().unwrap();
        assert!((c - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cost_conditions_on_success() {
        // half the mass crashes at once; survivors need two steps
        let m = mc(&[&[(1, 0.5), (3, 0.5)], &[(2, 1.0)], &[(2, 1.0)], &[(3, 1.0)]]);
        let c = conditional_expected_cost(&m, &set(&[3]), &set(&[2])).unwrap().unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_goal_cost_undefined() {
        let m = mc(&[&[(0, 1.0)], &[(1, 1.0)]]);
        assert_eq!(conditional_expected_cost(&m, &set(&[]), &set(&[1])).unwrap(), None);
    }

    #[test]
    fn spec_verdicts() {
        let pomdp = randomization_vs_memory();
        let goal = pomdp.mdp().label("goal");
        let half = pomdp.induce_mc(&blue_choice(0.5)).unwrap();
        let at = |l: f64| check_spec(&half, &Spec::reach_avoid(BTreeSet::new(), goal.clone(), l).unwrap()).unwrap().verdict;
        assert_eq!(at(0.8), Some(Verdict::Sat));
        assert_eq!(at(0.9), Some(Verdict::Unsat));
        assert_eq!(at(0.0), Some(Verdict::Sat));
        let stuck = mc(&[&[(0, 1.0)], &[(1, 1.0)]]);
        let spec = Spec::reach_avoid(BTreeSet::new(), set(&[1]), 0.1).unwrap();
        assert_eq!(check_spec(&stuck, &spec).unwrap().verdict, Some(Verdict::Unsat));
        let cost = Spec::expected_cost(BTreeSet::new(), set(&[1]), 100.0).unwrap();
        assert_eq!(check_spec(&stuck, &cost).unwrap().verdict, Some(Verdict::Unsat));
    }

    #[test]
    fn chain_as_mdp_is_identical() {
        let m = mc(&[&[(1, 0.3), (2, 0.7)], &[(0, 0.4), (3, 0.6)], &[(2, 0.5), (1, 0.25), (4, 0.25)], &[(3, 1.0)], &[(4, 1.0)]]);
        let a = reach_avoid_prob(&m, &set(&[4]), &set(&[3])).unwrap();
        let b = mdp_max_reach(&m.to_mdp(), &set(&[4]), &set(&[3])).unwrap();
        assert_eq!(a.per_state_prob, b.per_state_prob);
    }

    #[test]
    fn iterates_grow_monotonically() {
        let m = mc(&[&[(1, 0.3), (2, 0.7)], &[(0, 0.4), (3, 0.6)], &[(0, 0.5), (1, 0.25), (4, 0.25)], &[(3, 1.0)], &[(4, 1.0)]]);
        for method in [Method::GaussSeidel, Method::Jacobi] {
            let mut prev = reach_avoid_iterate(&m, &set(&[4]), &set(&[3]), method, 0).unwrap();
            for k in 1..40 {
                let cur = reach_avoid_iterate(&m, &set(&[4]), &set(&[3]), method, k).unwrap();
                assert!(prev.iter().zip(&cur).all(|(a, b)| a <= b));
                prev = cur;
            }
        }
    }

    #[test]
    fn heatmap_on_small_grid() {
        use crate::gridworld::{build_pomdp, Pos, ScenarioConfig};
        let c = ScenarioConfig::new(3, 3, Pos::new(2, 2), Pos::new(0, 0));
        let g = build_pomdp(&c).unwrap();
        let s = ObservationStrategy::uniform(&g.pomdp);
        let h = heatmap(&g, &s).unwrap();
        assert_eq!((h.width, h.height), (3, 3));
        assert_eq!(h.get(2, 2), Some(1.0));
        assert_eq!(h.get(0, 0), None);
        assert!(h.cells.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(h.to_csv().lines().count(), 10);
    }
}

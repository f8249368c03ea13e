//! One PASS/FAIL line per acceptance criterion; exits non-zero if any
//! fails. Run with `cargo test -p hilsynth-cli --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hilsynth::cloning::{initial_strategy, scenario_independent_strategy};
use hilsynth::features::{class_stats, equivalent, feature, ClassTable, FeatureTuple};
use hilsynth::fixtures::blue_choice;
use hilsynth::format::read_pomdp;
use hilsynth::gridworld::{build_pomdp, random_scenario, Action, GridPomdp, ObsVector, Pos, ScenarioConfig, ScenarioRanges};
use hilsynth::refine::{refine_loop, RefineOptions, ScriptedSessions, StopReason};
use hilsynth::training::{collect_demonstrations, hoeffding_min_samples, with_efficiency, ScriptedDemonstrator};
use hilsynth::verify::{check_spec, conditional_expected_cost, mdp_max_reach, reach_avoid_prob};
use hilsynth::{Distribution, Mc, ObservationStrategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, format!("{what}: {a} vs {b}"))
}

fn fixture_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/randomization_vs_memory.json").to_owned()
}

fn randomization_vs_memory() -> Outcome {
    let t = Instant::now();
    let pomdp = read_pomdp(&std::fs::read_to_string(fixture_path()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let goal = pomdp.mdp().label("goal");
    let none = BTreeSet::new();
    let value = |p: f64| -> Result<f64, String> {
        let mc = pomdp.induce_mc(&blue_choice(p)).map_err(|e| e.to_string())?;
        Ok(reach_avoid_prob(&mc, &none, &goal).map_err(|e| e.to_string())?.value_at_initial)
    };
    close(value(1.0)?, 2.0 / 3.0, 1e-9, "always up")?;
    for p in [0.25, 0.5, 0.75] {
        close(value(p)?, 2.0 / 3.0 + p / 3.0, 1e-9, &format!("p = {p}"))?;
    }
    let bound = mdp_max_reach(pomdp.mdp(), &none, &goal).map_err(|e| e.to_string())?.value_at_initial;
    close(bound, 1.0, 1e-9, "bound")?;
    let ms = t.elapsed().as_secs_f64() * 1e3;
    ensure(ms < 1000.0, format!("took {ms:.1} ms"))?;
    Ok(format!("2/3, 2/3 + p/3 for p in {{0.25, 0.5, 0.75}}, bound 1; {ms:.1} ms"))
}

fn hoeffding() -> Outcome {
    let n = hoeffding_min_samples(0.05, 0.01).map_err(|e| e.to_string())?;
    let adjusted = with_efficiency(n, 4.0).map_err(|e| e.to_string())?;
    ensure(n == 1060 && adjusted == 265, format!("{n} / {adjusted}"))?;
    Ok(format!("{n} samples, {adjusted} after efficiency 4"))
}

fn feature_algebra() -> Outcome {
    let t = Instant::now();
    let pairs: Vec<(ObsVector, Action)> =
        ObsVector::all().flat_map(|z| Action::ALL.map(|a| (z, a))).collect();
    ensure(pairs.len() == 1024, "pair count")?;
    for &(z1, a1) in &pairs {
        ensure(equivalent(z1, a1, z1, a1), "reflexive")?;
        for &(z2, a2) in &pairs {
            let e = equivalent(z1, a1, z2, a2);
            ensure(e == equivalent(z2, a2, z1, a1), "symmetric")?;
        }
    }
    // Transitivity holds iff equivalence is equality of a key; check that
    // every class is closed under the relation against a representative.
    let table = ClassTable::by_features();
    for (_, members) in table.classes() {
        let (z0, a0) = members[0];
        for &(z, a) in members {
            ensure(equivalent(z0, a0, z, a), "class member not equivalent to representative")?;
        }
    }
    for &(z1, a1) in &pairs {
        for &(z2, a2) in &pairs {
            let same = table.class_of(z1, a1) == table.class_of(z2, a2);
            ensure(same == equivalent(z1, a1, z2, a2), "partition disagrees with relation")?;
        }
    }
    let down_left = ObsVector::from_set([1]);
    let up_right = ObsVector::from_set([5]);
    ensure(equivalent(down_left, Action::Right, up_right, Action::Left), "mirrored pair not equivalent")?;
    ensure(feature(down_left, Action::Right) == FeatureTuple { f1: 1, f2: 0, f3: 1 }, "tuple (1,0,1)")?;
    let stats = class_stats(&table);
    ensure(stats.largest_per_action <= 70, format!("class of {} for one action", stats.largest_per_action))?;
    let ms = t.elapsed().as_secs_f64() * 1e3;
    ensure(ms < 1000.0, format!("took {ms:.1} ms"))?;
    Ok(format!("{} classes, largest per action {}, {ms:.1} ms", stats.classes, stats.largest_per_action))
}

fn random_mc(rng: &mut ChaCha8Rng) -> (Mc, BTreeSet<usize>, BTreeSet<usize>) {
    let n = rng.random_range(2..=6);
    let rows = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=n);
            let w: Vec<(usize, f64)> = (0..k).map(|_| (rng.random_range(0..n), rng.random_range(0.05..1.0))).collect();
            let total: f64 = w.iter().map(|x| x.1).sum();
            Distribution::from_raw(w.into_iter().map(|(t, x)| (t, x / total)))
        })
        .collect();
    let (mut bad, mut goal) = (BTreeSet::new(), BTreeSet::new());
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
    (Mc::from_rows(initial, rows).expect("valid chain"), bad, goal)
}

/// Probability mass of paths reaching `goal` before `bad` within `horizon`.
fn path_mass(mc: &Mc, bad: &BTreeSet<usize>, goal: &BTreeSet<usize>, horizon: usize) -> Vec<f64> {
    let n = mc.num_states();
    let mut x: Vec<f64> = (0..n).map(|s| f64::from(u8::from(goal.contains(&s)))).collect();
    for _ in 0..horizon {
        x = (0..n)
            .map(|s| match (goal.contains(&s), bad.contains(&s)) {
                (true, _) => 1.0,
                (_, true) => 0.0,
                _ => mc.row(s).iter().map(|(t, p)| p * x[t]).sum(),
            })
            .collect();
    }
    x
}

fn checker_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (mc, bad, goal) = random_mc(&mut rng);
        let r = reach_avoid_prob(&mc, &bad, &goal).map_err(|e| format!("chain {i}: {e}"))?;
        for (a, b) in r.per_state_prob.iter().zip(path_mass(&mc, &bad, &goal, 10_000)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < 1e-6, format!("max deviation {worst:e}"))?;
    let d = |e: &[(usize, f64)]| Distribution::new(e.iter().copied()).expect("row");
    let cost = |mc: Mc, bad: &[usize], goal: &[usize]| -> Result<f64, String> {
        conditional_expected_cost(&mc, &bad.iter().copied().collect(), &goal.iter().copied().collect())
            .map_err(|e| e.to_string())?
            .ok_or_else(|| "undefined cost".to_owned())
    };
    let two_routes =
        Mc::from_rows(0, vec![d(&[(4, 0.25), (1, 0.75)]), d(&[(2, 1.0)]), d(&[(4, 1.0)]), d(&[(3, 1.0)]), d(&[(4, 1.0)])])
            .map_err(|e| e.to_string())?;
    close(cost(two_routes, &[], &[4])?, 0.25 + 0.75 * 3.0, 1e-9, "two routes")?;
    let retry = Mc::from_rows(0, vec![d(&[(0, 0.5), (1, 0.5)]), d(&[(1, 1.0)])]).map_err(|e| e.to_string())?;
    close(cost(retry, &[], &[1])?, 2.0, 1e-9, "geometric retry")?;
    let crash = Mc::from_rows(0, vec![d(&[(1, 2.0 / 3.0), (3, 1.0 / 3.0)]), d(&[(2, 1.0)]), d(&[(2, 1.0)]), d(&[(3, 1.0)])])
        .map_err(|e| e.to_string())?;
    close(cost(crash, &[3], &[2])?, 2.0, 1e-9, "crash excluded")?;
    Ok(format!("100 chains, max deviation {worst:.1e}; 3 mixture costs exact to 1e-9"))
}

fn random_strategy(grid: &GridPomdp, rng: &mut ChaCha8Rng) -> ObservationStrategy {
    ObservationStrategy::from_rows(grid.pomdp.observation_names().iter().map(|z| {
        let w: Vec<f64> = (0..4).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = w.iter().sum();
        let row = if total == 0.0 {
            Distribution::dirac(rng.random_range(0..4))
        } else {
            Distribution::from_raw(w.iter().enumerate().map(|(a, x)| (a, x / total)))
        };
        (z.clone(), row)
    }))
}

fn bound_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ranges = ScenarioRanges { width: (4, 6), height: (4, 6), landmarks: (0, 2), ..ScenarioRanges::default() };
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..10 {
        let config = random_scenario(&mut rng, &ranges).map_err(|e| e.to_string())?;
        let grid = build_pomdp(&config).map_err(|e| e.to_string())?;
        let bound = mdp_max_reach(grid.pomdp.mdp(), &grid.spec.bad, &grid.spec.goal).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let mc = grid.pomdp.induce_mc(&random_strategy(&grid, &mut rng)).map_err(|e| e.to_string())?;
            let r = reach_avoid_prob(&mc, &grid.spec.bad, &grid.spec.goal).map_err(|e| e.to_string())?;
            checked += 1;
            if r.per_state_prob.iter().zip(&bound.per_state_prob).any(|(v, b)| *v > b + 1e-8) {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("{checked} strategies on 10 scenarios, 0 violations"))
}

fn refinement_trend() -> Outcome {
    let t = Instant::now();
    let seed = 0;
    let demonstrator = ScriptedDemonstrator::default();
    ensure(demonstrator.noise == 0.1, "demonstrator noise")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ts, _) = collect_demonstrations(&ScenarioRanges::default(), &demonstrator, 265, &mut rng).map_err(|e| e.to_string())?;
    let config = ScenarioConfig::new(4, 4, Pos::new(3, 3), Pos::new(3, 0))
        .with_landmarks([Pos::new(1, 2)])
        .with_start(Pos::new(0, 0));
    let grid = build_pomdp(&config).map_err(|e| e.to_string())?;
    let spec = grid.spec.clone().with_threshold(0.99).map_err(|e| e.to_string())?;
    let initial = initial_strategy(&ts, &ClassTable::by_features(), &grid.pomdp);
    let opts = RefineOptions { k: 20, ..RefineOptions::default() };
    let out = refine_loop(&grid, &spec, initial, &mut ScriptedSessions::new(demonstrator, seed), &opts)
        .map_err(|a| a.error.to_string())?;
    let probs: Vec<f64> = out.history.iter().map(|h| h.prob).collect();
    let trace = probs.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" -> ");
    for w in probs.windows(2) {
        ensure(w[1] >= w[0] - 0.02, format!("drop beyond noise band: {trace}"))?;
    }
    ensure(probs.len() > 4 && probs[4] - probs[0] >= 0.10, format!("gain by iteration 4 too small: {trace}"))?;
    ensure(out.stop == StopReason::Plateau, format!("stopped by {:?}: {trace}", out.stop))?;
    ensure(probs.len() - 1 <= 10, format!("{} iterations", probs.len() - 1))?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("took {secs:.1} s"))?;
    Ok(format!("{trace}, plateau after {} iterations, {secs:.1} s", probs.len() - 1))
}

fn scale() -> Outcome {
    let t = Instant::now();
    let config = ScenarioConfig::new(10, 10, Pos::new(9, 9), Pos::new(5, 5))
        .with_landmarks([Pos::new(3, 6)])
        .with_start(Pos::new(0, 0));
    let grid = build_pomdp(&config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (ts, _) =
        collect_demonstrations(&ScenarioRanges::default(), &ScriptedDemonstrator::default(), 265, &mut rng).map_err(|e| e.to_string())?;
    let strategy = scenario_independent_strategy(&ts, &ClassTable::by_features());
    let mc = grid.pomdp.induce_mc(&strategy).map_err(|e| e.to_string())?;
    let r = check_spec(&mc, &grid.spec).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let expected = 100 * 100 + 1;
    ensure(mc.num_states() == expected, format!("{} states, expected {expected}", mc.num_states()))?;
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("{} states, prob {:.4}, end to end {secs:.2} s", mc.num_states(), r.value_at_initial))
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hilsynth"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// All files under `dir`, sorted, with their bytes.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("prefix").display().to_string();
                out.push((rel, std::fs::read(&path).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let inputs = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = inputs.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"width":4,"height":4,"landmarks":[[1,2]],"obstacle_start":[3,0],"goal":[3,3],"agent_start":[0,0],"visibility":1,"rng_seed":0}"#,
    )
    .map_err(|e| e.to_string())?;
    run_cli(&["demo", "--seed", "3", "--samples", "265", "--out", "in-log.jsonl"], inputs.path())?;
    run_cli(&["clone", "--log", "in-log.jsonl", "--out", "in-strategy.json"], inputs.path())?;
    let fixture = fixture_path();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("gen", vec!["gen", "--seed", "5", "--count", "3", "--out", "scenarios"]),
        ("demo", vec!["demo", "--seed", "5", "--episodes", "20", "--out", "log.jsonl", "--training-set", "ts.csv"]),
        ("clone", vec!["clone", "--log", "../inputs/in-log.jsonl", "--out", "strategy.json"]),
        ("check", vec!["check", "--model", &fixture, "--uniform", "--threshold", "0.8", "--out", "check.json"]),
        ("bound", vec!["bound", "--scenario", "../inputs/scenario.json", "--out", "bound.json"]),
        (
            "refine",
            vec!["refine", "--scenario", "../inputs/scenario.json", "--strategy", "../inputs/in-strategy.json", "--seed", "5", "--k", "10", "--max-iters", "3", "--out-dir", "refine"],
        ),
        ("heatmap", vec!["heatmap", "--scenario", "../inputs/scenario.json", "--strategy", "../inputs/in-strategy.json", "--out", "heatmap.csv"]),
        ("hoeffding", vec!["hoeffding", "--eps", "0.05", "--delta", "0.01"]),
    ];
    let mut names = Vec::new();
    for (name, args) in &commands {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let root = tempfile::tempdir().map_err(|e| e.to_string())?;
            let inputs_link = root.path().join("inputs");
            copy_dir(inputs.path(), &inputs_link)?;
            let work = root.path().join("work");
            std::fs::create_dir(&work).map_err(|e| e.to_string())?;
            let stdout = run_cli(args, &work)?;
            let mut files = snapshot(&work);
            if files.is_empty() {
                files.push(("stdout".into(), stdout));
            }
            runs.push(files);
        }
        ensure(!runs[0].is_empty(), format!("{name}: no artifacts"))?;
        ensure(runs[0] == runs[1], format!("{name}: artifacts differ between runs"))?;
        names.push(*name);
    }
    Ok(format!("byte-identical artifacts for {}", names.join(", ")))
}

fn copy_dir(from: &Path, to: &Path) -> Result<(), String> {
    std::fs::create_dir_all(to).map_err(|e| e.to_string())?;
    for entry in std::fs::read_dir(from).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        std::fs::copy(&path, to.join(path.file_name().expect("file name"))).map_err(|e| e.to_string())?;
    }
    Ok(())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("randomization vs memory oracle", randomization_vs_memory),
        ("hoeffding sample bound", hoeffding),
        ("feature algebra", feature_algebra),
        ("checker oracle equivalence", checker_oracle),
        ("bound soundness", bound_soundness),
        ("refinement trend", refinement_trend),
        ("scale 10x10", scale),
        ("cli determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                failed.push(name);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", 8 - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

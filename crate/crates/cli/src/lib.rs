//! Subcommands of the `hilsynth` binary. Every command is a function from
//! parsed arguments to an exit status so tests can drive them in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hilsynth::cloning::{scenario_independent_strategy, Provenance, StrategyFile};
use hilsynth::features::ClassTable;
use hilsynth::format::{read_model, Model};
use hilsynth::gridworld::{build_pomdp, random_scenario, Action, ScenarioConfig, ScenarioRanges};
use hilsynth::refine::{history_jsonl, refine_loop, RefineOptions, ScriptedSessions};
use hilsynth::training::{
    default_max_steps, hoeffding_min_samples, read_log, run_episode, sample_start, training_set_from, with_efficiency,
    ScriptedDemonstrator, TrainingSet, Trajectory,
};
use hilsynth::verify::{check_spec_with, heatmap, mdp_max_reach_with, CheckOptions, Method, Verdict};
use hilsynth::{CheckError, Mdp, ObservationStrategy, Pomdp, Spec};
use hilsynth_service::session::session_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "hilsynth", version, about = "Clone, check and refine observation-based strategies for gridworld POMDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample scenario files.
    Gen(GenArgs),
    /// Run scripted-demonstrator episodes and write a trajectory log.
    Demo(DemoArgs),
    /// Clone a scenario-independent strategy from logs or a training set.
    Clone(CloneArgs),
    /// Check a strategy on a model or scenario.
    Check(CheckArgs),
    /// Full-observability upper bound on the reach-avoid probability.
    Bound(BoundArgs),
    /// Run the refinement loop with the scripted demonstrator.
    Refine(RefineArgs),
    /// Per-start-cell reach-avoid probabilities as CSV.
    Heatmap(HeatmapArgs),
    /// Minimum number of samples for an (eps, delta) estimate.
    Hoeffding(HoeffdingArgs),
    /// Start the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RangeArgs {
    #[arg(long, default_value_t = 4)]
    pub size_min: usize,
    #[arg(long, default_value_t = 11)]
    pub size_max: usize,
    #[arg(long, default_value_t = 0)]
    pub landmarks_min: usize,
    #[arg(long, default_value_t = 3)]
    pub landmarks_max: usize,
    /// Sample the agent start uniformly at each episode.
    #[arg(long)]
    pub random_start: bool,
}

impl RangeArgs {
    fn ranges(&self) -> ScenarioRanges {
        ScenarioRanges {
            width: (self.size_min, self.size_max),
            height: (self.size_min, self.size_max),
            square: true,
            landmarks: (self.landmarks_min, self.landmarks_max),
            random_start: self.random_start,
            ..ScenarioRanges::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[command(flatten)]
    pub ranges: RangeArgs,
    /// Output directory; files are named scenario-000.json, ...
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("amount").required(true).args(["episodes", "samples"]))]
pub struct DemoArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of episodes.
    #[arg(long)]
    pub episodes: Option<u64>,
    /// Run episodes until the training set holds this many samples.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Fixed scenario file; otherwise each episode samples one.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[command(flatten)]
    pub ranges: RangeArgs,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.9)]
    pub confidence: f64,
    /// Trajectory log (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training set as CSV.
    #[arg(long)]
    pub training_set: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["log", "training_set"]))]
pub struct CloneArgs {
    /// Trajectory logs to pool.
    #[arg(long, num_args = 1..)]
    pub log: Vec<PathBuf>,
    /// Training-set CSV.
    #[arg(long)]
    pub training_set: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["model", "scenario"]))]
pub struct TargetArgs {
    /// POMDP model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Gridworld scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::GaussSeidel)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
}

impl SolverArgs {
    fn options(&self) -> CheckOptions {
        let method = match self.method {
            MethodArg::GaussSeidel => Method::GaussSeidel,
            MethodArg::Jacobi => Method::Jacobi,
        };
        CheckOptions { tolerance: self.tolerance, max_iterations: self.max_iterations, method }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    GaussSeidel,
    Jacobi,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    ReachAvoidProb,
    ExpectedCost,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("policy").required(true).args(["strategy", "uniform"]))]
pub struct CheckArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Strategy file.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Uniform choice over the enabled actions of every observation.
    #[arg(long)]
    pub uniform: bool,
    #[arg(long, value_enum, default_value_t = KindArg::ReachAvoidProb)]
    pub kind: KindArg,
    /// lambda for reach-avoid-prob, kappa for expected-cost.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Exit with status 3 when the verdict is UNSAT.
    #[arg(long)]
    pub expect_sat: bool,
    /// Result file (timing fields omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Initial strategy file.
    #[arg(long)]
    pub strategy: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub sessions_per_state: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub plateau: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.9)]
    pub confidence: f64,
    /// Receives history.jsonl, strategy-NN.json per iteration and strategy.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("policy").required(true).args(["strategy", "uniform"]))]
pub struct HeatmapArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    #[arg(long)]
    pub uniform: bool,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HoeffdingArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    /// Divide by a sample-efficiency factor (e.g. 4 for feature sharing).
    #[arg(long)]
    pub efficiency: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
}

/// Failure with its exit status and a machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub status: i32,
    pub kind: &'static str,
    pub message: String,
    pub extra: Value,
}

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNSAT: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

impl CliError {
    pub fn invalid(message: impl std::fmt::Display) -> Self {
        CliError { status: EXIT_INVALID, kind: "invalid_input", message: message.to_string(), extra: Value::Null }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { status: 1, kind: "io", message: format!("{}: {e}", path.display()), extra: Value::Null }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "v": 1, "error": self.kind, "message": self.message });
        if let Value::Object(extra) = &self.extra {
            v.as_object_mut().expect("object").extend(extra.clone());
        }
        v
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::NoConvergence { iterations, residual } => CliError {
                status: EXIT_NO_CONVERGENCE,
                kind: "no_convergence",
                message: e.to_string(),
                extra: json!({ "iterations": iterations, "residual": residual }),
            },
            other => CliError::invalid(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn read_scenario(path: &Path) -> CliResult<ScenarioConfig> {
    let config: ScenarioConfig =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    config.validate().map_err(CliError::invalid)?;
    Ok(config)
}

fn read_strategy(path: &Path, actions: &[String]) -> CliResult<ObservationStrategy> {
    let file = StrategyFile::from_text(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    file.strategy_for(actions).map_err(CliError::invalid)
}

fn demonstrator(noise: f64, confidence: f64) -> CliResult<ScriptedDemonstrator> {
    if !(0.0..=1.0).contains(&noise) || !(0.0..=1.0).contains(&confidence) {
        return Err(CliError::invalid("noise and confidence must lie in [0, 1]"));
    }
    Ok(ScriptedDemonstrator { noise, confidence })
}

/// A loaded model with its reach-avoid sets.
struct Target {
    pomdp: Pomdp,
    bad: std::collections::BTreeSet<usize>,
    goal: std::collections::BTreeSet<usize>,
}

fn load_target(args: &TargetArgs) -> CliResult<Target> {
    if let Some(path) = &args.scenario {
        let grid = build_pomdp(&read_scenario(path)?).map_err(CliError::invalid)?;
        return Ok(Target { bad: grid.spec.bad, goal: grid.spec.goal, pomdp: grid.pomdp });
    }
    let path = args.model.as_ref().expect("clap enforces one target");
    let pomdp = match read_model(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))? {
        Model::Pomdp(p) => p,
        Model::Mdp(m) => Pomdp::from_labels(m.clone(), m.state_names()).map_err(CliError::invalid)?,
    };
    let bad = pomdp.mdp().label("bad");
    let goal = pomdp.mdp().label("goal");
    Ok(Target { pomdp, bad, goal })
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Demo(a) => demo(a),
        Command::Clone(a) => clone(a),
        Command::Check(a) => check(a),
        Command::Bound(a) => bound(a),
        Command::Refine(a) => refine(a),
        Command::Heatmap(a) => heatmap_cmd(a),
        Command::Hoeffding(a) => hoeffding(a),
        Command::Serve(a) => serve(a),
    }
}

fn emit(v: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string(v).expect("json"));
}

pub fn gen(a: GenArgs) -> CliResult<()> {
    let ranges = a.ranges.ranges();
    let mut files = Vec::new();
    for i in 0..a.count {
        let mut rng = ChaCha8Rng::seed_from_u64(session_seed(a.seed, i));
        let config = random_scenario(&mut rng, &ranges).map_err(CliError::invalid)?;
        let path = a.out.join(format!("scenario-{i:03}.json"));
        write(&path, &pretty(&json!(config)))?;
        files.push(path.display().to_string());
    }
    emit(&json!({ "seed": a.seed, "count": a.count, "ranges": ranges, "files": files }));
    Ok(())
}

pub fn demo(a: DemoArgs) -> CliResult<()> {
    let who = demonstrator(a.noise, a.confidence)?;
    let fixed = a.scenario.as_deref().map(read_scenario).transpose()?;
    let ranges = a.ranges.ranges();
    let mut ts = TrainingSet::new();
    let mut log: Vec<Trajectory> = Vec::new();
    for i in 0u64.. {
        let done = match (a.episodes, a.samples) {
            (Some(n), _) => i >= n,
            (None, Some(target)) => ts.size() >= target,
            (None, None) => unreachable!("clap requires one"),
        };
        if done {
            break;
        }
        // Each episode draws from its own stream so episodes are independent.
        let mut rng = ChaCha8Rng::seed_from_u64(session_seed(a.seed, i));
        let config = match &fixed {
            Some(c) => c.clone(),
            None => random_scenario(&mut rng, &ranges).map_err(CliError::invalid)?,
        };
        let start = sample_start(&config, &mut rng);
        let mut t = run_episode(&config, start, &who, &mut rng, default_max_steps(&config), format!("demo-{i}"));
        t.seed = Some(session_seed(a.seed, i));
        ts.record(&t).map_err(CliError::invalid)?;
        log.push(t);
    }
    write(&a.out, &hilsynth::training::write_log(&log))?;
    if let Some(path) = &a.training_set {
        write(path, &ts.to_csv())?;
    }
    let goals = log.iter().filter(|t| t.outcome == hilsynth::training::Outcome::Goal).count();
    emit(&json!({
        "seed": a.seed, "episodes": log.len(), "samples": ts.size(), "goals": goals,
        "noise": who.noise, "confidence": who.confidence, "training_set_sha256": ts.sha256(),
    }));
    Ok(())
}

pub fn clone(a: CloneArgs) -> CliResult<()> {
    let ts = match &a.training_set {
        Some(path) => TrainingSet::from_csv(&read(path)?).map_err(CliError::invalid)?,
        None => {
            let mut all = Vec::new();
            for path in &a.log {
                all.extend(read_log(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?);
            }
            training_set_from(&all).map_err(CliError::invalid)?
        }
    };
    let classes = ClassTable::by_features();
    let strategy = scenario_independent_strategy(&ts, &classes);
    let file = StrategyFile::new(&strategy, &Action::names(), Some(Provenance::new(&ts, &classes)));
    write(&a.out, &file.to_text())?;
    emit(&json!({ "samples": ts.size(), "rows": strategy.len(), "sha256": file.sha256() }));
    Ok(())
}

pub fn check(a: CheckArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let target = load_target(&a.target)?;
    let build_ms = t0.elapsed().as_secs_f64() * 1e3;
    let strategy = match &a.strategy {
        Some(path) => read_strategy(path, target.pomdp.mdp().action_names())?,
        None => ObservationStrategy::uniform(&target.pomdp),
    };
    let spec = match a.kind {
        KindArg::ReachAvoidProb => Spec::reach_avoid(target.bad.clone(), target.goal.clone(), a.threshold),
        KindArg::ExpectedCost => Spec::expected_cost(target.bad.clone(), target.goal.clone(), a.threshold),
    }
    .map_err(CliError::invalid)?;
    let opts = a.solver.options();
    let t1 = Instant::now();
    let mc = target.pomdp.induce_mc(&strategy).map_err(CliError::invalid)?;
    let r = check_spec_with(&mc, &spec, &opts)?;
    let check_ms = t1.elapsed().as_secs_f64() * 1e3;
    let mut result = json!({
        "v": 1,
        "prob": r.value_at_initial,
        "cost": r.conditional_expected_cost,
        "verdict": r.verdict,
        "states": mc.num_states(),
        "transitions": mc.num_transitions(),
        "residual": r.residual,
        "iterations": r.iterations,
        "spec": { "kind": spec.kind, "threshold": spec.threshold },
        "solver": opts,
        "strategy_sha256": StrategyFile::new(&strategy, target.pomdp.mdp().action_names(), None).sha256(),
    });
    if let Some(path) = &a.out {
        write(path, &pretty(&result))?;
    }
    result["build_ms"] = json!(build_ms);
    result["check_ms"] = json!(check_ms);
    emit(&result);
    if a.expect_sat && r.verdict == Some(Verdict::Unsat) {
        return Err(CliError {
            status: EXIT_UNSAT,
            kind: "unsat",
            message: format!("verdict UNSAT (value {})", r.value_at_initial),
            extra: Value::Null,
        });
    }
    Ok(())
}

pub fn bound(a: BoundArgs) -> CliResult<()> {
    let target = load_target(&a.target)?;
    let mdp: &Mdp = target.pomdp.mdp();
    let r = mdp_max_reach_with(mdp, &target.bad, &target.goal, &a.solver.options())?;
    let result = json!({
        "v": 1,
        "bound": r.value_at_initial,
        "states": mdp.num_states(),
        "transitions": mdp.num_transitions(),
        "residual": r.residual,
        "iterations": r.iterations,
        "solver": a.solver.options(),
    });
    if let Some(path) = &a.out {
        write(path, &pretty(&result))?;
    }
    emit(&result);
    Ok(())
}

pub fn refine(a: RefineArgs) -> CliResult<()> {
    let config = read_scenario(&a.scenario)?;
    let grid = build_pomdp(&config).map_err(CliError::invalid)?;
    let spec = grid.spec.clone().with_threshold(a.threshold).map_err(CliError::invalid)?;
    let initial = read_strategy(&a.strategy, &Action::names())?;
    let who = demonstrator(a.noise, a.confidence)?;
    let opts = RefineOptions { max_iters: a.max_iters, k: a.k, sessions_per_state: a.sessions_per_state, plateau: a.plateau };
    let mut sessions = ScriptedSessions::new(who, a.seed);
    let history_path = a.out_dir.join("history.jsonl");
    let out = match refine_loop(&grid, &spec, initial, &mut sessions, &opts) {
        Ok(out) => out,
        Err(abort) => {
            write(&history_path, &history_jsonl(&abort.history))?;
            return Err(match abort.error {
                hilsynth::RefineError::Check(e) => e.into(),
                other => CliError::invalid(other),
            });
        }
    };
    write(&history_path, &history_jsonl(&out.history))?;
    let names = Action::names();
    for (h, s) in out.history.iter().zip(&out.snapshots) {
        write(&a.out_dir.join(format!("strategy-{:02}.json", h.iter)), &StrategyFile::new(s, &names, None).to_text())?;
    }
    write(&a.out_dir.join("strategy.json"), &StrategyFile::new(&out.strategy, &names, None).to_text())?;
    let first = out.history.first().map(|h| h.prob);
    let last = out.history.last().map(|h| h.prob);
    emit(&json!({
        "seed": a.seed, "options": opts, "stop": out.stop, "iterations": out.history.len() - 1,
        "initial_prob": first, "final_prob": last,
    }));
    Ok(())
}

pub fn heatmap_cmd(a: HeatmapArgs) -> CliResult<()> {
    let grid = build_pomdp(&read_scenario(&a.scenario)?).map_err(CliError::invalid)?;
    let strategy = match &a.strategy {
        Some(path) => read_strategy(path, &Action::names())?,
        None => ObservationStrategy::uniform(&grid.pomdp),
    };
    let map = heatmap(&grid, &strategy)?;
    match &a.out {
        Some(path) => write(path, &map.to_csv()),
        None => {
            print!("{}", map.to_csv());
            Ok(())
        }
    }
}

pub fn hoeffding(a: HoeffdingArgs) -> CliResult<()> {
    let n = hoeffding_min_samples(a.eps, a.delta).map_err(CliError::invalid)?;
    let n = match a.efficiency {
        Some(f) => with_efficiency(n, f).map_err(CliError::invalid)?,
        None => n,
    };
    println!("{n}");
    Ok(())
}

pub fn serve(a: ServeArgs) -> CliResult<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io(Path::new("runtime"), e))?;
    eprintln!("listening on {}", a.addr);
    rt.block_on(hilsynth_service::serve(a.addr, &a.data)).map_err(|e| CliError::io(&a.data, e))
}

/// Parses, runs, reports errors as JSON on stderr, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.to_json()).expect("json"));
            e.status
        }
    }
}

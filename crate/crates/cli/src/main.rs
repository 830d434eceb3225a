//! `rfopt`: generate training data, fit cost models, search architectures,
//! and assign reuse factors under a latency budget.
//!
//! Every subcommand resolves its configuration, does its work through the
//! library, writes outputs atomically (temp file + rename), and drops a
//! `manifest.json` beside them echoing the resolved configuration. Outputs
//! are byte-reproducible for a fixed config and inputs; wall-clock numbers
//! appear only in the manifest, `comparison.csv`, and `assignment.json`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use rfopt_core::data::{gen_synthetic, ingest_csv_file, write_csv, split_train_test, DataError, SweepSpec, Target};
use rfopt_core::forest::{train, ModelError, ModelSet, TrainingConfig};
use rfopt_core::layer::{LayerError, LayerSpec, NetworkSpec};
use rfopt_core::metrics::{evaluate, MetricsError};
use rfopt_core::nas::{
    export_front, export_front_deployed, run_search, CommandEvaluator, Evaluator, NasError,
    SearchSpace, SurrogateEvaluator,
};
use rfopt_core::solve::{
    build_candidates, compare, solve_exact, solve_sa, solve_stochastic, Assignment, DeployError,
    LatencyBudget, SaParams, SolveError, Weights,
};
use rfopt_core::layer::LayerKind;

#[derive(Parser)]
#[command(name = "rfopt", version, about = "Resource-aware reuse-factor optimization for dataflow accelerators")]
struct Cli {
    /// Directory all outputs (and the manifest) are written into.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Suppress informational output; errors still go to stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic observation corpus over a layer sweep.
    GenData(GenDataArgs),
    /// Train per-(layer kind, target) forest models from an observation CSV.
    Train(TrainArgs),
    /// Assign reuse factors to one network under the latency budget.
    Optimize(OptimizeArgs),
    /// Random architecture search maintaining a Pareto front.
    Search(SearchArgs),
    /// Time the exact solver against the stochastic and annealing baselines.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Sweep description JSON; omit for the built-in grid.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Peak multiplicative noise on every target, in percent.
    #[arg(long, default_value_t = 5.0)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV name, relative to --out-dir unless absolute.
    #[arg(long, default_value = "observations.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Observation CSV to train from.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long)]
    max_depth: Option<u32>,
    /// Features considered per split; defaults to ceil(sqrt(n_features)).
    /// Raising it to the full feature count trades split diversity for
    /// accuracy, which pays off on small corpora.
    #[arg(long, default_value_t = 3)]
    feature_subsample: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fraction of each layer kind used for training; the rest is held out
    /// for the metrics report.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Where model files go, relative to --out-dir unless absolute.
    #[arg(long, default_value = "models")]
    model_dir: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Network spec JSON.
    #[arg(long)]
    network: PathBuf,
    /// Directory of trained model files.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    budget_cycles: u64,
    #[arg(long, default_value_t = 250.0)]
    clock_mhz: f64,
    #[arg(long, value_enum, default_value_t = SolverChoice::Exact)]
    solver: SolverChoice,
    /// Trial count for the stochastic and annealing solvers.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Objective weights over LUT,FF,BRAM,DSP.
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    weights: Weights,
    #[arg(long, default_value = "assignment.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// Search-space JSON; omit for the full default envelope.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// `surrogate` or `cmd:<shell command>` (spec on stdin, score on stdout).
    #[arg(long, default_value = "surrogate")]
    evaluator: String,
    /// Noise amplitude of the surrogate evaluator.
    #[arg(long, default_value_t = 0.1)]
    surrogate_noise: f64,
    /// Model directory; when given, every front member is also solved under
    /// the budget and written to front_deployed.csv.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    budget_cycles: u64,
    #[arg(long, default_value_t = 250.0)]
    clock_mhz: f64,
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    weights: Weights,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    budget_cycles: u64,
    #[arg(long, default_value_t = 250.0)]
    clock_mhz: f64,
    /// Trial counts for the baseline solvers, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1_000u64, 10_000, 100_000, 1_000_000])]
    trials: Vec<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    weights: Weights,
    #[arg(long, default_value = "comparison.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Exact,
    Sa,
    Stochastic,
}

impl SolverChoice {
    fn name(self) -> &'static str {
        match self {
            SolverChoice::Exact => "exact",
            SolverChoice::Sa => "sa",
            SolverChoice::Stochastic => "stochastic",
        }
    }
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    s.parse()
}

/// Failure modes mapped to exit codes: 2 for inputs that do not parse or
/// validate, 3 for latency infeasibility, 4 for missing models, 1 otherwise.
#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    MissingModel(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::MissingModel(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => CliError::Other(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<LayerError> for CliError {
    fn from(e: LayerError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Missing { .. } => CliError::MissingModel(e.to_string()),
            ModelError::Io(_) => CliError::Other(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Infeasible(e.to_string())
    }
}

impl From<DeployError> for CliError {
    fn from(e: DeployError) -> Self {
        match e {
            DeployError::Layer(e) => e.into(),
            DeployError::Model(e) => e.into(),
            DeployError::Solve(e) => e.into(),
            DeployError::InvalidTable(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<NasError> for CliError {
    fn from(e: NasError) -> Self {
        match e {
            NasError::InvalidSpace(_) => CliError::Parse(e.to_string()),
            NasError::EmptyArchive => CliError::Other(e.to_string()),
            NasError::Deploy(d) => d.into(),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let ctx = Ctx { out_dir: cli.out_dir, quiet: cli.quiet };
    match cli.cmd {
        Cmd::GenData(args) => cmd_gen_data(&ctx, args),
        Cmd::Train(args) => cmd_train(&ctx, args),
        Cmd::Optimize(args) => cmd_optimize(&ctx, args),
        Cmd::Search(args) => cmd_search(&ctx, args),
        Cmd::Compare(args) => cmd_compare(&ctx, args),
    }
}

struct Ctx {
    out_dir: PathBuf,
    quiet: bool,
}

impl Ctx {
    /// Resolves a user path against the output directory.
    fn out_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn manifest(&self, command: &str, config: serde_json::Value) -> Result<(), CliError> {
        let unix_time_s = SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time_s": unix_time_s,
            "config": config,
        });
        write_atomic(&self.out_dir.join("manifest.json"), pretty(&doc).as_bytes())
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// All output files land via temp + rename so readers never see a partial
/// write and failures never clobber a previous good file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Parse(format!("reading {what} {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("parsing {what} {}: {e}", path.display())))
}

/// Rounds to 4 significant digits; reporting CSVs use this so diffs stay
/// stable across platforms.
fn sig4(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let mag = v.abs().log10().floor() as i32;
    // scale by a positive power of ten on both paths; negative powers are
    // inexact in binary and leak digits (123456789 -> 123499999.99999999)
    if mag > 3 {
        let p = 10f64.powi(mag - 3);
        (v / p).round() * p
    } else {
        let p = 10f64.powi(3 - mag);
        (v * p).round() / p
    }
}

fn fmt4(v: f64) -> String {
    format!("{}", sig4(v))
}

fn fmt4_opt(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_default()
}

/// Compact one-line description of a layer stack for CSV cells.
fn layer_brief(layers: &[LayerSpec]) -> String {
    layers
        .iter()
        .map(|l| match l {
            LayerSpec::Conv1d { size, kernel, pool } => format!("conv1d(f{size},k{kernel},p{pool})"),
            LayerSpec::Lstm { size } => format!("lstm(u{size})"),
            LayerSpec::Dense { size } => format!("dense(n{size})"),
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn cmd_gen_data(ctx: &Ctx, args: GenDataArgs) -> Result<(), CliError> {
    if !(args.noise.is_finite() && (0.0..100.0).contains(&args.noise)) {
        return Err(CliError::Parse(format!("--noise {} must be in [0, 100)", args.noise)));
    }
    let sweep: SweepSpec = match &args.sweep {
        Some(path) => read_json(path, "sweep spec")?,
        None => SweepSpec::default(),
    };
    let set = gen_synthetic(&sweep, args.noise, args.seed);
    if set.is_empty() {
        return Err(CliError::Parse("the sweep produced no observations".into()));
    }
    let mut bytes = Vec::new();
    write_csv(&set, &mut bytes)?;
    let out = ctx.out_path(&args.out);
    write_atomic(&out, &bytes)?;
    ctx.manifest(
        "gen-data",
        json!({
            "sweep": args.sweep.as_ref().map(|p| p.display().to_string()),
            "sweep_resolved": serde_json::to_value(&sweep).expect("sweep serializes"),
            "noise_pct": args.noise,
            "seed": args.seed,
            "out": out.display().to_string(),
        }),
    )?;
    let counts: Vec<String> = LayerKind::ALL
        .iter()
        .map(|&k| format!("{} {}", set.kind_count(k), k))
        .collect();
    ctx.say(format!("wrote {}: {} observations ({})", out.display(), set.len(), counts.join(", ")));
    Ok(())
}

fn cmd_train(ctx: &Ctx, args: TrainArgs) -> Result<(), CliError> {
    let outcome = ingest_csv_file(&args.data)?;
    let set = outcome.set;
    let (train_set, holdout) = split_train_test(&set, args.split, args.seed)?;

    if args.feature_subsample == 0 {
        return Err(CliError::Parse("--feature-subsample must be at least 1".into()));
    }
    let cfg = TrainingConfig {
        n_trees: args.trees,
        max_depth: args.max_depth,
        feature_subsample: args.feature_subsample,
        seed: args.seed,
        ..TrainingConfig::default()
    };

    let model_dir = ctx.out_path(&args.model_dir);
    let mut models = ModelSet::new(model_dir.display().to_string());
    let mut metric_rows: Vec<Vec<String>> = Vec::new();
    for kind in LayerKind::ALL {
        if train_set.kind_count(kind) == 0 {
            continue;
        }
        for target in Target::ALL {
            let model = train(&train_set, kind, target, &cfg)?;
            let m = evaluate(&model, &holdout)?;
            metric_rows.push(vec![
                kind.to_string(),
                target.to_string(),
                fmt4(m.r2),
                fmt4(m.mape_pct),
                fmt4(m.rmse_pct),
                fmt4(m.value_range.0),
                fmt4(m.value_range.1),
                m.n_points.to_string(),
                m.n_mape_excluded.to_string(),
            ]);
            ctx.say(format!(
                "{kind} {target}: r2={} mape={}% rmse={}% over {} held-out points",
                fmt4(m.r2),
                fmt4(m.mape_pct),
                fmt4(m.rmse_pct),
                m.n_points
            ));
            models.insert(model);
        }
    }
    if models.is_empty() {
        return Err(CliError::Parse(format!("{} holds no trainable observations", args.data.display())));
    }

    let written = models.save_dir(&model_dir)?;
    let mut csv_bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_bytes);
        w.write_record([
            "kind", "target", "r2", "mape_pct", "rmse_pct", "range_min", "range_max", "n_points",
            "mape_excluded",
        ])
        .and_then(|_| {
            metric_rows.iter().try_for_each(|row| w.write_record(row))
        })
        .map_err(|e| CliError::Other(e.to_string()))?;
        w.flush()?;
    }
    let metrics_path = ctx.out_dir.join("metrics.csv");
    write_atomic(&metrics_path, &csv_bytes)?;

    ctx.manifest(
        "train",
        json!({
            "data": args.data.display().to_string(),
            "rows_read": outcome.rows_read,
            "observations": set.len(),
            "trees": args.trees,
            "max_depth": args.max_depth,
            "feature_subsample": args.feature_subsample,
            "seed": args.seed,
            "split": args.split,
            "model_dir": model_dir.display().to_string(),
        }),
    )?;
    ctx.say(format!(
        "saved {} models to {} and metrics to {}",
        written.len(),
        model_dir.display(),
        metrics_path.display()
    ));
    Ok(())
}

/// `assignment.json` payload: the assignment plus how it was produced.
#[derive(serde::Serialize)]
struct AssignmentReport {
    solver: &'static str,
    trials: Option<u64>,
    seed: Option<u64>,
    budget: LatencyBudget,
    weights: Weights,
    latency_us: f64,
    #[serde(flatten)]
    assignment: Assignment,
}

fn cmd_optimize(ctx: &Ctx, args: OptimizeArgs) -> Result<(), CliError> {
    let net: NetworkSpec = read_json(&args.network, "network spec")?;
    net.validate()?;
    let models = ModelSet::load_dir(&args.models)?;
    let budget = LatencyBudget { cycles: args.budget_cycles, clock_mhz: args.clock_mhz };

    let table = build_candidates(&net, &models)?;
    let start = Instant::now();
    let assignment = match args.solver {
        SolverChoice::Exact => solve_exact(&table, &budget, args.weights)?,
        SolverChoice::Sa => solve_sa(&table, &budget, args.weights, args.trials, args.seed, SaParams::default())?,
        SolverChoice::Stochastic => solve_stochastic(&table, &budget, args.weights, args.trials, args.seed)?,
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let uses_trials = args.solver != SolverChoice::Exact;
    let report = AssignmentReport {
        solver: args.solver.name(),
        trials: uses_trials.then_some(args.trials),
        seed: uses_trials.then_some(args.seed),
        budget,
        weights: args.weights,
        latency_us: budget.micros(assignment.latency_cycles),
        assignment,
    };
    let out = ctx.out_path(&args.out);
    let doc = serde_json::to_value(&report).expect("report serializes");
    write_atomic(&out, pretty(&doc).as_bytes())?;

    ctx.manifest(
        "optimize",
        json!({
            "network": args.network.display().to_string(),
            "models": args.models.display().to_string(),
            "budget_cycles": args.budget_cycles,
            "clock_mhz": args.clock_mhz,
            "solver": args.solver.name(),
            "trials": uses_trials.then_some(args.trials),
            "seed": uses_trials.then_some(args.seed),
            "weights": args.weights.0,
            "out": out.display().to_string(),
            "wall_time_s": wall_time_s,
        }),
    )?;
    ctx.say(format!(
        "{}: cost {} at {} cycles ({} us) in {:.3} s -> {}",
        args.solver.name(),
        fmt4(report.assignment.scalar_cost),
        report.assignment.latency_cycles,
        fmt4(report.latency_us),
        wall_time_s,
        out.display()
    ));
    Ok(())
}

fn make_evaluator(spec: &str, surrogate_noise: f64) -> Result<Box<dyn Evaluator>, CliError> {
    if spec == "surrogate" {
        if !(surrogate_noise.is_finite() && (0.0..1.0).contains(&surrogate_noise)) {
            return Err(CliError::Parse(format!(
                "--surrogate-noise {surrogate_noise} must be in [0, 1)"
            )));
        }
        return Ok(Box::new(SurrogateEvaluator { noise: surrogate_noise }));
    }
    if let Some(command) = spec.strip_prefix("cmd:") {
        if command.trim().is_empty() {
            return Err(CliError::Parse("cmd: evaluator needs a command".into()));
        }
        return Ok(Box::new(CommandEvaluator { command: command.to_string() }));
    }
    Err(CliError::Parse(format!(
        "unknown evaluator {spec:?}; use \"surrogate\" or \"cmd:<shell command>\""
    )))
}

fn cmd_search(ctx: &Ctx, args: SearchArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Parse("--trials must be at least 1".into()));
    }
    let space: SearchSpace = match &args.space {
        Some(path) => read_json(path, "search space")?,
        None => SearchSpace::default(),
    };
    let evaluator = make_evaluator(&args.evaluator, args.surrogate_noise)?;
    let outcome = run_search(&space, evaluator.as_ref(), args.trials, args.seed)?;

    let mut jsonl = String::new();
    for trial in &outcome.trials {
        jsonl.push_str(&serde_json::to_string(trial).expect("trials serialize"));
        jsonl.push('\n');
    }
    let trials_path = ctx.out_dir.join("trials.jsonl");
    write_atomic(&trials_path, jsonl.as_bytes())?;

    let front = export_front(&outcome.archive)?;
    let mut front_bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut front_bytes);
        w.write_record(["trial_id", "obj1", "workload", "input_length", "input_channels", "layers"])
            .map_err(|e| CliError::Other(e.to_string()))?;
        for row in &front {
            w.write_record([
                row.trial_id.to_string(),
                fmt4(row.obj1),
                row.workload.to_string(),
                row.net.input_length.to_string(),
                row.net.input_channels.to_string(),
                layer_brief(&row.net.layers),
            ])
            .map_err(|e| CliError::Other(e.to_string()))?;
        }
        w.flush()?;
    }
    let front_path = ctx.out_dir.join("front.csv");
    write_atomic(&front_path, &front_bytes)?;

    let mut deployed_path: Option<PathBuf> = None;
    if let Some(model_dir) = &args.models {
        let models = ModelSet::load_dir(model_dir)?;
        let budget = LatencyBudget { cycles: args.budget_cycles, clock_mhz: args.clock_mhz };
        let rows = export_front_deployed(&outcome.archive, &models, &budget, args.weights)?;
        let mut bytes = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut bytes);
            w.write_record([
                "trial_id", "obj1", "workload", "luts", "dsps", "latency_us", "reuse_factors",
                "input_length", "input_channels", "layers",
            ])
            .map_err(|e| CliError::Other(e.to_string()))?;
            for row in &rows {
                let rf = row
                    .reuse_factors
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("/");
                w.write_record([
                    row.trial_id.to_string(),
                    fmt4(row.obj1),
                    row.workload.to_string(),
                    fmt4(row.luts),
                    fmt4(row.dsps),
                    fmt4(row.latency_us),
                    rf,
                    row.net.input_length.to_string(),
                    row.net.input_channels.to_string(),
                    layer_brief(&row.net.layers),
                ])
                .map_err(|e| CliError::Other(e.to_string()))?;
            }
            w.flush()?;
        }
        let path = ctx.out_dir.join("front_deployed.csv");
        write_atomic(&path, &bytes)?;
        deployed_path = Some(path);
    }

    ctx.manifest(
        "search",
        json!({
            "space": args.space.as_ref().map(|p| p.display().to_string()),
            "space_resolved": serde_json::to_value(&space).expect("space serializes"),
            "trials": args.trials,
            "seed": args.seed,
            "evaluator": args.evaluator,
            "surrogate_noise": args.surrogate_noise,
            "models": args.models.as_ref().map(|p| p.display().to_string()),
            "budget_cycles": args.budget_cycles,
            "clock_mhz": args.clock_mhz,
            "weights": args.weights.0,
        }),
    )?;
    let failed = outcome
        .trials
        .iter()
        .filter(|t| matches!(t.status, rfopt_core::nas::TrialStatus::Failed { .. }))
        .count();
    ctx.say(format!(
        "{} trials ({} failed), front of {} -> {}{}",
        outcome.trials.len(),
        failed,
        front.len(),
        front_path.display(),
        deployed_path
            .map(|p| format!(", deployed -> {}", p.display()))
            .unwrap_or_default()
    ));
    Ok(())
}

fn cmd_compare(ctx: &Ctx, args: CompareArgs) -> Result<(), CliError> {
    if args.trials.is_empty() || args.trials.contains(&0) {
        return Err(CliError::Parse("--trials needs positive trial counts".into()));
    }
    let net: NetworkSpec = read_json(&args.network, "network spec")?;
    net.validate()?;
    let models = ModelSet::load_dir(&args.models)?;
    let budget = LatencyBudget { cycles: args.budget_cycles, clock_mhz: args.clock_mhz };
    let table = build_candidates(&net, &models)?;
    let rows = compare(&table, &budget, args.weights, &args.trials, args.seed)?;

    let mut bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(["method", "trials", "luts", "dsps", "latency_us", "search_time_s", "scalar_cost"])
            .map_err(|e| CliError::Other(e.to_string()))?;
        for row in &rows {
            w.write_record([
                row.method.to_string(),
                row.trials.map(|t| t.to_string()).unwrap_or_default(),
                fmt4_opt(row.luts),
                fmt4_opt(row.dsps),
                fmt4_opt(row.latency_us),
                format!("{:.6}", row.search_time_s),
                fmt4_opt(row.scalar_cost),
            ])
            .map_err(|e| CliError::Other(e.to_string()))?;
        }
        w.flush()?;
    }
    let out = ctx.out_path(&args.out);
    write_atomic(&out, &bytes)?;

    ctx.manifest(
        "compare",
        json!({
            "network": args.network.display().to_string(),
            "models": args.models.display().to_string(),
            "budget_cycles": args.budget_cycles,
            "clock_mhz": args.clock_mhz,
            "trials": args.trials,
            "seed": args.seed,
            "weights": args.weights.0,
            "out": out.display().to_string(),
        }),
    )?;
    for row in &rows {
        ctx.say(format!(
            "{:<10} trials={:<8} cost={:<10} time={:.4}s",
            row.method.to_string(),
            row.trials.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            fmt4_opt(row.scalar_cost),
            row.search_time_s
        ));
    }
    ctx.say(format!("wrote {}", out.display()));
    Ok(())
}

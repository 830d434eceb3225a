//! Random search over network shapes with a Pareto archive.
//!
//! Each trial samples a network from a [`SearchSpace`], computes its
//! workload (multiply count) from the layer algebra, and asks an
//! [`Evaluator`] for a quality score. Both objectives are minimized; the
//! archive keeps every trial not dominated by another, so the survivors
//! trace the quality/workload trade-off. Evaluation is pluggable: the
//! surrogate makes searches self-contained and reproducible, while
//! [`CommandEvaluator`] hands each sampled network to an external script
//! for real training.

use std::io::Write as _;
use std::process::{Command, Stdio};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ModelSet;
use crate::layer::{LayerSpec, NetworkSpec};
use crate::solve::{build_candidates, solve_exact, DeployError, LatencyBudget, Weights};
use crate::util::{derive_seed, fnv1a64};

/// Hyperparameter ranges the sampler draws from. Count and size ranges are
/// inclusive; `input_lengths`, `kernels`, and `pools` are choice lists.
///
/// The default space admits up to five convolution blocks of at most 256
/// filters, up to three LSTM layers of at most 425 units, and one to five
/// dense layers of at most 512 neurons, over 128 to 512 inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub input_lengths: Vec<u64>,
    pub input_channels: u64,
    pub conv_blocks: (u64, u64),
    pub conv_filters: (u64, u64),
    pub kernels: Vec<u64>,
    pub pools: Vec<u64>,
    pub lstm_layers: (u64, u64),
    pub lstm_units: (u64, u64),
    pub dense_layers: (u64, u64),
    pub dense_neurons: (u64, u64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            input_lengths: vec![128, 256, 512],
            input_channels: 1,
            conv_blocks: (0, 5),
            conv_filters: (1, 256),
            kernels: vec![3],
            pools: vec![2],
            lstm_layers: (0, 3),
            lstm_units: (1, 425),
            dense_layers: (1, 5),
            dense_neurons: (1, 512),
        }
    }
}

impl SearchSpace {
    /// Checks that every possible draw yields a valid network. Besides range
    /// sanity this probes the two monotone worst cases: maximal sizes for
    /// arithmetic overflow and maximal pooling for sequence collapse.
    pub fn validate(&self) -> Result<(), NasError> {
        let bad = |msg: String| Err(NasError::InvalidSpace(msg));
        if self.input_lengths.is_empty() || self.kernels.is_empty() || self.pools.is_empty() {
            return bad("input_lengths, kernels, and pools each need at least one choice".into());
        }
        if self.input_lengths.iter().any(|&v| v == 0)
            || self.kernels.iter().any(|&v| v == 0)
            || self.pools.iter().any(|&v| v == 0)
        {
            return bad("choices must be positive".into());
        }
        if self.input_channels == 0 {
            return bad("input_channels must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("conv_blocks", self.conv_blocks),
            ("conv_filters", self.conv_filters),
            ("lstm_layers", self.lstm_layers),
            ("lstm_units", self.lstm_units),
            ("dense_layers", self.dense_layers),
            ("dense_neurons", self.dense_neurons),
        ] {
            if lo > hi {
                return bad(format!("{name} range ({lo}, {hi}) is inverted"));
            }
        }
        for (name, lo) in [
            ("conv_filters", self.conv_filters.0),
            ("lstm_units", self.lstm_units.0),
            ("dense_layers", self.dense_layers.0),
            ("dense_neurons", self.dense_neurons.0),
        ] {
            if lo == 0 {
                return bad(format!("{name} must start at 1"));
            }
        }

        // Worst case for sequence collapse: shortest input through the most
        // blocks with the heaviest pooling.
        let min_len = *self.input_lengths.iter().min().expect("non-empty");
        let max_pool = *self.pools.iter().max().expect("non-empty");
        let mut len = min_len;
        for _ in 0..self.conv_blocks.1 {
            len /= max_pool;
            if len == 0 {
                return bad(format!(
                    "input length {min_len} collapses under {} blocks of pool {max_pool}",
                    self.conv_blocks.1
                ));
            }
        }

        // Worst case for overflow: everything at its maximum with the
        // gentlest pooling.
        let min_pool = *self.pools.iter().min().expect("non-empty");
        let max_len = *self.input_lengths.iter().max().expect("non-empty");
        let max_kernel = *self.kernels.iter().max().expect("non-empty");
        let mut layers = Vec::new();
        for _ in 0..self.conv_blocks.1 {
            layers.push(LayerSpec::conv1d(self.conv_filters.1, max_kernel, min_pool));
        }
        for _ in 0..self.lstm_layers.1 {
            layers.push(LayerSpec::lstm(self.lstm_units.1));
        }
        for _ in 0..self.dense_layers.1 {
            layers.push(LayerSpec::dense(self.dense_neurons.1));
        }
        let extreme = NetworkSpec::new(max_len, self.input_channels, layers);
        extreme
            .validate()
            .and_then(|_| extreme.infer_geometry().map(|_| ()))
            .map_err(|e| NasError::InvalidSpace(format!("maximal draw is invalid: {e}")))
    }

    /// Draws the network for one trial. Reproducible: the draw depends only
    /// on `(seed, trial_index)`. Call [`SearchSpace::validate`] first; every
    /// draw from a validated space is a valid network.
    pub fn sample(&self, seed: u64, trial_index: u64) -> NetworkSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial_index));
        let choose = |rng: &mut ChaCha8Rng, list: &[u64]| list[rng.random_range(0..list.len())];

        let input_length = choose(&mut rng, &self.input_lengths);
        let mut layers = Vec::new();
        let n_conv = rng.random_range(self.conv_blocks.0..=self.conv_blocks.1);
        for _ in 0..n_conv {
            let filters = rng.random_range(self.conv_filters.0..=self.conv_filters.1);
            let kernel = choose(&mut rng, &self.kernels);
            let pool = choose(&mut rng, &self.pools);
            layers.push(LayerSpec::conv1d(filters, kernel, pool));
        }
        let n_lstm = rng.random_range(self.lstm_layers.0..=self.lstm_layers.1);
        for _ in 0..n_lstm {
            layers.push(LayerSpec::lstm(rng.random_range(self.lstm_units.0..=self.lstm_units.1)));
        }
        let n_dense = rng.random_range(self.dense_layers.0..=self.dense_layers.1);
        for _ in 0..n_dense {
            layers.push(LayerSpec::dense(rng.random_range(self.dense_neurons.0..=self.dense_neurons.1)));
        }
        let net = NetworkSpec::new(input_length, self.input_channels, layers);
        debug_assert!(net.infer_geometry().is_ok(), "validated spaces only yield valid networks");
        net
    }
}

/// Outcome of evaluating one sampled network. `workload` always comes from
/// the layer algebra, never from the evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum TrialStatus {
    Evaluated { obj1: f64, workload: u64 },
    Failed { error: String },
}

/// One search trial: the sampled network plus its evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub net: NetworkSpec,
    #[serde(flatten)]
    pub status: TrialStatus,
}

impl Trial {
    fn objectives(&self) -> Option<(f64, u64)> {
        match self.status {
            TrialStatus::Evaluated { obj1, workload } => Some((obj1, workload)),
            TrialStatus::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

/// Scores a network; lower is better. Implementations must be pure in
/// `(net, seed)` so searches are reproducible.
pub trait Evaluator {
    fn evaluate(&self, net: &NetworkSpec, seed: u64) -> Result<f64, EvalError>;
}

/// Surrogate score that falls off hyperbolically with workload:
/// `0.05 + 2000 / (workload + 1000)`, scaled by `1 + noise * u` where `u` is
/// a seeded uniform draw in [-1, 1) derived from the network document.
/// Bigger networks score better, so the archive traces a genuine
/// quality/cost trade-off without training anything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEvaluator {
    pub noise: f64,
}

impl Default for SurrogateEvaluator {
    fn default() -> Self {
        SurrogateEvaluator { noise: 0.1 }
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, net: &NetworkSpec, seed: u64) -> Result<f64, EvalError> {
        let workload = net.workload().map_err(|e| EvalError(e.to_string()))? as f64;
        let doc = serde_json::to_vec(net).map_err(|e| EvalError(e.to_string()))?;
        let bits = derive_seed(seed, fnv1a64(&doc));
        let unit = bits as f64 / (u64::MAX as f64 + 1.0);
        let jitter = 1.0 + self.noise * (2.0 * unit - 1.0);
        Ok(0.05 + 2000.0 / (workload + 1000.0) * jitter)
    }
}

/// Runs a user command via `sh -c`, writing the network spec as JSON to its
/// stdin and parsing a single real number from its stdout. The trial seed is
/// exported as `RFOPT_SEED` so scripts can make their own runs reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandEvaluator {
    pub command: String,
}

impl Evaluator for CommandEvaluator {
    fn evaluate(&self, net: &NetworkSpec, seed: u64) -> Result<f64, EvalError> {
        let payload = serde_json::to_vec(net).map_err(|e| EvalError(e.to_string()))?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .env("RFOPT_SEED", seed.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| EvalError(format!("spawning {:?}: {e}", self.command)))?;
        child
            .stdin
            .take()
            .expect("stdin was piped")
            .write_all(&payload)
            .map_err(|e| EvalError(format!("writing spec to command: {e}")))?;
        let out = child
            .wait_with_output()
            .map_err(|e| EvalError(format!("waiting for command: {e}")))?;
        if !out.status.success() {
            return Err(EvalError(format!(
                "command failed ({}): {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let value: f64 = text
            .trim()
            .parse()
            .map_err(|e| EvalError(format!("command printed {:?}, expected one number: {e}", text.trim())))?;
        if !value.is_finite() {
            return Err(EvalError(format!("command printed a non-finite score {value}")));
        }
        Ok(value)
    }
}

fn dominates(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// The non-dominated set of evaluated trials, both objectives minimized.
/// Trials with identical objectives are represented by the lowest trial id,
/// so the archive is independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<Trial>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an evaluated trial unless a member dominates it; evicts members
    /// it dominates. Returns whether the trial was archived.
    pub fn insert(&mut self, trial: Trial) -> bool {
        let point = trial
            .objectives()
            .expect("only evaluated trials can enter the archive");
        for m in &mut self.members {
            let mp = m.objectives().expect("archive holds evaluated trials");
            if mp == point {
                if trial.id < m.id {
                    *m = trial;
                    return true;
                }
                return false;
            }
            if dominates(mp, point) {
                return false;
            }
        }
        self.members.retain(|m| {
            !dominates(point, m.objectives().expect("archive holds evaluated trials"))
        });
        self.members.push(trial);
        true
    }

    pub fn members(&self) -> &[Trial] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Full record of a search: the archive plus every trial in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub archive: ParetoArchive,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Error)]
pub enum NasError {
    #[error("search space: {0}")]
    InvalidSpace(String),
    #[error("the archive is empty, nothing to export")]
    EmptyArchive,
    #[error(transparent)]
    Deploy(#[from] DeployError),
}

/// Samples and evaluates `n_trials` networks, archiving the non-dominated
/// ones. Evaluator failures mark their trial failed and the search moves on.
/// The whole trial log is a pure function of `(space, evaluator, n_trials,
/// seed)`.
pub fn run_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    n_trials: u64,
    seed: u64,
) -> Result<SearchOutcome, NasError> {
    assert!(n_trials >= 1, "a search needs at least one trial");
    space.validate()?;
    let mut archive = ParetoArchive::new();
    let mut trials = Vec::with_capacity(n_trials as usize);
    for id in 0..n_trials {
        let net = space.sample(seed, id);
        let workload = net
            .workload()
            .expect("validated spaces only yield valid networks");
        let status = match evaluator.evaluate(&net, seed) {
            Ok(obj1) if obj1.is_finite() => TrialStatus::Evaluated { obj1, workload },
            Ok(obj1) => TrialStatus::Failed { error: format!("evaluator returned non-finite score {obj1}") },
            Err(e) => TrialStatus::Failed { error: e.to_string() },
        };
        let trial = Trial { id, net, status };
        if trial.objectives().is_some() {
            archive.insert(trial.clone());
        }
        trials.push(trial);
    }
    Ok(SearchOutcome { archive, trials })
}

/// One exported front member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub trial_id: u64,
    pub obj1: f64,
    pub workload: u64,
    pub net: NetworkSpec,
}

/// A front member after reuse-factor assignment under the latency budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployedFrontRow {
    pub trial_id: u64,
    pub obj1: f64,
    pub workload: u64,
    pub luts: f64,
    pub dsps: f64,
    pub latency_us: f64,
    pub reuse_factors: Vec<u64>,
    pub net: NetworkSpec,
}

/// Archive members sorted by workload ascending (ties by score, then id).
pub fn export_front(archive: &ParetoArchive) -> Result<Vec<FrontRow>, NasError> {
    if archive.is_empty() {
        return Err(NasError::EmptyArchive);
    }
    let mut rows: Vec<FrontRow> = archive
        .members()
        .iter()
        .map(|t| {
            let (obj1, workload) = t.objectives().expect("archive holds evaluated trials");
            FrontRow { trial_id: t.id, obj1, workload, net: t.net.clone() }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.workload
            .cmp(&b.workload)
            .then(a.obj1.total_cmp(&b.obj1))
            .then(a.trial_id.cmp(&b.trial_id))
    });
    Ok(rows)
}

/// Exports the front and solves the reuse-factor assignment for every
/// member, appending predicted resources and latency. Fails if any member
/// cannot meet the budget.
pub fn export_front_deployed(
    archive: &ParetoArchive,
    models: &ModelSet,
    budget: &LatencyBudget,
    weights: Weights,
) -> Result<Vec<DeployedFrontRow>, NasError> {
    let mut rows = Vec::with_capacity(archive.len());
    for row in export_front(archive)? {
        let table = build_candidates(&row.net, models)?;
        let assignment = solve_exact(&table, budget, weights).map_err(DeployError::from)?;
        rows.push(DeployedFrontRow {
            trial_id: row.trial_id,
            obj1: row.obj1,
            workload: row.workload,
            luts: assignment.total.lut,
            dsps: assignment.total.dsp,
            latency_us: budget.micros(assignment.latency_cycles),
            reuse_factors: assignment.reuse_factors,
            net: row.net,
        });
    }
    Ok(rows)
}

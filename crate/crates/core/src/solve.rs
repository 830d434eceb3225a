//! Reuse-factor assignment under a hard latency budget.
//!
//! Every layer offers one candidate per legal reuse factor, carrying the
//! model-predicted resource cost and an integer latency (predictions are
//! ceiling-rounded once, so feasibility checks are pure integer arithmetic).
//! A solver picks exactly one candidate per layer to minimize the weighted
//! resource sum subject to total latency fitting the budget: a
//! multiple-choice knapsack.
//!
//! [`solve_exact`] is a dynamic program over integer latency. States that
//! spend more latency without saving cost are dominated and dropped, so each
//! suffix of layers keeps only its Pareto frontier of (latency, cost) sums;
//! with a budget configured beyond 10^6 cycles it switches to depth-first
//! branch and bound with suffix bounds. Both paths are exact and return the
//! lexicographically smallest reuse vector among equal-cost optima.
//! [`solve_stochastic`] and [`solve_sa`] are the randomized baselines the
//! exact solver is measured against.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Target;
use crate::forest::{ModelError, ModelSet};
use crate::layer::{LayerError, NetworkSpec};
use crate::util::derive_seed;

/// Predicted cost of one layer at one reuse factor. Resource fields are model
/// outputs; `latency_cycles` mirrors the candidate's integer latency.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostVector {
    pub lut: f64,
    pub ff: f64,
    pub bram: f64,
    pub dsp: f64,
    pub latency_cycles: f64,
}

impl CostVector {
    pub fn scalar(&self, weights: Weights) -> f64 {
        weights.0[0] * self.lut + weights.0[1] * self.ff + weights.0[2] * self.bram + weights.0[3] * self.dsp
    }

    fn add_assign(&mut self, other: &CostVector) {
        self.lut += other.lut;
        self.ff += other.ff;
        self.bram += other.bram;
        self.dsp += other.dsp;
        self.latency_cycles += other.latency_cycles;
    }

    fn is_finite(&self) -> bool {
        self.lut.is_finite()
            && self.ff.is_finite()
            && self.bram.is_finite()
            && self.dsp.is_finite()
            && self.latency_cycles.is_finite()
    }
}

/// Objective weights over (LUT, FF, BRAM, DSP). Defaults to all ones: plain
/// resource sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights(pub [f64; 4]);

impl Default for Weights {
    fn default() -> Self {
        Weights([1.0; 4])
    }
}

impl std::str::FromStr for Weights {
    type Err = String;

    /// Parses `"1,1,1,1"`-style comma lists.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("expected 4 comma-separated weights, got {}", parts.len()));
        }
        let mut w = [0.0; 4];
        for (slot, part) in w.iter_mut().zip(parts) {
            let v: f64 = part.trim().parse().map_err(|e| format!("weight {part:?}: {e}"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("weight {v} must be finite and non-negative"));
            }
            *slot = v;
        }
        Ok(Weights(w))
    }
}

/// One (reuse factor, predicted cost) choice for a layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub reuse_factor: u64,
    pub cost: CostVector,
    pub latency_cycles: u64,
}

impl Candidate {
    /// Builds a candidate, mirroring the integer latency into the cost
    /// vector so the two can never drift apart.
    pub fn new(reuse_factor: u64, mut cost: CostVector, latency_cycles: u64) -> Self {
        cost.latency_cycles = latency_cycles as f64;
        Candidate { reuse_factor, cost, latency_cycles }
    }
}

/// Per-layer candidate lists, each ascending in reuse factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    layers: Vec<Vec<Candidate>>,
}

impl CandidateTable {
    pub fn from_layers(layers: Vec<Vec<Candidate>>) -> Result<Self, DeployError> {
        if layers.is_empty() {
            return Err(DeployError::InvalidTable("table has no layers".into()));
        }
        for (i, cands) in layers.iter().enumerate() {
            if cands.is_empty() {
                return Err(DeployError::InvalidTable(format!("layer {i} has no candidates")));
            }
            for pair in cands.windows(2) {
                if pair[1].reuse_factor <= pair[0].reuse_factor {
                    return Err(DeployError::InvalidTable(format!(
                        "layer {i} candidates must be strictly ascending in reuse factor"
                    )));
                }
            }
            for c in cands {
                if !c.cost.is_finite() || c.cost.latency_cycles != c.latency_cycles as f64 {
                    return Err(DeployError::InvalidTable(format!(
                        "layer {i} reuse {} has an inconsistent cost vector",
                        c.reuse_factor
                    )));
                }
            }
        }
        Ok(CandidateTable { layers })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> &[Candidate] {
        &self.layers[i]
    }

    /// Latency of the fastest possible assignment.
    pub fn min_latency_cycles(&self) -> u64 {
        self.layers
            .iter()
            .map(|c| c.iter().map(|x| x.latency_cycles).min().expect("layers are non-empty"))
            .sum()
    }

    /// Number of complete assignments the table admits, saturating at
    /// `u128::MAX`.
    pub fn assignment_count(&self) -> u128 {
        self.layers
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    /// Totals one explicit choice of candidate indices into an [`Assignment`].
    pub fn score(&self, choice: &[usize], budget: &LatencyBudget, weights: Weights) -> Assignment {
        assert_eq!(choice.len(), self.layers.len(), "one choice per layer");
        let mut total = CostVector::default();
        let mut per_layer = Vec::with_capacity(choice.len());
        let mut reuse_factors = Vec::with_capacity(choice.len());
        let mut latency: u64 = 0;
        for (cands, &idx) in self.layers.iter().zip(choice) {
            let c = &cands[idx];
            per_layer.push(c.cost);
            reuse_factors.push(c.reuse_factor);
            total.add_assign(&c.cost);
            latency += c.latency_cycles;
        }
        total.latency_cycles = latency as f64;
        Assignment {
            reuse_factors,
            per_layer,
            total,
            latency_cycles: latency,
            feasible: latency <= budget.cycles,
            scalar_cost: total.scalar(weights),
        }
    }
}

/// The real-time constraint: a cycle budget at a clock rate. The default is
/// 50000 cycles at 250 MHz, i.e. 200 microseconds per inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub cycles: u64,
    pub clock_mhz: f64,
}

impl Default for LatencyBudget {
    fn default() -> Self {
        LatencyBudget { cycles: 50_000, clock_mhz: 250.0 }
    }
}

impl LatencyBudget {
    /// Converts a cycle count into microseconds at this budget's clock.
    pub fn micros(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_mhz
    }
}

/// A complete reuse-factor assignment with its predicted costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub reuse_factors: Vec<u64>,
    pub per_layer: Vec<CostVector>,
    pub total: CostVector,
    pub latency_cycles: u64,
    pub feasible: bool,
    pub scalar_cost: f64,
}

/// Annealing schedule: temperature starts at `initial_temp` and decays by
/// `cooling_rate` (a fraction) every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub initial_temp: f64,
    pub cooling_rate: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { initial_temp: 100.0, cooling_rate: 0.01 }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible: fastest possible assignment needs {min_latency_cycles} cycles, budget is {budget_cycles}")]
    Infeasible { min_latency_cycles: u64, budget_cycles: u64 },
    #[error("no feasible assignment found in {trials} trials (best latency seen {best_latency_cycles}, budget {budget_cycles})")]
    NoFeasibleFound { trials: u64, best_latency_cycles: u64, budget_cycles: u64 },
}

#[derive(Debug, Error)]
pub enum DeployError {
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid candidate table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Builds the candidate table for `net` from trained models: one candidate
/// per legal reuse factor per layer, costs predicted per target, latency
/// ceiling-rounded to whole cycles.
pub fn build_candidates(net: &NetworkSpec, models: &ModelSet) -> Result<CandidateTable, DeployError> {
    let geoms = net.infer_geometry()?;
    let mut layers = Vec::with_capacity(geoms.len());
    for (geom, spec) in geoms.iter().zip(&net.layers) {
        let mut cands = Vec::new();
        for reuse in geom.valid_reuse_factors() {
            let block = geom.block_factor(reuse).expect("enumerated factors divide");
            let features = [
                geom.seq_len as f64,
                geom.in_features as f64,
                spec.size() as f64,
                reuse.get() as f64,
                geom.n_in as f64,
                geom.n_out as f64,
                block as f64,
            ];
            let predict = |target: Target| -> Result<f64, ModelError> {
                models.require(geom.kind, target)?.predict(&features)
            };
            let cost = CostVector {
                lut: predict(Target::Lut)?,
                ff: predict(Target::Ff)?,
                bram: predict(Target::Bram)?,
                dsp: predict(Target::Dsp)?,
                latency_cycles: 0.0,
            };
            let latency = predict(Target::Latency)?.ceil() as u64;
            cands.push(Candidate::new(reuse.get(), cost, latency));
        }
        layers.push(cands);
    }
    CandidateTable::from_layers(layers)
}

/// Internal per-candidate view used by the solvers: original index, scalar
/// cost, integer latency.
#[derive(Debug, Clone, Copy)]
struct Cand {
    idx: usize,
    cost: f64,
    lat: u64,
}

fn scalar_layers(table: &CandidateTable, weights: Weights) -> Vec<Vec<Cand>> {
    table
        .layers
        .iter()
        .map(|cands| {
            cands
                .iter()
                .enumerate()
                .map(|(idx, c)| Cand { idx, cost: c.cost.scalar(weights), lat: c.latency_cycles })
                .collect()
        })
        .collect()
}

/// Exact minimum-cost assignment under the budget, or an infeasibility
/// verdict carrying the minimum achievable latency. Among equal-cost optima
/// it returns the lexicographically smallest reuse vector (layer 0 first).
pub fn solve_exact(
    table: &CandidateTable,
    budget: &LatencyBudget,
    weights: Weights,
) -> Result<Assignment, SolveError> {
    let layers = scalar_layers(table, weights);
    let min_lats: Vec<u64> = layers
        .iter()
        .map(|c| c.iter().map(|x| x.lat).min().expect("non-empty layer"))
        .collect();
    let min_total: u64 = min_lats.iter().sum();
    if min_total > budget.cycles {
        return Err(SolveError::Infeasible {
            min_latency_cycles: min_total,
            budget_cycles: budget.cycles,
        });
    }

    // Slack prune: a candidate that cannot fit even with every other layer
    // at its fastest can never appear in a feasible assignment. Dominance
    // prune: a candidate beaten on cost with no latency advantage can never
    // appear in an optimum; one merely tied on cost is redundant only when
    // the winner also has the smaller reuse factor, otherwise dropping it
    // would break the lexicographic tie-break.
    let kept: Vec<Vec<Cand>> = layers
        .iter()
        .enumerate()
        .map(|(i, cands)| {
            let slack = budget.cycles - (min_total - min_lats[i]);
            let fitting: Vec<Cand> = cands.iter().copied().filter(|c| c.lat <= slack).collect();
            fitting
                .iter()
                .copied()
                .filter(|c| {
                    !fitting.iter().any(|d| {
                        d.lat <= c.lat
                            && (d.cost < c.cost || (d.cost == c.cost && d.idx < c.idx))
                    })
                })
                .collect()
        })
        .collect();

    let choice = if budget.cycles > 1_000_000 {
        branch_bound(&kept, budget.cycles)
    } else {
        frontier_dp(&kept, &min_lats, budget.cycles)
    };
    Ok(table.score(&choice, budget, weights))
}

/// Dynamic program over integer latency. `frontiers[i]` holds the Pareto
/// set of (latency, cost) sums achievable by layers `i..n`, sorted by
/// latency with strictly decreasing cost; dominated sums are pruned as each
/// layer is merged in. Reconstruction walks forward, taking the smallest
/// reuse factor at each layer that still completes to the optimal cost, so
/// the result is the lexicographically smallest optimum.
fn frontier_dp(kept: &[Vec<Cand>], min_lats: &[u64], budget: u64) -> Vec<usize> {
    let n = kept.len();
    let prefix_min: Vec<u64> = std::iter::once(0)
        .chain(min_lats.iter().scan(0, |acc, &m| {
            *acc += m;
            Some(*acc)
        }))
        .collect();

    let mut frontiers: Vec<Vec<(u64, f64)>> = vec![Vec::new(); n + 1];
    frontiers[n] = vec![(0, 0.0)];
    // Latency sums are bounded by the budget (this path only runs for
    // budgets <= 10^6 cycles), so merging uses a dense best-cost-per-latency
    // scratch array instead of sorting the pair products. Caps grow as i
    // decreases, and untouched slots stay at the infinity they were reset
    // to, so one scratch array serves every layer.
    let mut best_at = vec![f64::INFINITY; budget as usize + 1];
    for i in (0..n).rev() {
        let cap = budget - prefix_min[i];
        let mut lo = u64::MAX;
        let mut hi = 0u64;
        for c in &kept[i] {
            for &(lat, cost) in &frontiers[i + 1] {
                let t = c.lat + lat;
                if t > cap {
                    // frontier latencies ascend, nothing later fits either
                    break;
                }
                lo = lo.min(t);
                hi = hi.max(t);
                let cell = &mut best_at[t as usize];
                let v = c.cost + cost;
                if v < *cell {
                    *cell = v;
                }
            }
        }
        let mut pareto: Vec<(u64, f64)> = Vec::new();
        let mut best = f64::INFINITY;
        for t in lo..=hi {
            let cell = &mut best_at[t as usize];
            if *cell < best {
                best = *cell;
                pareto.push((t, best));
            }
            *cell = f64::INFINITY;
        }
        frontiers[i] = pareto;
    }

    let query = |frontier: &[(u64, f64)], lat_cap: u64| -> Option<f64> {
        let pos = frontier.partition_point(|&(lat, _)| lat <= lat_cap);
        (pos > 0).then(|| frontier[pos - 1].1)
    };

    let mut remaining = budget;
    let mut needed = query(&frontiers[0], remaining).expect("feasibility was pre-checked");
    let mut choice = Vec::with_capacity(n);
    for i in 0..n {
        let pick = kept[i]
            .iter()
            .find(|c| {
                c.lat <= remaining
                    && query(&frontiers[i + 1], remaining - c.lat)
                        .is_some_and(|q| c.cost + q == needed)
            })
            .expect("an optimal completion exists by construction");
        choice.push(pick.idx);
        remaining -= pick.lat;
        needed -= pick.cost;
        // Recompute against the stored frontier value to keep bitwise
        // equality with the sums the DP recorded.
        if i + 1 < n {
            needed = query(&frontiers[i + 1], remaining).expect("chosen prefix stays feasible");
        }
    }
    choice
}

/// Depth-first branch and bound with suffix cost/latency bounds. Pass one
/// explores candidates cheapest-first to find the optimal cost quickly; pass
/// two re-walks in ascending reuse order and returns the first assignment
/// that reproduces the optimum, which is the lexicographically smallest one.
fn branch_bound(kept: &[Vec<Cand>], budget: u64) -> Vec<usize> {
    let n = kept.len();
    let mut suffix_min_cost = vec![0.0f64; n + 1];
    let mut suffix_min_lat = vec![0u64; n + 1];
    for i in (0..n).rev() {
        let min_c = kept[i].iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        let min_l = kept[i].iter().map(|c| c.lat).min().expect("non-empty layer");
        suffix_min_cost[i] = suffix_min_cost[i + 1] + min_c;
        suffix_min_lat[i] = suffix_min_lat[i + 1] + min_l;
    }

    let mut by_cost: Vec<Vec<Cand>> = kept.to_vec();
    for layer in &mut by_cost {
        layer.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    }

    fn pass1(
        by_cost: &[Vec<Cand>],
        suffix_min_cost: &[f64],
        suffix_min_lat: &[u64],
        budget: u64,
        depth: usize,
        cur_cost: f64,
        cur_lat: u64,
        best: &mut f64,
    ) {
        if depth == by_cost.len() {
            if cur_cost < *best {
                *best = cur_cost;
            }
            return;
        }
        for c in &by_cost[depth] {
            if cur_lat + c.lat + suffix_min_lat[depth + 1] > budget {
                continue;
            }
            let bound = cur_cost + c.cost + suffix_min_cost[depth + 1];
            if bound >= *best {
                // Candidates are cost-sorted, so everything later is at
                // least as expensive.
                break;
            }
            pass1(by_cost, suffix_min_cost, suffix_min_lat, budget, depth + 1, cur_cost + c.cost, cur_lat + c.lat, best);
        }
    }

    let mut best = f64::INFINITY;
    pass1(&by_cost, &suffix_min_cost, &suffix_min_lat, budget, 0, 0.0, 0, &mut best);
    debug_assert!(best.is_finite(), "feasibility was pre-checked");

    fn pass2(
        kept: &[Vec<Cand>],
        suffix_min_cost: &[f64],
        suffix_min_lat: &[u64],
        budget: u64,
        best: f64,
        depth: usize,
        cur_cost: f64,
        cur_lat: u64,
        choice: &mut Vec<usize>,
    ) -> bool {
        if depth == kept.len() {
            return cur_cost == best;
        }
        for c in &kept[depth] {
            if cur_lat + c.lat + suffix_min_lat[depth + 1] > budget {
                continue;
            }
            if cur_cost + c.cost + suffix_min_cost[depth + 1] > best {
                continue;
            }
            choice.push(c.idx);
            if pass2(kept, suffix_min_cost, suffix_min_lat, budget, best, depth + 1, cur_cost + c.cost, cur_lat + c.lat, choice) {
                return true;
            }
            choice.pop();
        }
        false
    }

    let mut choice = Vec::with_capacity(n);
    let found = pass2(kept, &suffix_min_cost, &suffix_min_lat, budget, best, 0, 0.0, 0, &mut choice);
    assert!(found, "pass 2 must rediscover the optimum found in pass 1");
    choice
}

/// Best feasible assignment over `trials` uniform random draws, one
/// candidate per layer per draw. Deterministic per seed.
pub fn solve_stochastic(
    table: &CandidateTable,
    budget: &LatencyBudget,
    weights: Weights,
    trials: u64,
    seed: u64,
) -> Result<Assignment, SolveError> {
    assert!(trials >= 1, "at least one trial");
    let layers = scalar_layers(table, weights);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut best_lat_seen = u64::MAX;
    let mut draw = vec![0usize; layers.len()];
    for _ in 0..trials {
        let mut cost = 0.0;
        let mut lat = 0u64;
        for (slot, cands) in draw.iter_mut().zip(&layers) {
            let pick = rng.random_range(0..cands.len());
            *slot = pick;
            cost += cands[pick].cost;
            lat += cands[pick].lat;
        }
        best_lat_seen = best_lat_seen.min(lat);
        if lat <= budget.cycles && best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, draw.clone()));
        }
    }
    match best {
        Some((_, choice)) => Ok(table.score(&choice, budget, weights)),
        None => Err(SolveError::NoFeasibleFound {
            trials,
            best_latency_cycles: best_lat_seen,
            budget_cycles: budget.cycles,
        }),
    }
}

/// Acceptance probability for a feasible proposal against the best feasible
/// cost so far: 1 when the proposal is no worse, otherwise
/// `exp((best - proposed) / t)`, falling to 0 as the temperature hits zero.
fn sa_acceptance(best: f64, proposed: f64, temperature: f64) -> f64 {
    if proposed <= best {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        ((best - proposed) / temperature).exp()
    }
}

/// Simulated annealing over assignments: starts from a uniform random draw,
/// re-draws one layer per iteration, rejects infeasible proposals outright,
/// always accepts a new best feasible cost, and accepts a worse feasible
/// proposal with probability `exp((best - proposed) / t)`. The temperature
/// decays multiplicatively every iteration, so after a few thousand
/// iterations the walk is effectively greedy.
pub fn solve_sa(
    table: &CandidateTable,
    budget: &LatencyBudget,
    weights: Weights,
    trials: u64,
    seed: u64,
    params: SaParams,
) -> Result<Assignment, SolveError> {
    assert!(trials >= 1, "at least one iteration");
    assert!(params.initial_temp > 0.0 && params.cooling_rate > 0.0 && params.cooling_rate < 1.0);
    let layers = scalar_layers(table, weights);
    let n = layers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let eval = |state: &[usize], layers: &[Vec<Cand>]| -> (f64, u64) {
        let mut cost = 0.0;
        let mut lat = 0u64;
        for (&s, cands) in state.iter().zip(layers) {
            cost += cands[s].cost;
            lat += cands[s].lat;
        }
        (cost, lat)
    };

    let mut current: Vec<usize> = layers.iter().map(|c| rng.random_range(0..c.len())).collect();
    let (cur_cost, cur_lat) = eval(&current, &layers);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut best_lat_seen = cur_lat;
    if cur_lat <= budget.cycles {
        best = Some((cur_cost, current.clone()));
    }

    let mut temperature = params.initial_temp;
    for _ in 0..trials {
        let layer = rng.random_range(0..n);
        let options = layers[layer].len();
        let mut proposal = current.clone();
        if options > 1 {
            // Draw a different candidate for the chosen layer.
            let shift = rng.random_range(1..options);
            proposal[layer] = (current[layer] + shift) % options;
        }
        let (prop_cost, prop_lat) = eval(&proposal, &layers);
        best_lat_seen = best_lat_seen.min(prop_lat);
        if prop_lat <= budget.cycles {
            match &best {
                Some((best_cost, _)) if prop_cost >= *best_cost => {
                    if rng.random_bool(sa_acceptance(*best_cost, prop_cost, temperature).min(1.0)) {
                        current = proposal;
                    }
                }
                _ => {
                    best = Some((prop_cost, proposal.clone()));
                    current = proposal;
                }
            }
        }
        temperature *= 1.0 - params.cooling_rate;
    }

    match best {
        Some((_, choice)) => Ok(table.score(&choice, budget, weights)),
        None => Err(SolveError::NoFeasibleFound {
            trials,
            best_latency_cycles: best_lat_seen,
            budget_cycles: budget.cycles,
        }),
    }
}

/// Solver identity in comparison reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stochastic,
    Sa,
    Exact,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Stochastic => "stochastic",
            Method::Sa => "sa",
            Method::Exact => "exact",
        })
    }
}

/// One comparison row: a solver, its trial count (empty for exact), the
/// headline resources and latency of the assignment it found, and how long
/// the search took. Cost fields are `None` when the method found no feasible
/// assignment at that trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    pub trials: Option<u64>,
    pub luts: Option<f64>,
    pub dsps: Option<f64>,
    pub latency_us: Option<f64>,
    pub search_time_s: f64,
    pub scalar_cost: Option<f64>,
}

/// Runs the stochastic and annealing baselines at every trial count in
/// `ladder`, then the exact solver once, timing each run. Rows keep the
/// ladder order with the exact row last. Methods run serially so the timings
/// do not contend with each other.
pub fn compare(
    table: &CandidateTable,
    budget: &LatencyBudget,
    weights: Weights,
    ladder: &[u64],
    seed: u64,
) -> Result<Vec<CompareRow>, DeployError> {
    assert!(!ladder.is_empty(), "ladder needs at least one trial count");
    let mut rows = Vec::new();
    for (i, &trials) in ladder.iter().enumerate() {
        for (method, stream) in [(Method::Stochastic, 2 * i), (Method::Sa, 2 * i + 1)] {
            let cell_seed = derive_seed(seed, stream as u64);
            let start = Instant::now();
            let outcome = match method {
                Method::Stochastic => solve_stochastic(table, budget, weights, trials, cell_seed),
                Method::Sa => solve_sa(table, budget, weights, trials, cell_seed, SaParams::default()),
                Method::Exact => unreachable!(),
            };
            let elapsed = start.elapsed().as_secs_f64();
            rows.push(match outcome {
                Ok(a) => CompareRow {
                    method,
                    trials: Some(trials),
                    luts: Some(a.total.lut),
                    dsps: Some(a.total.dsp),
                    latency_us: Some(budget.micros(a.latency_cycles)),
                    search_time_s: elapsed,
                    scalar_cost: Some(a.scalar_cost),
                },
                Err(SolveError::NoFeasibleFound { .. }) => CompareRow {
                    method,
                    trials: Some(trials),
                    luts: None,
                    dsps: None,
                    latency_us: None,
                    search_time_s: elapsed,
                    scalar_cost: None,
                },
                Err(e @ SolveError::Infeasible { .. }) => return Err(e.into()),
            });
        }
    }
    let start = Instant::now();
    let exact = solve_exact(table, budget, weights)?;
    let elapsed = start.elapsed().as_secs_f64();
    rows.push(CompareRow {
        method: Method::Exact,
        trials: None,
        luts: Some(exact.total.lut),
        dsps: Some(exact.total.dsp),
        latency_us: Some(budget.micros(exact.latency_cycles)),
        search_time_s: elapsed,
        scalar_cost: Some(exact.scalar_cost),
    });
    Ok(rows)
}

//! Acceptance suite: one test per release gate, each printing a single
//! PASS/FAIL line. Tests share a lock so wall-clock measurements are not
//! perturbed by parallel neighbors.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rfopt_core::data::{gen_synthetic, split_train_test, SweepSpec, Target};
use rfopt_core::forest::{train, ModelSet, TrainingConfig};
use rfopt_core::layer::{LayerGeometry, LayerKind, LayerSpec, NetworkSpec};
use rfopt_core::metrics::evaluate;
use rfopt_core::nas::{ParetoArchive, SearchSpace, Trial, TrialStatus};
use rfopt_core::solve::{
    solve_exact, solve_sa, solve_stochastic, Candidate, CandidateTable, CostVector, LatencyBudget,
    SaParams, SolveError, Weights,
};

static GATE: Mutex<()> = Mutex::new(());

/// Runs one gate serially and prints exactly one PASS/FAIL line for it.
fn gate(name: &str, body: impl FnOnce()) {
    let _lock = GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("PASS {name}"),
        Err(cause) => {
            println!("FAIL {name}");
            resume_unwind(cause);
        }
    }
}

#[test]
fn gate_1_workload_caps_are_exact() {
    gate("workload caps: largest conv/lstm/dense layers multiply out exactly", || {
        let started = Instant::now();

        let conv = NetworkSpec::new(512, 256, vec![LayerSpec::conv1d(256, 3, 1), LayerSpec::dense(1)]);
        let geoms = conv.infer_geometry().unwrap();
        assert_eq!(geoms[0].workload(&conv.layers[0]), 100_663_296);

        let lstm = NetworkSpec::new(512, 256, vec![LayerSpec::lstm(425), LayerSpec::dense(1)]);
        let geoms = lstm.infer_geometry().unwrap();
        assert_eq!(geoms[0].workload(&lstm.layers[0]), 223_544_900);

        let dense = NetworkSpec::new(512, 425, vec![LayerSpec::lstm(425), LayerSpec::dense(512)]);
        let geoms = dense.infer_geometry().unwrap();
        assert_eq!(geoms[1].workload(&dense.layers[1]), 111_411_200);

        assert!(started.elapsed().as_secs_f64() < 1.0, "cap check must finish inside a second");
    });
}

#[test]
fn gate_2_reuse_times_block_factor_recovers_the_matvec_product() {
    gate("block-factor algebra: r * block_factor == n_in * n_out on 10^4 draws", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let n_in = rng.random_range(1u64..=1024);
            let n_out = rng.random_range(1u64..=1024);
            let geom = LayerGeometry {
                kind: LayerKind::Dense,
                n_in,
                n_out,
                seq_len: 1,
                in_features: n_in,
                out_features: n_out,
            };
            let valid = geom.valid_reuse_factors();
            let r = valid[rng.random_range(0..valid.len())];
            let block = geom.block_factor(r).unwrap();
            assert_eq!(r.get() * block, n_in * n_out, "n_in={n_in} n_out={n_out} r={r}");
        }
    });
}

/// Random instance with whole-number costs, so scalar sums are exact in f64
/// no matter the accumulation order.
fn random_table(rng: &mut ChaCha8Rng, max_layers: usize, max_cands: usize, max_lat: u64) -> CandidateTable {
    let n_layers = rng.random_range(1..=max_layers);
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let k = rng.random_range(1..=max_cands);
        let mut rf = 0u64;
        let mut cands = Vec::with_capacity(k);
        for _ in 0..k {
            rf += rng.random_range(1..=4);
            let cost = CostVector {
                lut: rng.random_range(0..=300) as f64,
                ff: rng.random_range(0..=100) as f64,
                bram: rng.random_range(0..=40) as f64,
                dsp: rng.random_range(0..=60) as f64,
                latency_cycles: 0.0,
            };
            cands.push(Candidate::new(rf, cost, rng.random_range(1..=max_lat)));
        }
        layers.push(cands);
    }
    CandidateTable::from_layers(layers).unwrap()
}

fn latency_extremes(table: &CandidateTable) -> (u64, u64) {
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..table.n_layers() {
        lo += table.layer(i).iter().map(|c| c.latency_cycles).min().unwrap();
        hi += table.layer(i).iter().map(|c| c.latency_cycles).max().unwrap();
    }
    (lo, hi)
}

/// Full enumeration in candidate-index order: minimum scalar cost, ties
/// broken by the lexicographically smallest reuse-factor vector.
fn brute_force(table: &CandidateTable, budget: u64, weights: Weights) -> Option<(f64, Vec<u64>)> {
    let n = table.n_layers();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<u64>)> = None;
    loop {
        let mut cost = 0.0;
        let mut lat = 0u64;
        for (i, &j) in idx.iter().enumerate() {
            let c = &table.layer(i)[j];
            cost += c.cost.scalar(weights);
            lat += c.latency_cycles;
        }
        if lat <= budget {
            let rfs: Vec<u64> = idx.iter().enumerate().map(|(i, &j)| table.layer(i)[j].reuse_factor).collect();
            let better = match &best {
                None => true,
                Some((bc, brf)) => cost < *bc || (cost == *bc && rfs < *brf),
            };
            if better {
                best = Some((cost, rfs));
            }
        }
        // mixed-radix increment over candidate indices
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < table.layer(i).len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

#[test]
fn gate_3_exact_solver_matches_full_enumeration() {
    gate("exact-solver oracle: 500 random instances agree with brute force", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights = Weights::default();
        for case in 0..500 {
            let table = loop {
                let t = random_table(&mut rng, 6, 10, 120);
                if t.assignment_count() <= 250_000 {
                    break t;
                }
            };
            let (lo, hi) = latency_extremes(&table);
            // spans infeasible through slack so both verdicts are exercised
            let budget = rng.random_range(lo.saturating_sub(lo / 5)..=hi + hi / 10 + 1);
            let budget = LatencyBudget { cycles: budget, clock_mhz: 250.0 };

            let oracle = brute_force(&table, budget.cycles, weights);
            match solve_exact(&table, &budget, weights) {
                Ok(got) => {
                    let (cost, rfs) = oracle.expect("solver found a solution the oracle missed");
                    assert_eq!(got.scalar_cost, cost, "case {case}: objective mismatch");
                    assert_eq!(got.reuse_factors, rfs, "case {case}: tie-break mismatch");
                }
                Err(SolveError::Infeasible { .. }) => {
                    assert!(oracle.is_none(), "case {case}: solver called a solvable instance infeasible");
                }
                Err(other) => panic!("case {case}: unexpected error {other}"),
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 60.0, "oracle sweep took {elapsed:.1}s, budget is 60s");
    });
}

#[test]
fn gate_4_exact_never_loses_to_the_randomized_baselines() {
    gate("solver ordering: exact <= sa and exact <= stochastic on 100 instances x 5 seeds", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weights = Weights::default();
        for _ in 0..100 {
            let table = random_table(&mut rng, 8, 12, 2_000);
            let (lo, hi) = latency_extremes(&table);
            // generous budget so the baselines usually find something
            let budget = LatencyBudget { cycles: lo + (hi - lo) * 4 / 5, clock_mhz: 250.0 };
            let exact = solve_exact(&table, &budget, weights).expect("budget covers the fastest assignment");
            for seed in 0..5 {
                // a baseline that finds nothing asserts nothing
                if let Ok(st) = solve_stochastic(&table, &budget, weights, 2_000, seed) {
                    assert!(st.feasible && exact.scalar_cost <= st.scalar_cost);
                }
                if let Ok(sa) = solve_sa(&table, &budget, weights, 2_000, seed, SaParams::default()) {
                    assert!(sa.feasible && exact.scalar_cost <= sa.scalar_cost);
                }
            }
        }
    });
}

/// Wider grid than the default sweep so every layer kind contributes a few
/// thousand distinct rows; forests interpolate instead of bridging gaps.
fn wide_sweep() -> SweepSpec {
    SweepSpec {
        input_lengths: vec![32, 48, 64, 96, 128, 192, 256, 384, 512],
        input_channels: 1,
        conv_counts: vec![1, 2, 3, 4],
        conv_channels: vec![8, 16, 24, 32, 48, 64],
        kernels: vec![3],
        pools: vec![2],
        lstm_counts: vec![0, 1, 2],
        lstm_units: vec![8, 12, 16, 24, 32, 48],
        dense_counts: vec![1, 2],
        dense_neurons: vec![16, 24, 32, 48, 64, 96],
        raw_reuse_factors: vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512],
    }
}

fn eleven_layer_net() -> NetworkSpec {
    NetworkSpec::new(
        512,
        1,
        vec![
            LayerSpec::conv1d(16, 3, 2),
            LayerSpec::conv1d(16, 3, 2),
            LayerSpec::conv1d(16, 3, 2),
            LayerSpec::conv1d(16, 3, 2),
            LayerSpec::conv1d(16, 3, 2),
            LayerSpec::dense(64),
            LayerSpec::dense(64),
            LayerSpec::dense(32),
            LayerSpec::dense(32),
            LayerSpec::dense(16),
            LayerSpec::dense(16),
        ],
    )
}

fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[test]
fn gate_5_exact_beats_a_million_random_trials_on_wall_clock() {
    gate("speed: exact <= 1% of a 1M-trial stochastic run; stochastic time linear in trials", || {
        let corpus = gen_synthetic(&wide_sweep(), 5.0, 42);
        let config = TrainingConfig { feature_subsample: 7, seed: 42, ..TrainingConfig::default() };
        let mut models = ModelSet::new("acceptance");
        for kind in [LayerKind::Conv1d, LayerKind::Dense] {
            for target in Target::ALL {
                models.insert(train(&corpus, kind, target, &config).unwrap());
            }
        }

        let net = eleven_layer_net();
        let table = rfopt_core::solve::build_candidates(&net, &models).unwrap();
        let budget = LatencyBudget::default();
        let weights = Weights::default();
        assert!(table.min_latency_cycles() <= budget.cycles, "instance must be solvable");

        // warm caches before timing either side
        solve_exact(&table, &budget, weights).unwrap();
        solve_stochastic(&table, &budget, weights, 1_000, 5).ok();

        let mut exact_s = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            let exact = solve_exact(&table, &budget, weights).unwrap();
            exact_s = exact_s.min(t.elapsed().as_secs_f64());
            assert!(exact.feasible);
        }

        let ladder = [1_000u64, 10_000, 100_000, 1_000_000];
        let mut times = Vec::new();
        for &trials in &ladder {
            let t = Instant::now();
            solve_stochastic(&table, &budget, weights, trials, 5).unwrap();
            times.push(t.elapsed().as_secs_f64());
        }

        let ratio = exact_s / times[3];
        assert!(
            ratio <= 0.01,
            "exact {exact_s:.6}s vs 1M stochastic {:.6}s: ratio {:.4} above 1%",
            times[3],
            ratio
        );

        let xs: Vec<f64> = ladder.iter().map(|&t| t as f64).collect();
        let r2 = linear_fit_r2(&xs, &times);
        assert!(r2 >= 0.95, "stochastic timing not linear in trials: r2 {r2:.4}, times {times:?}");
    });
}

#[test]
fn gate_6_feasible_results_respect_the_cycle_budget() {
    gate("feasibility: every returned assignment meets the integer cycle budget", || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let budget = LatencyBudget::default();
        let weights = Weights::default();
        let mut returned = 0;
        for _ in 0..60 {
            let table = random_table(&mut rng, 12, 10, 9_000);
            let solutions = [
                solve_exact(&table, &budget, weights),
                solve_stochastic(&table, &budget, weights, 3_000, 11),
                solve_sa(&table, &budget, weights, 3_000, 11, SaParams::default()),
            ];
            for sol in solutions.into_iter().flatten() {
                returned += 1;
                assert!(sol.feasible, "solvers must never hand back an infeasible assignment");
                // recompute the latency sum from the table, integer cycles
                let mut lat = 0u64;
                for (i, rf) in sol.reuse_factors.iter().enumerate() {
                    let c = table.layer(i).iter().find(|c| c.reuse_factor == *rf).unwrap();
                    lat += c.latency_cycles;
                }
                assert_eq!(lat, sol.latency_cycles);
                assert!(lat <= budget.cycles, "reported feasible at {lat} cycles over {}", budget.cycles);
            }
        }
        assert!(returned > 60, "budget too tight, the property was barely exercised");
    });
}

#[test]
fn gate_7_forests_hold_r2_on_noisy_holdouts_and_memorize_clean_splits() {
    gate("model quality: holdout r2 >= 0.95 for every kind and target; memorizing config hits 1.0", || {
        let corpus = gen_synthetic(&wide_sweep(), 5.0, 42);
        let (train_set, test_set) = split_train_test(&corpus, 0.8, 42).unwrap();
        let config = TrainingConfig { feature_subsample: 7, seed: 42, ..TrainingConfig::default() };

        for kind in LayerKind::ALL {
            for target in Target::ALL {
                let model = train(&train_set, kind, target, &config).unwrap();
                let report = evaluate(&model, &test_set).unwrap();
                assert!(
                    report.r2 >= 0.95,
                    "{kind} {} holdout r2 {:.4} below 0.95",
                    target.name(),
                    report.r2
                );
            }
        }

        for kind in LayerKind::ALL {
            let model = train(&train_set, kind, Target::Latency, &TrainingConfig::memorization(42)).unwrap();
            let report = evaluate(&model, &train_set).unwrap();
            assert_eq!(report.r2, 1.0, "{kind} memorization must reproduce its training split exactly");
        }
    });
}

fn tiny_net() -> NetworkSpec {
    NetworkSpec::new(8, 1, vec![LayerSpec::dense(1)])
}

fn archive_key(t: &Trial) -> (u64, u64, u64) {
    match t.status {
        TrialStatus::Evaluated { obj1, workload } => (t.id, obj1.to_bits(), workload),
        TrialStatus::Failed { .. } => unreachable!("archives hold evaluated trials"),
    }
}

#[test]
fn gate_8_archive_equals_the_quadratic_pareto_oracle() {
    gate("archive: matches the O(n^2) non-dominated set on 10^4 trials, any insertion order", || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = tiny_net();
        // lattice objectives force plenty of exact ties
        let trials: Vec<Trial> = (0..10_000u64)
            .map(|id| Trial {
                id,
                net: net.clone(),
                status: TrialStatus::Evaluated {
                    obj1: rng.random_range(0..80) as f64 * 0.125,
                    workload: rng.random_range(0..60u64) * 1_000,
                },
            })
            .collect();

        // quadratic oracle: survivors no other point dominates, duplicates
        // collapsed to the lowest trial id
        let dominates = |a: (f64, u64), b: (f64, u64)| a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1);
        let point = |t: &Trial| match t.status {
            TrialStatus::Evaluated { obj1, workload } => (obj1, workload),
            TrialStatus::Failed { .. } => unreachable!(),
        };
        let mut oracle: BTreeSet<(u64, u64, u64)> = BTreeSet::new();
        for t in &trials {
            let p = point(t);
            let beaten = trials.iter().any(|o| dominates(point(o), p));
            let duplicate_with_lower_id = trials.iter().any(|o| point(o) == p && o.id < t.id);
            if !beaten && !duplicate_with_lower_id {
                oracle.insert(archive_key(t));
            }
        }

        let mut order: Vec<usize> = (0..trials.len()).collect();
        for shuffle in 0..10 {
            let mut archive = ParetoArchive::new();
            for &i in &order {
                archive.insert(trials[i].clone());
            }
            let got: BTreeSet<(u64, u64, u64)> = archive.members().iter().map(archive_key).collect();
            assert_eq!(got, oracle, "shuffle {shuffle} changed the front");
            order.shuffle(&mut rng);
        }
    });
}

fn rfopt(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rfopt"))
        .arg("--out-dir")
        .arg(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &std::process::Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gate_9_full_flow_deploys_every_front_member() {
    gate("end to end: gen-data -> train -> search -> optimize leaves no front member infeasible", || {
        let started = Instant::now();
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();

        assert_ok(&rfopt(dir, &["gen-data", "--seed", "42"]), "gen-data");
        let data = dir.join("observations.csv");
        assert_ok(
            &rfopt(dir, &["train", "--data", data.to_str().unwrap(), "--seed", "42"]),
            "train",
        );

        // search inside the envelope the models were trained on
        let space = SearchSpace {
            input_lengths: vec![128, 256],
            input_channels: 1,
            conv_blocks: (1, 3),
            conv_filters: (4, 32),
            kernels: vec![3],
            pools: vec![2],
            lstm_layers: (0, 2),
            lstm_units: (4, 32),
            dense_layers: (1, 3),
            dense_neurons: (8, 64),
        };
        let space_path = dir.join("space.json");
        std::fs::write(&space_path, serde_json::to_vec_pretty(&space).unwrap()).unwrap();
        assert_ok(
            &rfopt(
                dir,
                &["search", "--space", space_path.to_str().unwrap(), "--trials", "200", "--seed", "42"],
            ),
            "search",
        );

        // map front members back to their full shapes via the trial log
        let mut nets_by_id = std::collections::HashMap::new();
        let log = std::fs::read_to_string(dir.join("trials.jsonl")).unwrap();
        for line in log.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            nets_by_id.insert(v["id"].as_u64().unwrap(), v["net"].clone());
        }
        let front = std::fs::read_to_string(dir.join("front.csv")).unwrap();
        let mut members = Vec::new();
        for record in csv::Reader::from_reader(front.as_bytes()).records() {
            members.push(record.unwrap()[0].parse::<u64>().unwrap());
        }
        assert!(!members.is_empty(), "the search produced an empty front");

        let models = dir.join("models");
        for id in members {
            let net_path = dir.join(format!("net_{id}.json"));
            std::fs::write(&net_path, serde_json::to_vec(&nets_by_id[&id]).unwrap()).unwrap();
            let out_name = format!("assignment_{id}.json");
            let out = rfopt(
                dir,
                &[
                    "optimize",
                    "--network",
                    net_path.to_str().unwrap(),
                    "--models",
                    models.to_str().unwrap(),
                    "--out",
                    &out_name,
                ],
            );
            assert_ok(&out, &format!("optimize trial {id}"));
            let report: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join(&out_name)).unwrap()).unwrap();
            assert_eq!(report["feasible"], serde_json::Value::Bool(true));
            assert!(report["latency_cycles"].as_u64().unwrap() <= 50_000);
        }

        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 600.0, "full flow took {elapsed:.0}s, budget is 10 minutes");
    });
}

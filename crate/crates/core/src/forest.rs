//! Regression forests mapping layer features to resource and latency targets.
//!
//! One forest is trained per (layer kind, target) pair on the deduplicated
//! observation corpus. Trees are classic CART regressors: greedy
//! variance-reduction splits, optional bootstrap resampling, and a random
//! feature subset considered at every split. Training is deterministic for a
//! fixed (data, config) pair regardless of thread count: every tree owns an
//! RNG seeded from the master seed and its tree index.
//!
//! An impure node is always split as long as any feature still separates its
//! rows, even when the best split reduces variance by zero. That detail makes
//! the memorization configuration (one tree, no bootstrap, all features,
//! `min_leaf` 1) reproduce its training targets exactly on corpora with
//! unique feature tuples, which is the sanity anchor the tests lean on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ObservationSet, Target, FEATURE_NAMES};
use crate::layer::LayerKind;
use crate::util::derive_seed;

/// On-disk format version; bump when the file layout changes.
pub const FORMAT_VERSION: u32 = 1;

/// Forest training parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<u32>,
    /// Minimum observations on each side of a split.
    pub min_leaf: usize,
    /// Features considered per split before the search widens; see
    /// [`TrainingConfig::default`].
    pub feature_subsample: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainingConfig {
    /// 100 trees, unlimited depth, `min_leaf` 1, bootstrap on, and
    /// `ceil(sqrt(n_features))` features per split.
    fn default() -> Self {
        TrainingConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: 3,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Single fully-grown tree over the raw data considering every feature:
    /// reproduces training targets exactly when feature tuples are unique.
    pub fn memorization(seed: u64) -> Self {
        TrainingConfig {
            n_trees: 1,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: FEATURE_NAMES.len(),
            bootstrap: false,
            seed,
        }
    }
}

/// One CART tree in index form. `feature[i] < 0` marks node `i` as a leaf
/// whose value sits in `threshold[i]`; otherwise rows with
/// `x[feature[i]] <= threshold[i]` descend to `left[i]`, the rest to
/// `right[i]`. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) feature: Vec<i8>,
    pub(crate) threshold: Vec<f64>,
    pub(crate) left: Vec<u32>,
    pub(crate) right: Vec<u32>,
}

impl Tree {
    fn new_slot(&mut self) -> u32 {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        (self.feature.len() - 1) as u32
    }

    fn set_leaf(&mut self, slot: u32, value: f64) {
        self.feature[slot as usize] = -1;
        self.threshold[slot as usize] = value;
    }

    fn set_split(&mut self, slot: u32, feature: usize, threshold: f64, left: u32, right: u32) {
        self.feature[slot as usize] = feature as i8;
        self.threshold[slot as usize] = threshold;
        self.left[slot as usize] = left;
        self.right[slot as usize] = right;
    }

    fn predict(&self, features: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f < 0 {
                return self.threshold[node];
            }
            node = if features[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    fn check(&self) -> Result<(), String> {
        let n = self.feature.len();
        if n == 0 || self.threshold.len() != n || self.left.len() != n || self.right.len() != n {
            return Err("tree arrays empty or of unequal length".into());
        }
        for i in 0..n {
            if self.feature[i] >= 0 {
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                if self.feature[i] as usize >= FEATURE_NAMES.len() || l >= n || r >= n || l <= i || r <= i {
                    return Err(format!("node {i} is malformed"));
                }
            }
            if !self.threshold[i].is_finite() {
                return Err(format!("node {i} has a non-finite threshold"));
            }
        }
        Ok(())
    }
}

/// A trained forest for one (layer kind, target) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    format_version: u32,
    pub kind: LayerKind,
    pub target: Target,
    pub feature_names: Vec<String>,
    pub config: TrainingConfig,
    trees: Vec<Tree>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no {kind} observations to train on")]
    NoObservations { kind: LayerKind },
    #[error("model expects {expected} features, got {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("model file {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("model file {path} has format version {found}; this build reads version {expected}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("no model for {kind}/{target} under {dir}")]
    Missing { kind: LayerKind, target: Target, dir: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trains one forest on the observations of `kind`, predicting `target`.
/// At least one observation of the kind must be present; a single
/// observation yields a constant predictor.
pub fn train(
    set: &ObservationSet,
    kind: LayerKind,
    target: Target,
    config: &TrainingConfig,
) -> Result<ForestModel, ModelError> {
    let xs: Vec<[f64; FEATURE_NAMES.len()]> = set.of_kind(kind).map(|o| o.features()).collect();
    let ys: Vec<f64> = set.of_kind(kind).map(|o| o.targets.get(target)).collect();
    if xs.is_empty() {
        return Err(ModelError::NoObservations { kind });
    }
    assert!(config.n_trees >= 1, "a forest needs at least one tree");
    assert!(config.min_leaf >= 1, "min_leaf must be at least 1");
    assert!(config.feature_subsample >= 1, "feature_subsample must be at least 1");

    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|tree_no| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, tree_no as u64));
            grow_tree(&xs, &ys, config, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        format_version: FORMAT_VERSION,
        kind,
        target,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
        trees,
    })
}

fn grow_tree(xs: &[[f64; FEATURE_NAMES.len()]], ys: &[f64], cfg: &TrainingConfig, rng: &mut ChaCha8Rng) -> Tree {
    let n = xs.len();
    let root_rows: Vec<u32> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n) as u32).collect()
    } else {
        (0..n as u32).collect()
    };

    let mut tree = Tree { feature: vec![], threshold: vec![], left: vec![], right: vec![] };
    let root = tree.new_slot();
    let mut work = vec![(root_rows, 0u32, root)];
    while let Some((rows, depth, slot)) = work.pop() {
        match find_split(xs, ys, &rows, depth, cfg, rng) {
            None => tree.set_leaf(slot, mean(ys, &rows)),
            Some((feature, threshold)) => {
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&r| xs[r as usize][feature] <= threshold);
                let left = tree.new_slot();
                let right = tree.new_slot();
                tree.set_split(slot, feature, threshold, left, right);
                work.push((left_rows, depth + 1, left));
                work.push((right_rows, depth + 1, right));
            }
        }
    }
    tree
}

fn mean(ys: &[f64], rows: &[u32]) -> f64 {
    rows.iter().map(|&r| ys[r as usize]).sum::<f64>() / rows.len() as f64
}

/// Picks the variance-minimizing (feature, threshold) over a shuffled feature
/// subset. Inspects `feature_subsample` features, widening one feature at a
/// time while no valid split has turned up. Returns `None` when the node is
/// pure, too small, too deep, or no feature separates its rows.
fn find_split(
    xs: &[[f64; FEATURE_NAMES.len()]],
    ys: &[f64],
    rows: &[u32],
    depth: u32,
    cfg: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, f64)> {
    let n = rows.len();
    if n < 2 * cfg.min_leaf || n < 2 {
        return None;
    }
    if let Some(limit) = cfg.max_depth {
        if depth >= limit {
            return None;
        }
    }
    let first = ys[rows[0] as usize];
    if rows.iter().all(|&r| ys[r as usize] == first) {
        return None;
    }

    let mut order: Vec<usize> = (0..FEATURE_NAMES.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(rng);

    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut best: Option<(f64, usize, f64)> = None; // (children sse, feature, threshold)
    for (inspected, &feature) in order.iter().enumerate() {
        if inspected >= cfg.feature_subsample && best.is_some() {
            break;
        }
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (xs[r as usize][feature], ys[r as usize])));
        sorted.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));

        let total_sum: f64 = sorted.iter().map(|p| p.1).sum();
        let total_sq: f64 = sorted.iter().map(|p| p.1 * p.1).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for split in 1..n {
            let (x_prev, y_prev) = sorted[split - 1];
            left_sum += y_prev;
            left_sq += y_prev * y_prev;
            let x_here = sorted[split].0;
            if x_prev == x_here {
                continue;
            }
            if split < cfg.min_leaf || n - split < cfg.min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / split as f64)
                + (right_sq - right_sum * right_sum / (n - split) as f64);
            if best.map_or(true, |(b, _, _)| sse < b) {
                let mut threshold = 0.5 * (x_prev + x_here);
                if threshold >= x_here {
                    threshold = x_prev;
                }
                best = Some((sse, feature, threshold));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

impl ForestModel {
    /// Mean prediction over all trees, clamped at zero. The feature slice
    /// must match the model's schema length.
    pub fn predict(&self, features: &[f64]) -> Result<f64, ModelError> {
        if features.len() != self.feature_names.len() {
            return Err(ModelError::SchemaMismatch {
                expected: self.feature_names.len(),
                got: features.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok((sum / self.trees.len() as f64).max(0.0))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Serializes to self-describing JSON and renames into place, so readers
    /// never observe a half-written file.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let bytes = serde_json::to_vec(self).expect("model serialization cannot fail");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a model file, checking the format version before anything else
    /// so a layout change surfaces as a version error rather than a parse
    /// failure.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let name = path.display().to_string();
        let bytes = std::fs::read(path)?;

        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u32,
        }
        let probe: VersionProbe = serde_json::from_slice(&bytes)
            .map_err(|e| ModelError::Corrupt { path: name.clone(), message: e.to_string() })?;
        if probe.format_version != FORMAT_VERSION {
            return Err(ModelError::Version {
                path: name,
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }

        let model: ForestModel = serde_json::from_slice(&bytes)
            .map_err(|e| ModelError::Corrupt { path: name.clone(), message: e.to_string() })?;
        if model.feature_names.len() != FEATURE_NAMES.len() {
            return Err(ModelError::Corrupt {
                path: name,
                message: format!("expected {} features, found {}", FEATURE_NAMES.len(), model.feature_names.len()),
            });
        }
        if model.trees.is_empty() {
            return Err(ModelError::Corrupt { path: name, message: "model has no trees".into() });
        }
        for tree in &model.trees {
            tree.check().map_err(|message| ModelError::Corrupt { path: name.clone(), message })?;
        }
        Ok(model)
    }
}

/// Canonical file name for one model inside a model directory.
pub fn model_file_name(kind: LayerKind, target: Target) -> String {
    format!("{kind}_{target}.json")
}

/// The trained models backing an optimization run, keyed by layer kind and
/// target.
#[derive(Debug, Default)]
pub struct ModelSet {
    models: BTreeMap<(LayerKind, Target), ForestModel>,
    origin: String,
}

impl ModelSet {
    pub fn new(origin: impl Into<String>) -> Self {
        ModelSet { models: BTreeMap::new(), origin: origin.into() }
    }

    pub fn insert(&mut self, model: ForestModel) {
        self.models.insert((model.kind, model.target), model);
    }

    pub fn get(&self, kind: LayerKind, target: Target) -> Option<&ForestModel> {
        self.models.get(&(kind, target))
    }

    /// Like [`ModelSet::get`] but failing with the missing pair spelled out.
    pub fn require(&self, kind: LayerKind, target: Target) -> Result<&ForestModel, ModelError> {
        self.models.get(&(kind, target)).ok_or_else(|| ModelError::Missing {
            kind,
            target,
            dir: self.origin.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Loads every `{kind}_{target}.json` that exists under `dir`. Pairs
    /// without a file stay absent and only fail when requested.
    pub fn load_dir(dir: &Path) -> Result<Self, ModelError> {
        let mut set = ModelSet::new(dir.display().to_string());
        for kind in LayerKind::ALL {
            for target in Target::ALL {
                let path = dir.join(model_file_name(kind, target));
                if path.exists() {
                    set.insert(ForestModel::load(&path)?);
                }
            }
        }
        Ok(set)
    }

    /// Writes every model into `dir` under its canonical file name.
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, ModelError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for ((kind, target), model) in &self.models {
            let path = dir.join(model_file_name(*kind, *target));
            model.save(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

//! Shape algebra for the supported layer stack.
//!
//! Networks are a straight pipeline of `conv1d* lstm* dense+` layers. Every
//! layer lowers to one matrix-vector product per sequence step, described by
//! its `n_in` and `n_out` dimensions:
//!
//! * `conv1d`: `n_in = in_channels * kernel`, `n_out = filters`. Convolution
//!   is same-padding with stride 1, so it preserves the sequence length; the
//!   attached max-pool then divides it (floor).
//! * `lstm`: `n_in = in_features`, `n_out = 4 * units` (the four gates share
//!   one fused product). The sequence length passes through unchanged.
//! * `dense`: the first dense layer folds the remaining `seq_len * features`
//!   tensor into `n_in`; from there on the sequence axis is gone.
//!
//! A layer's multipliers can be shared: a reuse factor `r` is legal when it
//! divides `n_in * n_out` evenly, leaving `n_in * n_out / r` physical
//! multipliers (the block factor). Latency grows with `r`, resources shrink.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three supported layer families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv1d,
    Lstm,
    Dense,
}

impl LayerKind {
    pub const ALL: [LayerKind; 3] = [LayerKind::Conv1d, LayerKind::Lstm, LayerKind::Dense];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv1d => "conv1d",
            LayerKind::Lstm => "lstm",
            LayerKind::Dense => "dense",
        }
    }

    /// Pipeline stage used to check layer ordering: conv < lstm < dense.
    fn stage(self) -> u8 {
        match self {
            LayerKind::Conv1d => 0,
            LayerKind::Lstm => 1,
            LayerKind::Dense => 2,
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LayerKind {
    type Err = LayerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conv1d" => Ok(LayerKind::Conv1d),
            "lstm" => Ok(LayerKind::Lstm),
            "dense" => Ok(LayerKind::Dense),
            _ => Err(LayerError::UnknownKind(s.to_string())),
        }
    }
}

fn default_pool() -> u64 {
    2
}

/// One layer of a network, as written in the JSON network document.
///
/// `size` means filters for `conv1d`, units for `lstm`, and neurons for
/// `dense`. Only `conv1d` carries `kernel` and `pool`; `pool` defaults to 2
/// when omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        size: u64,
        kernel: u64,
        #[serde(default = "default_pool")]
        pool: u64,
    },
    Lstm { size: u64 },
    Dense { size: u64 },
}

impl LayerSpec {
    pub fn conv1d(size: u64, kernel: u64, pool: u64) -> Self {
        LayerSpec::Conv1d { size, kernel, pool }
    }

    pub fn lstm(size: u64) -> Self {
        LayerSpec::Lstm { size }
    }

    pub fn dense(size: u64) -> Self {
        LayerSpec::Dense { size }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv1d { .. } => LayerKind::Conv1d,
            LayerSpec::Lstm { .. } => LayerKind::Lstm,
            LayerSpec::Dense { .. } => LayerKind::Dense,
        }
    }

    pub fn size(&self) -> u64 {
        match *self {
            LayerSpec::Conv1d { size, .. } | LayerSpec::Lstm { size } | LayerSpec::Dense { size } => size,
        }
    }

    /// Kernel width for `conv1d` layers, `None` otherwise.
    pub fn kernel(&self) -> Option<u64> {
        match *self {
            LayerSpec::Conv1d { kernel, .. } => Some(kernel),
            _ => None,
        }
    }
}

/// A full network shape: the input tensor plus the layer pipeline.
///
/// Serialized as `{"input_length": .., "input_channels": .., "layers": [..]}`
/// and shared by every CLI subcommand that takes a network document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_length: u64,
    #[serde(default = "default_channels")]
    pub input_channels: u64,
    pub layers: Vec<LayerSpec>,
}

fn default_channels() -> u64 {
    1
}

/// Matrix-vector view of one layer after shape inference.
///
/// `seq_len` is the layer's own sequential trip count: the incoming sequence
/// length for `conv1d` and `lstm`, and 1 for `dense` (the fold has already
/// happened). `in_features`/`out_features` describe the tensor view, while
/// `n_in`/`n_out` describe the fused matrix-vector product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGeometry {
    pub kind: LayerKind,
    pub n_in: u64,
    pub n_out: u64,
    pub seq_len: u64,
    pub in_features: u64,
    pub out_features: u64,
}

/// A validated multiplier reuse factor. Always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReuseFactor(u64);

impl ReuseFactor {
    pub fn new(value: u64) -> Result<Self, LayerError> {
        if value == 0 {
            return Err(LayerError::ZeroReuse);
        }
        Ok(ReuseFactor(value))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for ReuseFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayerError {
    #[error("network has no layers")]
    EmptyNetwork,
    #[error("{field} must be at least 1 (layer {index})")]
    ZeroField { field: &'static str, index: usize },
    #[error("network {field} must be at least 1")]
    ZeroInput { field: &'static str },
    #[error("layer {index} is {found} but follows a {prev} layer; layers must run conv1d*, lstm*, dense+")]
    LayerOrder { index: usize, found: LayerKind, prev: LayerKind },
    #[error("network must end in at least one dense layer")]
    MissingDense,
    #[error("pooling at layer {index} collapses the sequence length to 0")]
    SequenceCollapse { index: usize },
    #[error("layer {index} dimensions overflow u64")]
    Overflow { index: usize },
    #[error("reuse factor must be at least 1")]
    ZeroReuse,
    #[error("reuse factor {reuse} does not divide n_in*n_out = {product}")]
    InvalidReuse { reuse: u64, product: u64 },
    #[error("unknown layer kind {0:?}")]
    UnknownKind(String),
}

impl NetworkSpec {
    pub fn new(input_length: u64, input_channels: u64, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec { input_length, input_channels, layers }
    }

    /// Checks field positivity and the `conv1d* lstm* dense+` stage order.
    pub fn validate(&self) -> Result<(), LayerError> {
        if self.input_length == 0 {
            return Err(LayerError::ZeroInput { field: "input_length" });
        }
        if self.input_channels == 0 {
            return Err(LayerError::ZeroInput { field: "input_channels" });
        }
        if self.layers.is_empty() {
            return Err(LayerError::EmptyNetwork);
        }
        for (index, layer) in self.layers.iter().enumerate() {
            if layer.size() == 0 {
                return Err(LayerError::ZeroField { field: "size", index });
            }
            if let LayerSpec::Conv1d { kernel, pool, .. } = *layer {
                if kernel == 0 {
                    return Err(LayerError::ZeroField { field: "kernel", index });
                }
                if pool == 0 {
                    return Err(LayerError::ZeroField { field: "pool", index });
                }
            }
        }
        for (index, pair) in self.layers.windows(2).enumerate() {
            let (prev, next) = (pair[0].kind(), pair[1].kind());
            if next.stage() < prev.stage() {
                return Err(LayerError::LayerOrder { index: index + 1, found: next, prev });
            }
        }
        match self.layers.last() {
            Some(last) if last.kind() == LayerKind::Dense => Ok(()),
            _ => Err(LayerError::MissingDense),
        }
    }

    /// Walks the pipeline and produces one [`LayerGeometry`] per layer.
    ///
    /// Convolution preserves the sequence length (same padding, stride 1) and
    /// the attached pool divides it with floor; a division that reaches 0 is
    /// rejected. LSTM layers pass the sequence through. The first dense layer
    /// folds `seq_len * features` into its `n_in` and drops the sequence axis.
    pub fn infer_geometry(&self) -> Result<Vec<LayerGeometry>, LayerError> {
        self.validate()?;
        let mut geoms = Vec::with_capacity(self.layers.len());
        let mut len = self.input_length;
        let mut features = self.input_channels;
        for (index, layer) in self.layers.iter().enumerate() {
            let geom = match *layer {
                LayerSpec::Conv1d { size, kernel, pool } => {
                    let n_in = features
                        .checked_mul(kernel)
                        .ok_or(LayerError::Overflow { index })?;
                    let geom = LayerGeometry {
                        kind: LayerKind::Conv1d,
                        n_in,
                        n_out: size,
                        seq_len: len,
                        in_features: features,
                        out_features: size,
                    };
                    len /= pool;
                    if len == 0 {
                        return Err(LayerError::SequenceCollapse { index });
                    }
                    features = size;
                    geom
                }
                LayerSpec::Lstm { size } => {
                    let n_out = size.checked_mul(4).ok_or(LayerError::Overflow { index })?;
                    let geom = LayerGeometry {
                        kind: LayerKind::Lstm,
                        n_in: features,
                        n_out,
                        seq_len: len,
                        in_features: features,
                        out_features: size,
                    };
                    features = size;
                    geom
                }
                LayerSpec::Dense { size } => {
                    let n_in = len
                        .checked_mul(features)
                        .ok_or(LayerError::Overflow { index })?;
                    let geom = LayerGeometry {
                        kind: LayerKind::Dense,
                        n_in,
                        n_out: size,
                        seq_len: 1,
                        in_features: n_in,
                        out_features: size,
                    };
                    len = 1;
                    features = size;
                    geom
                }
            };
            // Make sure every product used downstream (workload, matvec size)
            // fits in u64 so later ops stay total.
            let sized = geom
                .seq_len
                .checked_mul(geom.n_in)
                .and_then(|x| x.checked_mul(geom.n_out))
                .and_then(|x| x.checked_add(geom.n_out.checked_mul(geom.n_out)?));
            if sized.is_none() {
                return Err(LayerError::Overflow { index });
            }
            geoms.push(geom);
        }
        Ok(geoms)
    }

    /// Total multiply count of the network: the sum of per-layer workloads.
    /// Reuse factors only reshape the schedule, never the multiply count.
    pub fn workload(&self) -> Result<u64, LayerError> {
        let geoms = self.infer_geometry()?;
        Ok(geoms
            .iter()
            .zip(&self.layers)
            .map(|(geom, spec)| geom.workload(spec))
            .sum())
    }
}

impl LayerGeometry {
    /// Size of the fused matrix-vector product, `n_in * n_out`. Reuse factors
    /// must divide this evenly.
    pub fn matvec(&self) -> u64 {
        self.n_in * self.n_out
    }

    /// Number of multiplies the layer performs per inference:
    ///
    /// * `conv1d`: `seq * kernel * in_features * filters`
    /// * `lstm`: `(seq * in_features + units) * 4 * units`
    /// * `dense`: `in_features * neurons`
    ///
    /// Panics if `spec` is not the layer this geometry was inferred from;
    /// geometries from [`NetworkSpec::infer_geometry`] are pre-sized so the
    /// arithmetic itself cannot overflow.
    pub fn workload(&self, spec: &LayerSpec) -> u64 {
        assert_eq!(self.kind, spec.kind(), "geometry paired with a different layer");
        match *spec {
            LayerSpec::Conv1d { size, kernel, .. } => {
                self.seq_len * kernel * self.in_features * size
            }
            LayerSpec::Lstm { size } => (self.seq_len * self.in_features + size) * 4 * size,
            LayerSpec::Dense { size } => self.in_features * size,
        }
    }

    /// Physical multipliers left after sharing by `reuse`: `matvec / reuse`.
    /// Errors when `reuse` does not divide `n_in * n_out`.
    pub fn block_factor(&self, reuse: ReuseFactor) -> Result<u64, LayerError> {
        let product = self.matvec();
        let r = reuse.get();
        if product % r != 0 {
            return Err(LayerError::InvalidReuse { reuse: r, product });
        }
        Ok(product / r)
    }

    /// Every legal reuse factor for this layer: all divisors of
    /// `n_in * n_out`, ascending. Never empty (1 always divides).
    pub fn valid_reuse_factors(&self) -> Vec<ReuseFactor> {
        divisors_ascending(self.matvec())
            .into_iter()
            .map(ReuseFactor)
            .collect()
    }

    /// Rounds a requested reuse factor down to the nearest legal one. Every
    /// layer admits 1, so the result is always defined; a raw value of 0 is
    /// treated as 1. Idempotent on already-legal values.
    pub fn correct_reuse_factor(&self, raw: u64) -> ReuseFactor {
        let raw = raw.max(1);
        let product = self.matvec();
        if product % raw == 0 {
            return ReuseFactor(raw);
        }
        let mut best = 1;
        let mut d = 1;
        while d * d <= product {
            if product % d == 0 {
                if d <= raw && d > best {
                    best = d;
                }
                let high = product / d;
                if high <= raw && high > best {
                    best = high;
                }
            }
            d += 1;
        }
        ReuseFactor(best)
    }
}

/// All divisors of `n`, ascending. `n` must be at least 1.
fn divisors_ascending(n: u64) -> Vec<u64> {
    debug_assert!(n >= 1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

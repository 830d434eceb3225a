//! Cost modeling and deployment optimization for dataflow neural-network
//! accelerators.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`layer`] describes network shapes and the arithmetic footprint of each
//!   layer (matrix-vector dimensions, multiply counts, legal reuse factors).
//! * [`data`] holds training observations, reads and writes the observation
//!   CSV format, and can synthesize a labeled corpus from analytic forms.
//! * [`forest`] trains per-layer-kind regression forests that map layer
//!   features to resource usage (LUT, FF, BRAM, DSP) and latency cycles.
//! * [`metrics`] scores model quality on held-out observations.
//! * [`solve`] assigns a reuse factor to every layer of a network so that
//!   total predicted latency meets a hard cycle budget while minimizing a
//!   weighted resource cost, exactly or with randomized baselines.
//! * [`nas`] samples network shapes from a search space and maintains a
//!   Pareto archive over (evaluation objective, multiply workload).

pub mod data;
pub mod forest;
pub mod layer;
pub mod metrics;
pub mod nas;
pub mod solve;

pub(crate) mod util;

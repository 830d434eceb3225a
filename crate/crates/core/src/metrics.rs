//! Quality metrics for trained models on held-out observations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ObservationSet;
use crate::forest::{ForestModel, ModelError};

/// Regression quality on one holdout slice.
///
/// `mape_pct` averages `100 * |pred - truth| / truth` over points whose truth
/// is nonzero; `n_mape_excluded` counts the points skipped. `rmse_pct`
/// normalizes the RMSE by the holdout's value range, which must be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r2: f64,
    pub mape_pct: f64,
    pub rmse_pct: f64,
    pub value_range: (f64, f64),
    pub n_points: usize,
    pub n_mape_excluded: usize,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no holdout observations to evaluate on")]
    EmptyHoldout,
    #[error("truth and prediction lengths differ ({truth} vs {pred})")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("holdout target range is zero; rmse%% and r2 are undefined")]
    ZeroRange,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Computes [`MetricsReport`] from parallel truth/prediction slices.
pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<MetricsReport, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyHoldout);
    }
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    let n = truth.len() as f64;
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo == 0.0 {
        return Err(MetricsError::ZeroRange);
    }

    let mean = truth.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut mape_sum = 0.0;
    let mut mape_n = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        ss_res += (t - p) * (t - p);
        ss_tot += (t - mean) * (t - mean);
        if t != 0.0 {
            mape_sum += 100.0 * (p - t).abs() / t.abs();
            mape_n += 1;
        }
    }

    Ok(MetricsReport {
        r2: 1.0 - ss_res / ss_tot,
        mape_pct: if mape_n == 0 { 0.0 } else { mape_sum / mape_n as f64 },
        rmse_pct: 100.0 * (ss_res / n).sqrt() / (hi - lo),
        value_range: (lo, hi),
        n_points: truth.len(),
        n_mape_excluded: truth.len() - mape_n,
    })
}

/// Scores `model` on the holdout observations of its own layer kind.
pub fn evaluate(model: &ForestModel, holdout: &ObservationSet) -> Result<MetricsReport, MetricsError> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for obs in holdout.of_kind(model.kind) {
        truth.push(obs.targets.get(model.target));
        pred.push(model.predict(&obs.features())?);
    }
    regression_metrics(&truth, &pred)
}

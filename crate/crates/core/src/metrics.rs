//! Error metrics and reporting statistics: RMSE, MAE, peak-restricted
//! variants, relative improvement and parameter spread.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};
use crate::params::{ParameterVector, PARAM_COUNT};
use crate::series::{ObservationStore, StationSeries};

/// Default quantile for peak-restricted metrics.
pub const DEFAULT_PEAK_QUANTILE: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMetric {
    Rmse,
    Mae,
}

impl BaseMetric {
    pub fn name(&self) -> &'static str {
        match self {
            BaseMetric::Rmse => "rmse",
            BaseMetric::Mae => "mae",
        }
    }
}

fn check_aligned(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(WavecalError::Shape(format!(
            "series length mismatch: {} vs {}",
            pred.len(),
            obs.len()
        )));
    }
    if pred.is_empty() {
        return Err(WavecalError::Shape("empty series".into()));
    }
    Ok(())
}

/// Root mean square error, meters.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_aligned(pred, obs)?;
    let sum: f64 = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Mean absolute error, meters.
pub fn mae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_aligned(pred, obs)?;
    let sum: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / pred.len() as f64)
}

pub fn metric(which: BaseMetric, pred: &[f64], obs: &[f64]) -> Result<f64> {
    match which {
        BaseMetric::Rmse => rmse(pred, obs),
        BaseMetric::Mae => mae(pred, obs),
    }
}

/// Empirical quantile by rank: the (floor(q * n) + 1)-th smallest value.
/// For q < 1 the restriction `x >= quantile` is never empty.
pub fn quantile_by_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(WavecalError::Shape("quantile of empty series".into()));
    }
    if !(0.0 < q && q < 1.0) {
        return Err(WavecalError::Config(format!(
            "quantile {q} must lie in (0, 1)"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    Ok(sorted[rank])
}

/// Base metric restricted to the time steps where the observed value
/// reaches its empirical q-quantile.
pub fn peak_metric(pred: &[f64], obs: &[f64], q: f64, which: BaseMetric) -> Result<f64> {
    check_aligned(pred, obs)?;
    let threshold = quantile_by_rank(obs, q)?;
    let (p_sel, o_sel): (Vec<f64>, Vec<f64>) = pred
        .iter()
        .zip(obs)
        .filter(|(_, o)| **o >= threshold)
        .map(|(p, o)| (*p, *o))
        .unzip();
    metric(which, &p_sel, &o_sel)
}

/// Relative improvement in percent against the default-configuration
/// error. Negative when the candidate is worse.
pub fn improvement(err_candidate: f64, err_default: f64) -> Result<f64> {
    if err_default <= 0.0 {
        return Err(WavecalError::Config(format!(
            "improvement undefined for baseline error {err_default}"
        )));
    }
    Ok(100.0 * (err_default - err_candidate) / err_default)
}

/// Mean relative standard deviation of the calibrated parameters across
/// repeated runs, in percent. Parameters with zero mean are excluded.
pub fn parameter_sd(genotypes: &[ParameterVector]) -> Result<f64> {
    if genotypes.len() < 2 {
        return Err(WavecalError::Config(
            "parameter SD needs at least 2 runs".into(),
        ));
    }
    let n = genotypes.len() as f64;
    let mut terms = Vec::with_capacity(PARAM_COUNT);
    for dim in 0..PARAM_COUNT {
        let vals: Vec<f64> = genotypes.iter().map(|g| g.as_array()[dim]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        if mean == 0.0 {
            eprintln!("warning: parameter {dim} has zero mean, excluded from parameter SD");
            continue;
        }
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        terms.push(100.0 * var.sqrt() / mean.abs());
    }
    if terms.is_empty() {
        return Err(WavecalError::Config(
            "all parameters have zero mean; parameter SD undefined".into(),
        ));
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Concatenated residual vectors of simulated vs observed series over
/// the named points; the pooled metric is the metric of this
/// concatenation. Simulated series must be time-aligned with the
/// observations.
pub fn pooled_residual_pairs(
    sim: &[StationSeries],
    obs: &ObservationStore,
    point_ids: &[String],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for id in point_ids {
        let s = sim
            .iter()
            .find(|s| &s.station == id)
            .ok_or_else(|| WavecalError::Config(format!("no simulated series for {id}")))?;
        let o = obs.get(id)?;
        if s.times != o.times {
            return Err(WavecalError::Shape(format!(
                "station {id}: simulated and observed time axes differ"
            )));
        }
        pred.extend_from_slice(&s.hs);
        truth.extend_from_slice(&o.hs);
    }
    Ok((pred, truth))
}

/// Pooled (RMSE, MAE) of simulated output against observations over the
/// given calibration or validation points.
pub fn pooled_objectives(
    sim: &[StationSeries],
    obs: &ObservationStore,
    point_ids: &[String],
) -> Result<(f64, f64)> {
    let (pred, truth) = pooled_residual_pairs(sim, obs, point_ids)?;
    Ok((rmse(&pred, &truth)?, mae(&pred, &truth)?))
}

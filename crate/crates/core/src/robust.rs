//! Robust ensemble-based fitness: evaluate each genotype on the
//! perturbed-forcing ensemble, keep the best members by mean objective
//! and aggregate them into one robust objective vector.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};
use crate::metrics::pooled_objectives;
use crate::model::ModelAdapter;
use crate::noise::{suppress_calm_series, ForcingEnsemble, DEFAULT_CALM_OVERSHOOT, DEFAULT_CALM_THRESHOLD};
use crate::params::{ParameterBounds, ParameterVector};
use crate::series::ObservationStore;
use crate::spea2::{run_evolution, EvolutionConfig, ObjectiveVector, RunResult};
use crate::wind::WindField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Mean,
    /// Mean plus weighted standard deviation. Kept behind a flag: it
    /// favors low-drag solutions with near-zero wind-induced
    /// variability, so it is not the default.
    MeanVariance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Number of best ensemble members retained; defaults to
    /// ceil(n / 2) when unset.
    pub ens_amount: Option<usize>,
    pub aggregator: Aggregator,
    /// Standard-deviation weight, used only by the mean-variance
    /// aggregator.
    pub variance_weight: f64,
    /// Calm suppression of perturbed model output, applied before
    /// objective computation.
    pub calm_threshold: f64,
    pub calm_overshoot: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            ens_amount: None,
            aggregator: Aggregator::Mean,
            variance_weight: 1.0,
            calm_threshold: DEFAULT_CALM_THRESHOLD,
            calm_overshoot: DEFAULT_CALM_OVERSHOOT,
        }
    }
}

impl RobustConfig {
    pub fn effective_ens_amount(&self, ensemble_size: usize) -> usize {
        self.ens_amount.unwrap_or(ensemble_size.div_ceil(2))
    }
}

/// Objectives of one genotype on the full ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleEvaluation {
    pub genotype: ParameterVector,
    pub per_member: Vec<ObjectiveVector>,
    pub aggregated: ObjectiveVector,
    pub selected: Vec<usize>,
}

/// One (RMSE, MAE) objective vector per ensemble member, in member
/// order. The perturbed output of each member is calm-suppressed
/// against the base-forcing output of the same genotype.
pub fn evaluate_on_ensemble(
    theta: &ParameterVector,
    ensemble: &ForcingEnsemble,
    model: &dyn ModelAdapter,
    observations: &ObservationStore,
    points: &[String],
    config: &RobustConfig,
) -> Result<Vec<ObjectiveVector>> {
    let base_out = model.evaluate(theta, &ensemble.base)?;
    ensemble
        .members
        .iter()
        .enumerate()
        .map(|(k, member)| {
            let run = || -> Result<ObjectiveVector> {
                let mut out = model.evaluate(theta, member)?;
                for series in out.iter_mut() {
                    let base = base_out
                        .iter()
                        .find(|b| b.station == series.station)
                        .ok_or_else(|| {
                            WavecalError::Shape(format!(
                                "base run lacks station {}",
                                series.station
                            ))
                        })?;
                    suppress_calm_series(
                        series,
                        base,
                        config.calm_threshold,
                        config.calm_overshoot,
                    )?;
                }
                let (rmse, mae) = pooled_objectives(&out, observations, points)?;
                Ok(vec![rmse, mae])
            };
            run().map_err(|e| {
                WavecalError::Run {
                    genotype: theta.as_array(),
                    message: format!("ensemble member {k}: {e}"),
                }
            })
        })
        .collect()
}

/// Indices of the `ens_amount` members with the smallest arithmetic
/// mean across objective coordinates, ties broken by member index,
/// returned in original member order.
pub fn take_best_by_mean(objs: &[ObjectiveVector], ens_amount: usize) -> Result<Vec<usize>> {
    if ens_amount == 0 || ens_amount > objs.len() {
        return Err(WavecalError::Config(format!(
            "ens_amount {ens_amount} out of range 1..={}",
            objs.len()
        )));
    }
    let mut order: Vec<usize> = (0..objs.len()).collect();
    let mean = |v: &ObjectiveVector| v.iter().sum::<f64>() / v.len() as f64;
    order.sort_by(|&a, &b| {
        mean(&objs[a])
            .partial_cmp(&mean(&objs[b]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(ens_amount).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Collapse the selected member objectives into one vector. Identical
/// inputs aggregate to themselves exactly.
pub fn aggregate(selected: &[ObjectiveVector], config: &RobustConfig) -> Result<ObjectiveVector> {
    let first = selected
        .first()
        .ok_or_else(|| WavecalError::Config("aggregate over empty selection".into()))?;
    if selected.iter().all(|v| v == first) {
        return Ok(first.clone());
    }
    let n = selected.len() as f64;
    let dims = first.len();
    let mean: Vec<f64> = (0..dims)
        .map(|d| selected.iter().map(|v| v[d]).sum::<f64>() / n)
        .collect();
    match config.aggregator {
        Aggregator::Mean => Ok(mean),
        Aggregator::MeanVariance => {
            if config.variance_weight == 0.0 {
                return Ok(mean);
            }
            Ok((0..dims)
                .map(|d| {
                    let var = selected
                        .iter()
                        .map(|v| (v[d] - mean[d]) * (v[d] - mean[d]))
                        .sum::<f64>()
                        / n;
                    mean[d] + config.variance_weight * var.sqrt()
                })
                .collect())
        }
    }
}

/// Full robust objective of one genotype.
pub fn robust_objectives(
    theta: &ParameterVector,
    ensemble: &ForcingEnsemble,
    model: &dyn ModelAdapter,
    observations: &ObservationStore,
    points: &[String],
    config: &RobustConfig,
) -> Result<EnsembleEvaluation> {
    let per_member = evaluate_on_ensemble(theta, ensemble, model, observations, points, config)?;
    let selected = take_best_by_mean(
        &per_member,
        config.effective_ens_amount(per_member.len()),
    )?;
    let chosen: Vec<ObjectiveVector> = selected.iter().map(|&k| per_member[k].clone()).collect();
    let aggregated = aggregate(&chosen, config)?;
    Ok(EnsembleEvaluation {
        genotype: *theta,
        per_member,
        aggregated,
        selected,
    })
}

type EvalLog = Mutex<HashMap<[u64; 3], EnsembleEvaluation>>;

fn genotype_key(p: &ParameterVector) -> [u64; 3] {
    [p.drg.to_bits(), p.cfw.to_bits(), p.stpm.to_bits()]
}

/// Baseline calibration: single-forcing objectives, the same evolution
/// loop as the robust variant.
pub fn run_baseline(
    model: &dyn ModelAdapter,
    forcing: &WindField,
    observations: &ObservationStore,
    points: &[String],
    bounds: &ParameterBounds,
    evo: &EvolutionConfig,
) -> Result<RunResult> {
    run_evolution(
        |theta| {
            let out = model.evaluate(theta, forcing)?;
            let (rmse, mae) = pooled_objectives(&out, observations, points)?;
            Ok(vec![rmse, mae])
        },
        bounds,
        evo,
    )
}

/// Robust calibration: the same loop as [`run_baseline`] with the
/// objective evaluation replaced by ensemble evaluation, best-by-mean
/// trimming and aggregation. Objectives are cached per genotype since
/// the ensemble is fixed for the whole run.
pub fn run_rebec(
    ensemble: &ForcingEnsemble,
    model: &dyn ModelAdapter,
    observations: &ObservationStore,
    points: &[String],
    bounds: &ParameterBounds,
    evo: &EvolutionConfig,
    robust: &RobustConfig,
) -> Result<(RunResult, Vec<EnsembleEvaluation>)> {
    let log: EvalLog = Mutex::new(HashMap::new());
    let result = run_evolution(
        |theta| {
            let key = genotype_key(theta);
            if let Some(eval) = log.lock().unwrap().get(&key) {
                return Ok(eval.aggregated.clone());
            }
            let eval = robust_objectives(theta, ensemble, model, observations, points, robust)?;
            let aggregated = eval.aggregated.clone();
            log.lock().unwrap().insert(key, eval);
            Ok(aggregated)
        },
        bounds,
        evo,
    )?;
    let mut evals: Vec<EnsembleEvaluation> =
        log.into_inner().unwrap().into_values().collect();
    evals.sort_by(|a, b| genotype_key(&a.genotype).cmp(&genotype_key(&b.genotype)));
    Ok((result, evals))
}

/// Per-evaluation audit CSV:
/// `generation,individual,member,obj_rmse,obj_mae,selected`. Each
/// genotype is reported at its first appearance in the history.
pub fn audit_to_csv(result: &RunResult, evals: &[EnsembleEvaluation]) -> String {
    let by_key: HashMap<[u64; 3], &EnsembleEvaluation> = evals
        .iter()
        .map(|e| (genotype_key(&e.genotype), e))
        .collect();
    let mut seen: Vec<[u64; 3]> = Vec::new();
    let mut out = String::from("generation,individual,member,obj_rmse,obj_mae,selected\n");
    for rec in &result.history {
        for entry in &rec.entries {
            let key = genotype_key(&entry.genotype);
            if seen.contains(&key) {
                continue;
            }
            if let Some(eval) = by_key.get(&key) {
                seen.push(key);
                for (k, objs) in eval.per_member.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        rec.generation,
                        entry.individual,
                        k,
                        objs[0],
                        objs[1],
                        eval.selected.contains(&k) as u8
                    );
                }
            }
        }
    }
    out
}

//! End-to-end experiment driver: synthetic-truth generation, repeated
//! baseline-vs-robust comparisons over the scenario suite, sensitivity
//! analysis and objective-surface scans.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};
use crate::metrics::{self, improvement, parameter_sd, BaseMetric, DEFAULT_PEAK_QUANTILE};
use crate::model::{ModelAdapter, SurrogateModel};
use crate::noise::{generate_ensemble, DEFAULT_SOURCE_SPACING};
use crate::params::{clamp, ParameterBounds, ParameterVector, PARAM_NAMES};
use crate::robust::{run_baseline, run_rebec, RobustConfig};
use crate::scenario::{Scenario, ScenarioGroup};
use crate::series::ObservationStore;
use crate::spea2::{EvolutionConfig, Individual};
use crate::util::mix_seed;
use crate::wind::WindField;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub members: usize,
    pub spacing: usize,
    /// Magnitude of the simulated reanalysis error, i.e. of the
    /// discrepancy between the forcing the algorithms see and the
    /// forcing behind the observations. Defaults to `sigma`.
    pub reanalysis_sigma: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.25,
            members: 10,
            spacing: DEFAULT_SOURCE_SPACING,
            reanalysis_sigma: None,
        }
    }
}

/// Top-level experiment configuration, read from a single JSON file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub wind_path: String,
    pub bathy_path: String,
    pub stations_path: String,
    pub observations_path: String,
    pub bounds: ParameterBounds,
    pub evolution: EvolutionConfig,
    pub robust: RobustConfig,
    pub noise: NoiseConfig,
    /// Repeated calibrations per scenario and algorithm.
    pub repeats: usize,
    pub master_seed: u64,
    pub peak_quantile: f64,
}

impl ExperimentConfig {
    pub fn desk_default() -> Self {
        Self {
            repeats: 20,
            peak_quantile: DEFAULT_PEAK_QUANTILE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(WavecalError::Config("repeats must be >= 1".into()));
        }
        if self.noise.members == 0 {
            return Err(WavecalError::Config("noise.members must be >= 1".into()));
        }
        self.bounds.validate()?;
        self.evolution.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Baseline,
    Rebec,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Baseline => "baseline",
            Algorithm::Rebec => "rebec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    Rmse,
    Mae,
    PeakRmse,
    PeakMae,
}

pub const ALL_METRICS: [MetricKind; 4] = [
    MetricKind::Rmse,
    MetricKind::Mae,
    MetricKind::PeakRmse,
    MetricKind::PeakMae,
];

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::Mae => "mae",
            MetricKind::PeakRmse => "peak_rmse",
            MetricKind::PeakMae => "peak_mae",
        }
    }

    fn base(&self) -> BaseMetric {
        match self {
            MetricKind::Rmse | MetricKind::PeakRmse => BaseMetric::Rmse,
            MetricKind::Mae | MetricKind::PeakMae => BaseMetric::Mae,
        }
    }

    fn is_peak(&self) -> bool {
        matches!(self, MetricKind::PeakRmse | MetricKind::PeakMae)
    }
}

/// Pooled metric over stations: residuals concatenated across points,
/// peak variants restricted per station to the upper observation
/// quantile before pooling.
pub fn pooled_metric(
    sim: &[crate::series::StationSeries],
    obs: &ObservationStore,
    points: &[String],
    kind: MetricKind,
    peak_quantile: f64,
) -> Result<f64> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for id in points {
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
        if kind.is_peak() {
            let threshold = metrics::quantile_by_rank(&o.hs, peak_quantile)?;
            for (p, ob) in s.hs.iter().zip(&o.hs) {
                if *ob >= threshold {
                    pred.push(*p);
                    truth.push(*ob);
                }
            }
        } else {
            pred.extend_from_slice(&s.hs);
            truth.extend_from_slice(&o.hs);
        }
    }
    metrics::metric(kind.base(), &pred, &truth)
}

/// Generate synthetic observations: the surrogate at `theta_star` on
/// the unperturbed wind, plus optional Gaussian observation noise.
pub fn make_truth(
    theta_star: &ParameterVector,
    model: &SurrogateModel,
    wind: &WindField,
    obs_noise_sd: f64,
    seed: u64,
) -> Result<ObservationStore> {
    let mut series = model.evaluate(theta_star, wind)?;
    if obs_noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x6f6273]));
        for s in series.iter_mut() {
            for h in s.hs.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *h = (*h + z * obs_noise_sd).max(0.0);
            }
        }
    }
    Ok(ObservationStore::from_series(series))
}

/// Pick one solution from a final archive: smallest mean of calibration
/// objectives, ties broken by RMSE then by archive index.
pub fn best_individual(archive: &[Individual]) -> &Individual {
    archive
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            let ma = a.objectives.iter().sum::<f64>() / a.objectives.len() as f64;
            let mb = b.objectives.iter().sum::<f64>() / b.objectives.len() as f64;
            ma.partial_cmp(&mb)
                .unwrap()
                .then(a.objectives[0].partial_cmp(&b.objectives[0]).unwrap())
                .then(ia.cmp(ib))
        })
        .map(|(_, ind)| ind)
        .expect("non-empty archive")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PointSet {
    Calibration,
    Validation,
}

impl PointSet {
    pub fn label(&self) -> &'static str {
        match self {
            PointSet::Calibration => "calibration",
            PointSet::Validation => "validation",
        }
    }
}

/// One metric cell of one calibration run.
#[derive(Debug, Clone)]
pub struct RunMetric {
    pub set: PointSet,
    pub metric: MetricKind,
    pub err: f64,
    pub err_default: f64,
    pub improvement_pct: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scenario_id: usize,
    pub group: ScenarioGroup,
    pub algorithm: Algorithm,
    pub repeat: usize,
    pub genotype: ParameterVector,
    pub calibration_rmse: f64,
    pub metrics: Vec<RunMetric>,
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub scenario_group: String,
    pub algorithm: Algorithm,
    pub set: PointSet,
    pub metric: MetricKind,
    pub mean_improvement: f64,
    pub max_improvement: f64,
    pub sd_improvement: f64,
    pub param_sd: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<RunRecord>,
    pub reports: Vec<ReportRow>,
    pub failures: usize,
}

/// The forcing the calibration algorithms see for one repeat: the base
/// wind when sigma is zero, otherwise one noise realization standing in
/// for reanalysis error. Shared between the two algorithms so the
/// comparison is paired.
fn calibration_forcing(
    base: &WindField,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<WindField> {
    let sigma = noise.reanalysis_sigma.unwrap_or(noise.sigma);
    if sigma == 0.0 {
        return Ok(base.clone());
    }
    let ens = generate_ensemble(base, 1, sigma, noise.spacing, seed)?;
    Ok(ens.members.into_iter().next().unwrap())
}

fn single_run(
    model: &SurrogateModel,
    base_wind: &WindField,
    observations: &ObservationStore,
    scenario: &Scenario,
    algorithm: Algorithm,
    repeat: usize,
    config: &ExperimentConfig,
    defaults: &BTreeMap<(usize, PointSet, MetricKind), f64>,
) -> Result<RunRecord> {
    let forcing_seed = mix_seed(config.master_seed, &[0xf0, scenario.id as u64, repeat as u64]);
    let forcing = calibration_forcing(base_wind, &config.noise, forcing_seed)?;

    let evo = EvolutionConfig {
        seed: mix_seed(
            config.master_seed,
            &[0xe0, scenario.id as u64, repeat as u64],
        ),
        ..config.evolution.clone()
    };
    let calibration_model = model.with_stations(&scenario.calibration)?;

    let archive = match algorithm {
        Algorithm::Baseline => {
            run_baseline(
                &calibration_model,
                &forcing,
                observations,
                &scenario.calibration,
                &config.bounds,
                &evo,
            )?
            .archive
        }
        Algorithm::Rebec => {
            let ensemble = generate_ensemble(
                &forcing,
                config.noise.members,
                config.noise.sigma,
                config.noise.spacing,
                mix_seed(
                    config.master_seed,
                    &[0xe5, scenario.id as u64, repeat as u64],
                ),
            )?;
            run_rebec(
                &ensemble,
                &calibration_model,
                observations,
                &scenario.calibration,
                &config.bounds,
                &evo,
                &config.robust,
            )?
            .0
            .archive
        }
    };

    let best = best_individual(&archive);
    // Final assessment on the unperturbed forcing.
    let sim = model.evaluate(&best.genotype, base_wind)?;
    let mut run_metrics = Vec::new();
    for set in [PointSet::Calibration, PointSet::Validation] {
        let points = match set {
            PointSet::Calibration => &scenario.calibration,
            PointSet::Validation => &scenario.validation,
        };
        for metric in ALL_METRICS {
            let err = pooled_metric(&sim, observations, points, metric, config.peak_quantile)?;
            let err_default = defaults[&(scenario.id, set, metric)];
            run_metrics.push(RunMetric {
                set,
                metric,
                err,
                err_default,
                improvement_pct: improvement(err, err_default)?,
            });
        }
    }
    let calibration_rmse = pooled_metric(
        &sim,
        observations,
        &scenario.calibration,
        MetricKind::Rmse,
        config.peak_quantile,
    )?;
    Ok(RunRecord {
        scenario_id: scenario.id,
        group: scenario.group,
        algorithm,
        repeat,
        genotype: best.genotype,
        calibration_rmse,
        metrics: run_metrics,
    })
}

/// Run the full scenario-by-repeat-by-algorithm comparison. Jobs are
/// independent and scheduled onto a bounded worker pool; the report is
/// a final single-threaded pass, so the output depends only on the
/// configuration, not on the worker count.
pub fn run_experiment(
    model: &SurrogateModel,
    base_wind: &WindField,
    observations: &ObservationStore,
    scenarios: &[Scenario],
    config: &ExperimentConfig,
    jobs: Option<usize>,
) -> Result<ExperimentOutput> {
    config.validate()?;

    // Default-configuration errors per scenario, set and metric.
    let default_sim = model.evaluate(&ParameterVector::default_configuration(), base_wind)?;
    let mut defaults = BTreeMap::new();
    for scenario in scenarios {
        for set in [PointSet::Calibration, PointSet::Validation] {
            let points = match set {
                PointSet::Calibration => &scenario.calibration,
                PointSet::Validation => &scenario.validation,
            };
            for metric in ALL_METRICS {
                let err = pooled_metric(
                    &default_sim,
                    observations,
                    points,
                    metric,
                    config.peak_quantile,
                )?;
                defaults.insert((scenario.id, set, metric), err);
            }
        }
    }

    let mut job_list = Vec::new();
    for scenario in scenarios {
        for algorithm in [Algorithm::Baseline, Algorithm::Rebec] {
            for repeat in 0..config.repeats {
                job_list.push((scenario, algorithm, repeat));
            }
        }
    }

    let execute = || {
        job_list
            .par_iter()
            .map(|(scenario, algorithm, repeat)| {
                single_run(
                    model,
                    base_wind,
                    observations,
                    scenario,
                    *algorithm,
                    *repeat,
                    config,
                    &defaults,
                )
            })
            .collect::<Vec<Result<RunRecord>>>()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| WavecalError::Config(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let total = results.len();
    let mut runs = Vec::new();
    let mut failures = 0usize;
    for r in results {
        match r {
            Ok(rec) => runs.push(rec),
            Err(e) => {
                failures += 1;
                eprintln!("warning: run failed and was excluded: {e}");
            }
        }
    }
    if failures * 5 > total {
        return Err(WavecalError::Run {
            genotype: [f64::NAN; 3],
            message: format!("{failures} of {total} runs failed (> 20%)"),
        });
    }

    let reports = aggregate_reports(&runs);
    Ok(ExperimentOutput {
        runs,
        reports,
        failures,
    })
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Aggregate raw runs into the per-group report rows. Public so the
/// emitted raw CSV can be independently re-aggregated in tests.
pub fn aggregate_reports(runs: &[RunRecord]) -> Vec<ReportRow> {
    let groups: [(&str, Option<ScenarioGroup>); 4] = [
        ("singleton", Some(ScenarioGroup::Singleton)),
        ("mid", Some(ScenarioGroup::Mid)),
        ("large", Some(ScenarioGroup::Large)),
        ("all", None),
    ];
    let mut rows = Vec::new();
    for (label, group) in groups {
        for algorithm in [Algorithm::Baseline, Algorithm::Rebec] {
            let selected: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.algorithm == algorithm && group.is_none_or(|g| r.group == g))
                .collect();
            if selected.is_empty() {
                continue;
            }
            let genotypes: Vec<ParameterVector> =
                selected.iter().map(|r| r.genotype).collect();
            let param_sd = if genotypes.len() >= 2 {
                parameter_sd(&genotypes).unwrap_or(f64::NAN)
            } else {
                0.0
            };
            for set in [PointSet::Calibration, PointSet::Validation] {
                for metric in ALL_METRICS {
                    let improvements: Vec<f64> = selected
                        .iter()
                        .flat_map(|r| {
                            r.metrics
                                .iter()
                                .filter(|m| m.set == set && m.metric == metric)
                                .map(|m| m.improvement_pct)
                        })
                        .collect();
                    let n = improvements.len() as f64;
                    rows.push(ReportRow {
                        scenario_group: label.to_string(),
                        algorithm,
                        set,
                        metric,
                        mean_improvement: improvements.iter().sum::<f64>() / n,
                        max_improvement: improvements
                            .iter()
                            .copied()
                            .fold(f64::NEG_INFINITY, f64::max),
                        sd_improvement: sample_sd(&improvements),
                        param_sd,
                    });
                }
            }
        }
    }
    rows
}

/// Raw per-run CSV; the report is recomputable from these rows.
pub fn runs_to_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from(
        "scenario,group,algorithm,repeat,drg,cfw,stpm,set,metric,err,err_default,improvement\n",
    );
    for r in runs {
        for m in &r.metrics {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario_id,
                r.group.label(),
                r.algorithm.label(),
                r.repeat,
                r.genotype.drg,
                r.genotype.cfw,
                r.genotype.stpm,
                m.set.label(),
                m.metric.name(),
                m.err,
                m.err_default,
                m.improvement_pct
            );
        }
    }
    out
}

/// One report CSV per metric, 16 rows each for the reference layout:
/// 4 scenario groups (including "all") x 2 algorithms x 2 sets.
pub fn report_to_csv(reports: &[ReportRow], metric: MetricKind) -> String {
    let mut out = String::from(
        "scenario_group,algorithm,set,metric,mean_improvement,max_improvement,sd_improvement,param_sd\n",
    );
    for row in reports.iter().filter(|r| r.metric == metric) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.scenario_group,
            row.algorithm.label(),
            row.set.label(),
            row.metric.name(),
            row.mean_improvement,
            row.max_improvement,
            row.sd_improvement,
            row.param_sd
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct SensitivityRow {
    pub param: &'static str,
    pub run: usize,
    /// Relative change of the perturbed parameter against its base value.
    pub rel_input: f64,
    /// Pooled RMSE of the perturbed output against the base output,
    /// relative to the mean base wave height.
    pub rel_rmse: f64,
}

/// One-at-a-time sensitivity analysis: perturb a single parameter with
/// additive Gaussian noise (sigma = rel_sd x |base value|), clamp to
/// bounds and measure the relative output change of the surrogate.
pub fn run_sensitivity(
    model: &SurrogateModel,
    wind: &WindField,
    param_dim: usize,
    n_runs: usize,
    rel_sd: f64,
    base_theta: &ParameterVector,
    bounds: &ParameterBounds,
    seed: u64,
) -> Result<Vec<SensitivityRow>> {
    if n_runs < 2 {
        return Err(WavecalError::Config("sensitivity needs n >= 2 runs".into()));
    }
    if param_dim >= PARAM_NAMES.len() {
        return Err(WavecalError::Config(format!(
            "unknown parameter dimension {param_dim}"
        )));
    }
    let base_out = model.evaluate(base_theta, wind)?;
    let base_mean = {
        let all: Vec<f64> = base_out.iter().flat_map(|s| s.hs.iter().copied()).collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    if base_mean <= 0.0 {
        return Err(WavecalError::Config(
            "base output is zero; relative sensitivity undefined".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x73656e73, param_dim as u64]));
    let base_arr = base_theta.as_array();
    let mut rows = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let z: f64 = rng.sample(StandardNormal);
        let mut arr = base_arr;
        arr[param_dim] += z * rel_sd * base_arr[param_dim].abs();
        let theta = clamp(&ParameterVector::from_array(arr), bounds);
        let out = model.evaluate(&theta, wind)?;
        let mut pred = Vec::new();
        let mut reference = Vec::new();
        for (s, b) in out.iter().zip(&base_out) {
            pred.extend_from_slice(&s.hs);
            reference.extend_from_slice(&b.hs);
        }
        let rmse = metrics::rmse(&pred, &reference)?;
        rows.push(SensitivityRow {
            param: PARAM_NAMES[param_dim],
            run,
            rel_input: (theta.as_array()[param_dim] - base_arr[param_dim])
                / base_arr[param_dim],
            rel_rmse: rmse / base_mean,
        });
    }
    Ok(rows)
}

pub fn sensitivity_to_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from("param,run,rel_input,rel_rmse\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.param, r.run, r.rel_input, r.rel_rmse);
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// A dense scan of the pooled RMSE over two parameters, third fixed.
#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub x_dim: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub x_steps: usize,
    pub y_dim: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub y_steps: usize,
    pub base: ParameterVector,
}

#[derive(Debug, Clone)]
pub struct SurfaceRow {
    pub theta: ParameterVector,
    pub member: usize,
    pub rmse_pooled: f64,
}

fn axis_values(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Scan the objective surface; one surface per forcing member. Cells
/// parallelize with deterministic output ordering (member-major, then
/// y, then x).
pub fn error_surface(
    model: &SurrogateModel,
    forcings: &[WindField],
    observations: &ObservationStore,
    points: &[String],
    spec: &SurfaceSpec,
    bounds: &ParameterBounds,
) -> Result<Vec<SurfaceRow>> {
    if spec.x_dim >= PARAM_NAMES.len() || spec.y_dim >= PARAM_NAMES.len() {
        return Err(WavecalError::Config("unknown surface parameter".into()));
    }
    if spec.x_dim == spec.y_dim {
        return Err(WavecalError::Config(
            "surface axes must differ".into(),
        ));
    }
    let xs = axis_values(spec.x_lo, spec.x_hi, spec.x_steps.max(1));
    let ys = axis_values(spec.y_lo, spec.y_hi, spec.y_steps.max(1));
    let mut cells = Vec::new();
    for (member, forcing) in forcings.iter().enumerate() {
        for y in &ys {
            for x in &xs {
                let mut arr = spec.base.as_array();
                arr[spec.x_dim] = *x;
                arr[spec.y_dim] = *y;
                let theta = ParameterVector::from_array(arr);
                if !bounds.contains(&theta) {
                    return Err(WavecalError::Config(format!(
                        "surface point {theta:?} outside bounds"
                    )));
                }
                cells.push((theta, member, forcing));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(theta, member, forcing)| {
            let sim = model.evaluate(&theta, forcing)?;
            let (rmse, _) = metrics::pooled_objectives(&sim, observations, points)?;
            Ok(SurfaceRow {
                theta,
                member,
                rmse_pooled: rmse,
            })
        })
        .collect()
}

pub fn surface_to_csv(rows: &[SurfaceRow]) -> String {
    let mut out = String::from("drg,cfw,stpm,member,rmse_pooled\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.theta.drg, r.theta.cfw, r.theta.stpm, r.member, r.rmse_pooled
        );
    }
    out
}

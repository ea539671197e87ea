//! Python bindings for the calibration toolkit: parameter-space
//! helpers, error metrics, the surrogate wave model on the synthetic
//! reference domain and small end-to-end calibrations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use wavecal::experiment::make_truth;
use wavecal::metrics;
use wavecal::model::{ModelAdapter, SurrogateModel};
use wavecal::noise::generate_ensemble;
use wavecal::params::{self, ParameterBounds, ParameterVector};
use wavecal::robust::{run_baseline, run_rebec, RobustConfig};
use wavecal::spea2::EvolutionConfig;
use wavecal::synth::{reference_bathymetry, reference_stations, reference_wind};
use wavecal::WavecalError;

type Triple = (f64, f64, f64);

fn to_py_err(e: WavecalError) -> PyErr {
    match e.exit_code() {
        1 | 2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vector(t: Triple) -> ParameterVector {
    ParameterVector::new(t.0, t.1, t.2)
}

fn triple(p: &ParameterVector) -> Triple {
    (p.drg, p.cfw, p.stpm)
}

/// The reference parameter configuration (drg, cfw, stpm).
#[pyfunction]
fn default_parameters() -> Triple {
    triple(&ParameterVector::default_configuration())
}

/// Default (lo, hi) bound intervals in genotype order.
#[pyfunction]
fn default_bounds() -> Vec<(f64, f64)> {
    ParameterBounds::default()
        .as_array()
        .iter()
        .map(|iv| (iv.lo, iv.hi))
        .collect()
}

/// Latin hypercube sample of n parameter triples.
#[pyfunction]
fn lhs_sample(n: usize, seed: u64) -> PyResult<Vec<Triple>> {
    let sample =
        params::lhs_sample(n, &ParameterBounds::default(), seed).map_err(to_py_err)?;
    Ok(sample.iter().map(triple).collect())
}

/// Project a parameter triple into the default bounds.
#[pyfunction]
fn clamp(theta: Triple) -> Triple {
    triple(&params::clamp(&vector(theta), &ParameterBounds::default()))
}

#[pyfunction]
fn rmse(pred: Vec<f64>, obs: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&pred, &obs).map_err(to_py_err)
}

#[pyfunction]
fn mae(pred: Vec<f64>, obs: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&pred, &obs).map_err(to_py_err)
}

/// Metric restricted to observations at or above their q-quantile.
#[pyfunction]
#[pyo3(signature = (pred, obs, q = 0.75, metric = "rmse"))]
fn peak_metric(pred: Vec<f64>, obs: Vec<f64>, q: f64, metric: &str) -> PyResult<f64> {
    let which = match metric {
        "rmse" => metrics::BaseMetric::Rmse,
        "mae" => metrics::BaseMetric::Mae,
        other => {
            return Err(PyValueError::new_err(format!(
                "metric must be rmse or mae, got {other}"
            )))
        }
    };
    metrics::peak_metric(&pred, &obs, q, which).map_err(to_py_err)
}

/// Relative improvement in percent over the default-configuration error.
#[pyfunction]
fn improvement(err: f64, err_default: f64) -> PyResult<f64> {
    metrics::improvement(err, err_default).map_err(to_py_err)
}

/// Closed-form surrogate wave height for one smoothed wind speed and depth.
#[pyfunction]
fn surrogate_height(theta: Triple, w_eff: f64, depth: f64) -> f64 {
    SurrogateModel::height(&vector(theta), w_eff, depth)
}

fn reference_model() -> PyResult<SurrogateModel> {
    SurrogateModel::new(reference_bathymetry(), reference_stations()).map_err(to_py_err)
}

/// Surrogate output on the synthetic reference domain:
/// {station id: wave-height series}.
#[pyfunction]
#[pyo3(signature = (theta, wind_seed = 0))]
fn evaluate_reference(
    theta: Triple,
    wind_seed: u64,
) -> PyResult<std::collections::BTreeMap<String, Vec<f64>>> {
    let model = reference_model()?;
    let wind = reference_wind(wind_seed);
    let out = model.evaluate(&vector(theta), &wind).map_err(to_py_err)?;
    Ok(out.into_iter().map(|s| (s.station, s.hs)).collect())
}

/// Small end-to-end calibration against synthetic truth on the
/// reference domain. Returns the best genotype and its objectives.
#[pyfunction]
#[pyo3(signature = (truth, robust = false, generations = 10, population = 12, seed = 0, sigma = 0.25, members = 4, stations = None))]
#[allow(clippy::too_many_arguments)]
fn calibrate_reference(
    truth: Triple,
    robust: bool,
    generations: usize,
    population: usize,
    seed: u64,
    sigma: f64,
    members: usize,
    stations: Option<Vec<String>>,
) -> PyResult<(Triple, Vec<f64>)> {
    let full = reference_model()?;
    let wind = reference_wind(seed);
    let observations = make_truth(&vector(truth), &full, &wind, 0.0, seed).map_err(to_py_err)?;
    let points = stations.unwrap_or_else(|| full.stations.ids());
    let model = full.with_stations(&points).map_err(to_py_err)?;
    let bounds = ParameterBounds::default();
    let evo = EvolutionConfig {
        generations,
        population_size: population,
        seed,
        ..EvolutionConfig::default()
    };
    let result = if robust {
        let ensemble =
            generate_ensemble(&wind, members, sigma, 10, seed).map_err(to_py_err)?;
        run_rebec(
            &ensemble,
            &model,
            &observations,
            &points,
            &bounds,
            &evo,
            &RobustConfig::default(),
        )
        .map_err(to_py_err)?
        .0
    } else {
        run_baseline(&model, &wind, &observations, &points, &bounds, &evo)
            .map_err(to_py_err)?
    };
    let best = wavecal::experiment::best_individual(&result.archive);
    Ok((triple(&best.genotype), best.objectives.clone()))
}

#[pymodule]
fn wavecal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(default_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(lhs_sample, m)?)?;
    m.add_function(wrap_pyfunction!(clamp, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(peak_metric, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(surrogate_height, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_reference, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_reference, m)?)?;
    Ok(())
}

//! Command-line interface: synthetic-domain generation, noise-ensemble
//! generation, single calibrations, the full experiment, sensitivity
//! analysis and objective-surface scans.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Result, WavecalError};
use crate::experiment::{
    self, best_individual, report_to_csv, runs_to_csv, sensitivity_to_csv, surface_to_csv,
    Algorithm, ExperimentConfig, SurfaceSpec, ALL_METRICS,
};
use crate::model::SurrogateModel;
use crate::noise::generate_ensemble;
use crate::params::{ParameterVector, PARAM_NAMES};
use crate::robust::{audit_to_csv, run_baseline, run_rebec};
use crate::scenario::{build_scenarios, Scenario};
use crate::series::{read_series_file, write_series_file, ObservationStore};
use crate::spea2::{history_to_csv, EvolutionConfig};
use crate::synth::{reference_bathymetry, reference_stations, reference_wind};
use crate::util::mix_seed;
use crate::wind::WindField;

#[derive(Debug, Parser)]
#[command(
    name = "wavecal",
    about = "Robust evolutionary calibration of wind-wave model parameters",
    version
)]
pub struct Cli {
    /// Worker threads for parallel evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic reference domain and observations.
    MakeTruth(MakeTruthArgs),
    /// Generate an ensemble of perturbed wind fields.
    GenWindNoise(GenWindNoiseArgs),
    /// Run a single calibration on one scenario.
    Calibrate(CalibrateArgs),
    /// Run the full scenario-by-repeat comparison experiment.
    Experiment(ExperimentArgs),
    /// One-at-a-time parameter sensitivity of the surrogate model.
    Sensitivity(SensitivityArgs),
    /// Scan the pooled RMSE surface over two parameters.
    Surface(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct MakeTruthArgs {
    /// Generating parameters, comma separated: drg,cfw,stpm.
    #[arg(long, default_value = "0.7,0.03,0.005")]
    pub theta: String,
    /// Gaussian observation noise SD in meters.
    #[arg(long, default_value_t = 0.0)]
    pub obs_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenWindNoiseArgs {
    /// Input wind field (.wfld).
    #[arg(long)]
    pub wind: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub members: usize,
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10)]
    pub spacing: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Scenario id (1-based); all stations when omitted.
    #[arg(long)]
    pub scenario: Option<usize>,
    #[arg(long, value_parser = parse_algorithm, default_value = "baseline")]
    pub algorithm: Algorithm,
    /// Override the evolution seed from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured number of repeats.
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Parameter to perturb: drg, cfw or stpm. All three when omitted.
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Relative SD of the input perturbation.
    #[arg(long, default_value_t = 0.25)]
    pub rel_sd: f64,
    /// Restrict to these station ids, comma separated.
    #[arg(long)]
    pub stations: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// First scanned axis as name:lo:hi:steps, e.g. drg:0.5:1.5:21.
    #[arg(long)]
    pub x: String,
    /// Second scanned axis as name:lo:hi:steps.
    #[arg(long)]
    pub y: String,
    /// Fixed values for the remaining parameter: drg,cfw,stpm.
    #[arg(long, default_value = "1.0,0.015,0.00302")]
    pub base: String,
    /// Number of perturbed forcings to scan in addition to the base.
    #[arg(long, default_value_t = 0)]
    pub members: usize,
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    match s {
        "baseline" => Ok(Algorithm::Baseline),
        "rebec" => Ok(Algorithm::Rebec),
        other => Err(format!("unknown algorithm {other}, expected baseline or rebec")),
    }
}

fn parse_theta(s: &str) -> Result<ParameterVector> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(WavecalError::Config(format!(
            "expected drg,cfw,stpm, got {s}"
        )));
    }
    let mut vals = [0.0; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse::<f64>()
            .map_err(|e| WavecalError::Config(format!("bad parameter value {p}: {e}")))?;
    }
    Ok(ParameterVector::from_array(vals))
}

fn parse_param_dim(name: &str) -> Result<usize> {
    PARAM_NAMES
        .iter()
        .position(|n| *n == name || (name == "drf" && *n == "drg"))
        .ok_or_else(|| {
            WavecalError::Config(format!(
                "unknown parameter {name}, expected one of {PARAM_NAMES:?}"
            ))
        })
}

fn parse_axis(s: &str) -> Result<(usize, f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(WavecalError::Config(format!(
            "expected name:lo:hi:steps, got {s}"
        )));
    }
    let dim = parse_param_dim(parts[0])?;
    let lo: f64 = parts[1]
        .parse()
        .map_err(|e| WavecalError::Config(format!("bad axis bound {}: {e}", parts[1])))?;
    let hi: f64 = parts[2]
        .parse()
        .map_err(|e| WavecalError::Config(format!("bad axis bound {}: {e}", parts[2])))?;
    let steps: usize = parts[3]
        .parse()
        .map_err(|e| WavecalError::Config(format!("bad step count {}: {e}", parts[3])))?;
    if steps == 0 {
        return Err(WavecalError::Config("axis needs at least 1 step".into()));
    }
    Ok((dim, lo, hi, steps))
}

/// Everything the config file points at, loaded and validated.
pub struct LoadedWorld {
    pub config: ExperimentConfig,
    pub model: SurrogateModel,
    pub wind: WindField,
    pub observations: ObservationStore,
    pub scenarios: Vec<Scenario>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_world(config_path: &Path) -> Result<LoadedWorld> {
    let text = fs::read_to_string(config_path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    config.validate()?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let bathy = crate::grid::BathymetryGrid::read_file(&resolve(base, &config.bathy_path))?;
    let stations = crate::grid::StationSet::read_file(&resolve(base, &config.stations_path))?;
    stations.validate_against(&bathy)?;
    let wind = WindField::read_file(&resolve(base, &config.wind_path))?;
    if wind.nx != bathy.nx || wind.ny != bathy.ny {
        return Err(WavecalError::Shape(format!(
            "wind grid {}x{} does not match bathymetry {}x{}",
            wind.nx, wind.ny, bathy.nx, bathy.ny
        )));
    }
    let observations = ObservationStore::from_series(read_series_file(&resolve(
        base,
        &config.observations_path,
    ))?);
    let model = SurrogateModel::new(bathy, stations)?;
    for id in model.stations.ids() {
        let series = observations.get(&id)?;
        if series.times != wind.times {
            return Err(WavecalError::Shape(format!(
                "station {id}: observation times do not match the wind time axis"
            )));
        }
    }
    let scenarios = build_scenarios(&model.stations, config.master_seed)?;
    Ok(LoadedWorld {
        config,
        model,
        wind,
        observations,
        scenarios,
    })
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn cmd_make_truth(out: &Path, args: &MakeTruthArgs) -> Result<()> {
    let theta = parse_theta(&args.theta)?;
    let bathy = reference_bathymetry();
    let stations = reference_stations();
    let wind = reference_wind(args.seed);
    let model = SurrogateModel::new(bathy, stations)?;
    let obs = experiment::make_truth(&theta, &model, &wind, args.obs_noise, args.seed)?;

    fs::create_dir_all(out)?;
    model.bathy.write_file(&out.join("bathy.txt"))?;
    model.stations.write_file(&out.join("stations.csv"))?;
    wind.write_file(&out.join("wind.wfld"))?;
    let series: Vec<_> = obs.series.into_values().collect();
    write_series_file(&series, &out.join("observations.csv"))?;

    let config = ExperimentConfig {
        wind_path: "wind.wfld".into(),
        bathy_path: "bathy.txt".into(),
        stations_path: "stations.csv".into(),
        observations_path: "observations.csv".into(),
        master_seed: args.seed,
        ..ExperimentConfig::desk_default()
    };
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&config)?,
    )?;
    println!(
        "wrote synthetic domain to {} (theta = {}, {}, {})",
        out.display(),
        theta.drg,
        theta.cfw,
        theta.stpm
    );
    Ok(())
}

fn cmd_gen_wind_noise(out: &Path, args: &GenWindNoiseArgs) -> Result<()> {
    let base = WindField::read_file(&args.wind)?;
    let ens = generate_ensemble(&base, args.members, args.sigma, args.spacing, args.seed)?;
    fs::create_dir_all(out)?;
    for (k, member) in ens.members.iter().enumerate() {
        member.write_file(&out.join(format!("member_{k}.wfld")))?;
    }
    println!(
        "wrote {} perturbed members (sigma {}) to {}",
        ens.members.len(),
        args.sigma,
        out.display()
    );
    Ok(())
}

fn cmd_calibrate(out: &Path, args: &CalibrateArgs) -> Result<()> {
    let world = load_world(&args.config)?;
    let points = match args.scenario {
        Some(id) => {
            let scenario = world
                .scenarios
                .iter()
                .find(|s| s.id == id)
                .ok_or_else(|| {
                    WavecalError::Config(format!(
                        "scenario {id} not found (1..={})",
                        world.scenarios.len()
                    ))
                })?;
            scenario.calibration.clone()
        }
        None => world.model.stations.ids(),
    };
    let model = world.model.with_stations(&points)?;
    let evo = EvolutionConfig {
        seed: args.seed.unwrap_or(world.config.evolution.seed),
        ..world.config.evolution.clone()
    };

    let result = match args.algorithm {
        Algorithm::Baseline => run_baseline(
            &model,
            &world.wind,
            &world.observations,
            &points,
            &world.config.bounds,
            &evo,
        )?,
        Algorithm::Rebec => {
            let ens = generate_ensemble(
                &world.wind,
                world.config.noise.members,
                world.config.noise.sigma,
                world.config.noise.spacing,
                mix_seed(world.config.master_seed, &[0xca1]),
            )?;
            let (result, evals) = run_rebec(
                &ens,
                &model,
                &world.observations,
                &points,
                &world.config.bounds,
                &evo,
                &world.config.robust,
            )?;
            write_out(out, "audit.csv", &audit_to_csv(&result, &evals))?;
            result
        }
    };

    write_out(out, "history.csv", &history_to_csv(&result.history))?;
    let best = best_individual(&result.archive);
    let best_json = serde_json::json!({
        "drg": best.genotype.drg,
        "cfw": best.genotype.cfw,
        "stpm": best.genotype.stpm,
        "objectives": best.objectives,
    });
    write_out(out, "best.json", &serde_json::to_string_pretty(&best_json)?)?;
    println!(
        "{}: best genotype drg={} cfw={} stpm={} (objectives {:?})",
        args.algorithm.label(),
        best.genotype.drg,
        best.genotype.cfw,
        best.genotype.stpm,
        best.objectives
    );
    Ok(())
}

fn cmd_experiment(out: &Path, args: &ExperimentArgs, jobs: Option<usize>) -> Result<()> {
    let world = load_world(&args.config)?;
    let mut config = world.config.clone();
    if let Some(r) = args.repeats {
        config.repeats = r;
    }
    let output = experiment::run_experiment(
        &world.model,
        &world.wind,
        &world.observations,
        &world.scenarios,
        &config,
        jobs,
    )?;
    write_out(out, "runs.csv", &runs_to_csv(&output.runs))?;
    for metric in ALL_METRICS {
        write_out(
            out,
            &format!("report_{}.csv", metric.name()),
            &report_to_csv(&output.reports, metric),
        )?;
    }
    println!(
        "experiment finished: {} runs ({} failed), reports in {}",
        output.runs.len(),
        output.failures,
        out.display()
    );
    Ok(())
}

fn cmd_sensitivity(out: &Path, args: &SensitivityArgs) -> Result<()> {
    let world = load_world(&args.config)?;
    let model = match &args.stations {
        Some(list) => {
            let ids: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            world.model.with_stations(&ids)?
        }
        None => world.model,
    };
    let dims: Vec<usize> = match &args.param {
        Some(name) => vec![parse_param_dim(name)?],
        None => (0..PARAM_NAMES.len()).collect(),
    };
    let base = ParameterVector::default_configuration();
    let mut all_rows = Vec::new();
    for dim in dims {
        let rows = experiment::run_sensitivity(
            &model,
            &world.wind,
            dim,
            args.runs,
            args.rel_sd,
            &base,
            &world.config.bounds,
            args.seed,
        )?;
        all_rows.extend(rows);
    }
    write_out(out, "sensitivity.csv", &sensitivity_to_csv(&all_rows))?;
    println!("wrote {}/sensitivity.csv", out.display());
    Ok(())
}

fn cmd_surface(out: &Path, args: &SurfaceArgs) -> Result<()> {
    let world = load_world(&args.config)?;
    let (x_dim, x_lo, x_hi, x_steps) = parse_axis(&args.x)?;
    let (y_dim, y_lo, y_hi, y_steps) = parse_axis(&args.y)?;
    let spec = SurfaceSpec {
        x_dim,
        x_lo,
        x_hi,
        x_steps,
        y_dim,
        y_lo,
        y_hi,
        y_steps,
        base: parse_theta(&args.base)?,
    };
    let mut forcings = vec![world.wind.clone()];
    if args.members > 0 {
        let ens = generate_ensemble(
            &world.wind,
            args.members,
            args.sigma,
            world.config.noise.spacing,
            args.seed,
        )?;
        forcings.extend(ens.members);
    }
    let points = world.model.stations.ids();
    let rows = experiment::error_surface(
        &world.model,
        &forcings,
        &world.observations,
        &points,
        &spec,
        &world.config.bounds,
    )?;
    write_out(out, "surface.csv", &surface_to_csv(&rows))?;
    println!("wrote {}/surface.csv ({} cells)", out.display(), rows.len());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = if cli.jobs > 0 { Some(cli.jobs) } else { None };
    if let Some(n) = jobs {
        // One bounded global pool for every parallel section. The
        // experiment output is aggregated sequentially, so results do
        // not depend on this count.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::MakeTruth(args) => cmd_make_truth(&cli.out, args),
        Command::GenWindNoise(args) => cmd_gen_wind_noise(&cli.out, args),
        Command::Calibrate(args) => cmd_calibrate(&cli.out, args),
        Command::Experiment(args) => cmd_experiment(&cli.out, args, None),
        Command::Sensitivity(args) => cmd_sensitivity(&cli.out, args),
        Command::Surface(args) => cmd_surface(&cli.out, args),
    }
}

/// CLI entry point: errors go to stderr with a stable exit-code scheme
/// (1 configuration, 2 input format or shape, 3 model or I/O failure).
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

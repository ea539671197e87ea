//! The model operator: a pluggable adapter from (parameters, wind
//! forcing) to per-station wave-height series, with a built-in
//! closed-form surrogate and a generic external-process adapter.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Result, WavecalError};
use crate::grid::{BathymetryGrid, StationSet};
use crate::params::ParameterVector;
use crate::series::{read_series_file, StationSeries};
use crate::wind::WindField;

/// Behavioral contract for a wave model run: deterministic mapping from
/// (parameters, forcing) to one series per station.
pub trait ModelAdapter: Sync {
    fn evaluate(&self, theta: &ParameterVector, wind: &WindField) -> Result<Vec<StationSeries>>;
    fn station_ids(&self) -> Vec<String>;
}

/// Gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.81;
/// Exponential smoothing weight of the effective wind recursion.
pub const WIND_SMOOTHING: f64 = 0.6;
/// Fully developed wave height coefficient.
pub const WAVE_COEF: f64 = 0.21;
/// Depth-limited height fraction.
pub const DEPTH_CAP_FRACTION: f64 = 0.5;
/// Whitecapping steepness reference value (the default stpm).
pub const STEEPNESS_REF: f64 = 0.00302;
/// Whitecapping exponent.
pub const STEEPNESS_EXP: f64 = 0.25;
/// Bottom-friction dissipation scale.
pub const FRICTION_SCALE: f64 = 40.0;
/// Depth floor for the friction term, m.
pub const FRICTION_DEPTH_FLOOR: f64 = 2.0;

/// Closed-form surrogate standing in for a spectral wave model. It keeps
/// the same three tuning handles: drag amplifies input energy, steepness
/// modulates whitecapping dissipation, bottom friction dissipates by depth.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub bathy: BathymetryGrid,
    pub stations: StationSet,
}

impl SurrogateModel {
    pub fn new(bathy: BathymetryGrid, stations: StationSet) -> Result<Self> {
        stations.validate_against(&bathy)?;
        Ok(Self { bathy, stations })
    }

    /// Restrict the adapter to a subset of its stations.
    pub fn with_stations(&self, ids: &[String]) -> Result<SurrogateModel> {
        Ok(SurrogateModel {
            bathy: self.bathy.clone(),
            stations: self.stations.subset(ids)?,
        })
    }

    fn check_shapes(&self, wind: &WindField) -> Result<()> {
        if wind.nx != self.bathy.nx || wind.ny != self.bathy.ny {
            return Err(WavecalError::Shape(format!(
                "wind grid {}x{} does not match bathymetry {}x{}",
                wind.nx, wind.ny, self.bathy.nx, self.bathy.ny
            )));
        }
        Ok(())
    }

    /// Wave height at one station for a smoothed wind speed `w_eff`.
    #[inline]
    pub fn height(theta: &ParameterVector, w_eff: f64, depth: f64) -> f64 {
        let h0 = WAVE_COEF * theta.drg * w_eff * w_eff / GRAVITY;
        let h1 = h0.min(DEPTH_CAP_FRACTION * depth);
        let h2 = h1 * (theta.stpm / STEEPNESS_REF).powf(STEEPNESS_EXP);
        h2 * (-FRICTION_SCALE * theta.cfw / depth.max(FRICTION_DEPTH_FLOOR)).exp()
    }
}

impl ModelAdapter for SurrogateModel {
    fn evaluate(&self, theta: &ParameterVector, wind: &WindField) -> Result<Vec<StationSeries>> {
        self.check_shapes(wind)?;
        self.stations.validate_against(&self.bathy)?;
        self.stations
            .stations
            .iter()
            .map(|st| {
                let depth = self.bathy.depth_at(st.ix, st.iy);
                let mut hs = Vec::with_capacity(wind.nt);
                let mut w_eff = wind.speed(st.ix, st.iy, 0);
                hs.push(Self::height(theta, w_eff, depth));
                for t in 1..wind.nt {
                    let w = wind.speed(st.ix, st.iy, t);
                    w_eff = (1.0 - WIND_SMOOTHING) * w_eff + WIND_SMOOTHING * w;
                    hs.push(Self::height(theta, w_eff, depth));
                }
                StationSeries::new(st.id.clone(), wind.times.clone(), hs)
            })
            .collect()
    }

    fn station_ids(&self) -> Vec<String> {
        self.stations.ids()
    }
}

/// Drives an external model process. Data exchange is file based: the
/// wind field is written in `WFLD v1`, the command template is expanded
/// with `{drg} {cfw} {stpm} {wind_path} {out_path}` and the station
/// output is read back from the `time,station,hs_m` CSV.
#[derive(Debug, Clone)]
pub struct ExternalModel {
    pub command_template: String,
    pub station_ids: Vec<String>,
    /// Scratch directory owned by this adapter instance. Concurrent runs
    /// must use distinct directories.
    pub work_dir: PathBuf,
    pub timeout: Duration,
}

impl ExternalModel {
    pub fn new(command_template: String, station_ids: Vec<String>, work_dir: PathBuf) -> Self {
        Self {
            command_template,
            station_ids,
            work_dir,
            timeout: Duration::from_secs(600),
        }
    }

    fn expand(&self, theta: &ParameterVector, wind_path: &Path, out_path: &Path) -> String {
        self.command_template
            .replace("{drg}", &theta.drg.to_string())
            .replace("{cfw}", &theta.cfw.to_string())
            .replace("{stpm}", &theta.stpm.to_string())
            .replace("{wind_path}", &wind_path.to_string_lossy())
            .replace("{out_path}", &out_path.to_string_lossy())
    }

    fn run_command(&self, cmd: &str) -> Result<()> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(&self.work_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let start = Instant::now();
        loop {
            if let Some(status) = child.try_wait()? {
                if status.success() {
                    return Ok(());
                }
                let output = child.wait_with_output()?;
                return Err(WavecalError::ExternalModel {
                    status: status.code(),
                    stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
                });
            }
            if start.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(WavecalError::Timeout(self.timeout.as_secs()));
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

impl ModelAdapter for ExternalModel {
    fn evaluate(&self, theta: &ParameterVector, wind: &WindField) -> Result<Vec<StationSeries>> {
        std::fs::create_dir_all(&self.work_dir)?;
        let wind_path = self.work_dir.join("wind.wfld");
        let params_path = self.work_dir.join("params.json");
        let out_path = self.work_dir.join("stations_out.csv");
        wind.write_file(&wind_path)?;
        std::fs::write(&params_path, serde_json::to_string_pretty(theta)?)?;
        if out_path.exists() {
            std::fs::remove_file(&out_path)?;
        }

        let cmd = self.expand(theta, &wind_path, &out_path);
        self.run_command(&cmd)?;

        let series = read_series_file(&out_path)?;
        let got: Vec<String> = series.iter().map(|s| s.station.clone()).collect();
        for id in &self.station_ids {
            if !got.contains(id) {
                return Err(WavecalError::Format {
                    path: out_path,
                    message: format!("missing station {id} in external model output"),
                });
            }
        }
        Ok(series)
    }

    fn station_ids(&self) -> Vec<String> {
        self.station_ids.clone()
    }
}

//! Per-station significant-wave-height time series and their CSV format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, WavecalError};
use crate::wind::{format_time, parse_time};

/// Significant wave height series at one observation point.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station: String,
    /// Unix seconds, strictly increasing.
    pub times: Vec<i64>,
    /// Meters, finite and >= 0, same length as `times`.
    pub hs: Vec<f64>,
}

impl StationSeries {
    pub fn new(station: String, times: Vec<i64>, hs: Vec<f64>) -> Result<Self> {
        if times.len() != hs.len() {
            return Err(WavecalError::Shape(format!(
                "station {station}: {} times vs {} values",
                times.len(),
                hs.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WavecalError::Shape(format!(
                "station {station}: timestamps must be strictly increasing"
            )));
        }
        if hs.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(WavecalError::Shape(format!(
                "station {station}: hs values must be finite and >= 0"
            )));
        }
        Ok(Self { station, times, hs })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Mapping from station id to its observed (or simulated) series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationStore {
    pub series: BTreeMap<String, StationSeries>,
}

impl ObservationStore {
    pub fn from_series(series: Vec<StationSeries>) -> Self {
        Self {
            series: series.into_iter().map(|s| (s.station.clone(), s)).collect(),
        }
    }

    pub fn get(&self, station: &str) -> Result<&StationSeries> {
        self.series.get(station).ok_or_else(|| {
            WavecalError::Config(format!("no observations for station {station}"))
        })
    }
}

/// Serialize series as CSV `time,station,hs_m`, time-major, stations in
/// the given order within each time step.
pub fn series_to_csv(series: &[StationSeries]) -> String {
    let mut out = String::from("time,station,hs_m\n");
    if series.is_empty() {
        return out;
    }
    let nt = series[0].len();
    for t in 0..nt {
        for s in series {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_time(s.times[t]),
                s.station,
                s.hs[t]
            );
        }
    }
    out
}

/// Parse the station-series CSV. Rows may come in any order; each
/// station's rows are sorted by time.
pub fn series_from_csv(text: &str, path: &Path) -> Result<Vec<StationSeries>> {
    let fmt = |message: String| WavecalError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("time,station,hs_m") => {}
        other => {
            return Err(fmt(format!(
                "bad header {other:?}, expected 'time,station,hs_m'"
            )))
        }
    }
    let mut per_station: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(fmt(format!("line {}: expected 3 columns", ln + 2)));
        }
        let time = parse_time(cols[0].trim())
            .ok_or_else(|| fmt(format!("line {}: bad timestamp '{}'", ln + 2, cols[0])))?;
        let hs: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|_| fmt(format!("line {}: bad hs '{}'", ln + 2, cols[2])))?;
        let id = cols[1].trim().to_string();
        if !per_station.contains_key(&id) {
            order.push(id.clone());
        }
        per_station.entry(id).or_default().push((time, hs));
        rows += 1;
    }
    if rows == 0 {
        return Err(fmt("no data rows after header".into()));
    }
    order
        .into_iter()
        .map(|id| {
            let mut rows = per_station.remove(&id).unwrap();
            rows.sort_by_key(|r| r.0);
            let (times, hs): (Vec<i64>, Vec<f64>) = rows.into_iter().unzip();
            StationSeries::new(id, times, hs)
        })
        .collect()
}

pub fn write_series_file(series: &[StationSeries], path: &Path) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn read_series_file(path: &Path) -> Result<Vec<StationSeries>> {
    let text = std::fs::read_to_string(path)?;
    series_from_csv(&text, path)
}

//! Bathymetry grid and observation stations.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};

/// Minimum depth for a cell to count as wet, in meters.
pub const WET_DEPTH_MIN: f64 = 0.0;

/// Water depth grid. Non-positive depth marks land.
#[derive(Debug, Clone, PartialEq)]
pub struct BathymetryGrid {
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `ny * nx` values in meters.
    pub depth: Vec<f64>,
}

impl BathymetryGrid {
    pub fn new(nx: usize, ny: usize, depth: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(WavecalError::Shape("grid dimensions must be >= 1".into()));
        }
        if depth.len() != nx * ny {
            return Err(WavecalError::Shape(format!(
                "depth has {} values, expected {}",
                depth.len(),
                nx * ny
            )));
        }
        Ok(Self { nx, ny, depth })
    }

    pub fn depth_at(&self, ix: usize, iy: usize) -> f64 {
        self.depth[iy * self.nx + ix]
    }

    pub fn is_wet(&self, ix: usize, iy: usize) -> bool {
        self.depth_at(ix, iy) > WET_DEPTH_MIN
    }

    /// `BATH v1` text format: `BATH 1 nx ny`, then ny rows of nx depths.
    pub fn to_text(&self) -> String {
        let mut out = format!("BATH 1 {} {}\n", self.nx, self.ny);
        for iy in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|ix| format!("{}", self.depth_at(ix, iy)))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let fmt = |message: String| WavecalError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| fmt("empty file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "BATH" || parts[1] != "1" {
            return Err(fmt(format!("bad header '{header}', expected 'BATH 1 nx ny'")));
        }
        let nx: usize = parts[2]
            .parse()
            .map_err(|_| fmt(format!("bad nx '{}'", parts[2])))?;
        let ny: usize = parts[3]
            .parse()
            .map_err(|_| fmt(format!("bad ny '{}'", parts[3])))?;
        let mut depth = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let line = lines
                .next()
                .ok_or_else(|| fmt(format!("missing depth row {iy}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fmt(format!("non-numeric depth in row {iy}")))?;
            if row.len() != nx {
                return Err(fmt(format!(
                    "row {iy} has {} values, expected {nx}",
                    row.len()
                )));
            }
            depth.extend(row);
        }
        Self::new(nx, ny, depth)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, path)
    }
}

/// One observation point on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub ix: usize,
    pub iy: usize,
}

/// Ordered set of observation points with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSet {
    pub stations: Vec<Station>,
}

impl StationSet {
    pub fn new(stations: Vec<Station>) -> Result<Self> {
        if stations.is_empty() {
            return Err(WavecalError::Config("station set must be non-empty".into()));
        }
        for (i, a) in stations.iter().enumerate() {
            for b in &stations[i + 1..] {
                if a.id == b.id {
                    return Err(WavecalError::Config(format!("duplicate station id {}", a.id)));
                }
            }
        }
        Ok(Self { stations })
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.stations.iter().map(|s| s.id.clone()).collect()
    }

    pub fn subset(&self, ids: &[String]) -> Result<StationSet> {
        let stations: Vec<Station> = self
            .stations
            .iter()
            .filter(|s| ids.contains(&s.id))
            .cloned()
            .collect();
        if stations.len() != ids.len() {
            return Err(WavecalError::Config(format!(
                "unknown station ids in {ids:?}"
            )));
        }
        StationSet::new(stations)
    }

    /// All stations must sit on wet cells inside the grid.
    pub fn validate_against(&self, bathy: &BathymetryGrid) -> Result<()> {
        for s in &self.stations {
            if s.ix >= bathy.nx || s.iy >= bathy.ny {
                return Err(WavecalError::Config(format!(
                    "station {} at ({}, {}) outside {}x{} grid",
                    s.id, s.ix, s.iy, bathy.nx, bathy.ny
                )));
            }
            if !bathy.is_wet(s.ix, s.iy) {
                return Err(WavecalError::Config(format!(
                    "station {} at ({}, {}) is on land",
                    s.id, s.ix, s.iy
                )));
            }
        }
        Ok(())
    }

    /// CSV with header `id,ix,iy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,ix,iy\n");
        for s in &self.stations {
            let _ = writeln!(out, "{},{},{}", s.id, s.ix, s.iy);
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let fmt = |message: String| WavecalError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("id,ix,iy") => {}
            other => return Err(fmt(format!("bad header {other:?}, expected 'id,ix,iy'"))),
        }
        let mut stations = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(fmt(format!("line {}: expected 3 columns", ln + 2)));
            }
            let ix = cols[1]
                .parse()
                .map_err(|_| fmt(format!("line {}: bad ix", ln + 2)))?;
            let iy = cols[2]
                .parse()
                .map_err(|_| fmt(format!("line {}: bad iy", ln + 2)))?;
            stations.push(Station {
                id: cols[0].to_string(),
                ix,
                iy,
            });
        }
        StationSet::new(stations)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn bathy_round_trip() {
        let bathy = BathymetryGrid::new(3, 2, vec![1.0, 2.0, 3.0, -1.0, 5.5, 6.0]).unwrap();
        let text = bathy.to_text();
        assert!(text.starts_with("BATH 1 3 2\n"));
        let parsed = BathymetryGrid::from_text(&text, &PathBuf::from("x")).unwrap();
        assert_eq!(parsed, bathy);
        assert!(!parsed.is_wet(0, 1));
        assert!(parsed.is_wet(1, 1));
    }

    #[test]
    fn bathy_bad_header() {
        let err = BathymetryGrid::from_text("NOPE\n", &PathBuf::from("x")).unwrap_err();
        assert!(matches!(err, WavecalError::Format { .. }));
    }

    #[test]
    fn station_validation() {
        let bathy = BathymetryGrid::new(2, 2, vec![10.0, 10.0, 0.0, 10.0]).unwrap();
        let wet = StationSet::new(vec![Station {
            id: "P1".into(),
            ix: 0,
            iy: 0,
        }])
        .unwrap();
        wet.validate_against(&bathy).unwrap();

        let land = StationSet::new(vec![Station {
            id: "P1".into(),
            ix: 0,
            iy: 1,
        }])
        .unwrap();
        assert!(land.validate_against(&bathy).is_err());

        assert!(StationSet::new(vec![
            Station {
                id: "P1".into(),
                ix: 0,
                iy: 0
            },
            Station {
                id: "P1".into(),
                ix: 1,
                iy: 0
            }
        ])
        .is_err());
    }
}

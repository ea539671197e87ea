//! Gridded wind forcing fields and the `WFLD v1` text format.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};

use crate::error::{Result, WavecalError};

/// Format a unix timestamp (seconds) as ISO-8601 UTC.
pub fn format_time(t: i64) -> String {
    Utc.timestamp_opt(t, 0)
        .single()
        .expect("valid unix timestamp")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parse an ISO-8601 timestamp into unix seconds.
pub fn parse_time(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s).ok().map(|d| d.timestamp())
}

/// Wind forcing: U (eastward) and V (northward) components on an
/// nx-by-ny grid over nt time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Unix seconds, strictly increasing, length nt.
    pub times: Vec<i64>,
    /// Time-major row-major: `u[t * ny * nx + iy * nx + ix]`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl WindField {
    pub fn new(nx: usize, ny: usize, times: Vec<i64>, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let nt = times.len();
        if nx == 0 || ny == 0 {
            return Err(WavecalError::Shape("grid dimensions must be >= 1".into()));
        }
        if nt < 2 {
            return Err(WavecalError::Shape(
                "wind field needs at least 2 time steps".into(),
            ));
        }
        if u.len() != nt * ny * nx || v.len() != nt * ny * nx {
            return Err(WavecalError::Shape(format!(
                "component length {} / {}, expected {}",
                u.len(),
                v.len(),
                nt * ny * nx
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WavecalError::Shape(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(WavecalError::Shape("non-finite wind component".into()));
        }
        Ok(Self {
            nx,
            ny,
            nt,
            times,
            u,
            v,
        })
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, t: usize) -> usize {
        t * self.ny * self.nx + iy * self.nx + ix
    }

    #[inline]
    pub fn speed(&self, ix: usize, iy: usize, t: usize) -> f64 {
        let i = self.idx(ix, iy, t);
        (self.u[i] * self.u[i] + self.v[i] * self.v[i]).sqrt()
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn same_layout(&self, other: &WindField) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.times == other.times
    }

    /// `WFLD v1`: header `WFLD 1 nx ny nt`; per step a timestamp line,
    /// ny rows of nx U values, then ny rows of nx V values.
    pub fn to_text(&self) -> String {
        let mut out = format!("WFLD 1 {} {} {}\n", self.nx, self.ny, self.nt);
        for t in 0..self.nt {
            let _ = writeln!(out, "{}", format_time(self.times[t]));
            for comp in [&self.u, &self.v] {
                for iy in 0..self.ny {
                    let row: Vec<String> = (0..self.nx)
                        .map(|ix| format!("{}", comp[self.idx(ix, iy, t)]))
                        .collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
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
        if parts.len() != 5 || parts[0] != "WFLD" || parts[1] != "1" {
            return Err(fmt(format!(
                "bad header '{header}', expected 'WFLD 1 nx ny nt'"
            )));
        }
        let nx: usize = parts[2].parse().map_err(|_| fmt("bad nx".into()))?;
        let ny: usize = parts[3].parse().map_err(|_| fmt("bad ny".into()))?;
        let nt: usize = parts[4].parse().map_err(|_| fmt("bad nt".into()))?;
        let mut times = Vec::with_capacity(nt);
        let mut u = Vec::with_capacity(nt * ny * nx);
        let mut v = Vec::with_capacity(nt * ny * nx);
        for t in 0..nt {
            let ts_line = lines
                .next()
                .ok_or_else(|| fmt(format!("missing timestamp for step {t}")))?;
            let ts = parse_time(ts_line.trim())
                .ok_or_else(|| fmt(format!("bad timestamp '{ts_line}'")))?;
            times.push(ts);
            for (comp_name, comp) in [("U", &mut u), ("V", &mut v)] {
                for iy in 0..ny {
                    let line = lines.next().ok_or_else(|| {
                        fmt(format!("missing {comp_name} row {iy} at step {t}"))
                    })?;
                    let row: Vec<f64> = line
                        .split_whitespace()
                        .map(|tok| tok.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| {
                            fmt(format!("non-numeric {comp_name} value at step {t} row {iy}"))
                        })?;
                    if row.len() != nx {
                        return Err(fmt(format!(
                            "{comp_name} row {iy} at step {t} has {} values, expected {nx}",
                            row.len()
                        )));
                    }
                    comp.extend(row);
                }
            }
        }
        Self::new(nx, ny, times, u, v)
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

//! Synthetic reference domain: a 30x30 graded-depth basin, nine
//! observation points across depth classes and one month of 3-hourly
//! wind with two storm events over a calm background.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{BathymetryGrid, Station, StationSet};
use crate::wind::WindField;

pub const GRID_NX: usize = 30;
pub const GRID_NY: usize = 30;
/// 3-hourly output step, seconds.
pub const TIME_STEP: i64 = 10_800;
/// One month of 3-hourly steps plus the initial one.
pub const TIME_STEPS: usize = 241;
/// 2020-01-01T00:00:00Z.
pub const TIME_ORIGIN: i64 = 1_577_836_800;

/// Graded depths from 3 m at the coast row to 60 m offshore, with
/// station cells pinned to exact depth-class values.
pub fn reference_bathymetry() -> BathymetryGrid {
    let mut depth = vec![0.0; GRID_NX * GRID_NY];
    for iy in 0..GRID_NY {
        let frac = iy as f64 / (GRID_NY - 1) as f64;
        for ix in 0..GRID_NX {
            depth[iy * GRID_NX + ix] = 3.0 + 57.0 * frac;
        }
    }
    for st in station_layout() {
        depth[st.1 .1 * GRID_NX + st.1 .0] = st.2;
    }
    BathymetryGrid::new(GRID_NX, GRID_NY, depth).unwrap()
}

/// (id, (ix, iy), depth class in meters). Three stations sit at the
/// 20 m class used by the sensitivity analysis.
fn station_layout() -> [(&'static str, (usize, usize), f64); 9] {
    [
        ("P1", (4, 2), 3.0),
        ("P2", (22, 3), 5.0),
        ("P3", (9, 6), 10.0),
        ("P4", (17, 9), 20.0),
        ("P5", (6, 14), 20.0),
        ("P6", (24, 13), 20.0),
        ("P7", (12, 19), 30.0),
        ("P8", (21, 24), 45.0),
        ("P9", (7, 27), 60.0),
    ]
}

pub fn reference_stations() -> StationSet {
    StationSet::new(
        station_layout()
            .iter()
            .map(|(id, (ix, iy), _)| Station {
                id: (*id).to_string(),
                ix: *ix,
                iy: *iy,
            })
            .collect(),
    )
    .unwrap()
}

/// Station ids whose cell depth matches the given class.
pub fn stations_at_depth(depth: f64) -> Vec<String> {
    station_layout()
        .iter()
        .filter(|(_, _, d)| *d == depth)
        .map(|(id, _, _)| (*id).to_string())
        .collect()
}

/// Seeded synthetic storm sequence: a varying calm background plus two
/// storm events, advected across the grid so that cell time series are
/// phase shifted and spatially correlated.
pub fn reference_wind(seed: u64) -> WindField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Static per-cell modulation, a few percent.
    let cell_gain: Vec<f64> = (0..GRID_NX * GRID_NY)
        .map(|_| 1.0 + 0.04 * (rng.random::<f64>() - 0.5))
        .collect();

    let times: Vec<i64> = (0..TIME_STEPS as i64)
        .map(|t| TIME_ORIGIN + t * TIME_STEP)
        .collect();
    let mut u = Vec::with_capacity(TIME_STEPS * GRID_NY * GRID_NX);
    let mut v = Vec::with_capacity(TIME_STEPS * GRID_NY * GRID_NX);

    let storm = |t: f64, center: f64, width: f64, amp: f64| {
        amp * (-((t - center) * (t - center)) / (2.0 * width * width)).exp()
    };

    for t in 0..TIME_STEPS {
        let tf = t as f64;
        // Background 3.5..6.5 m/s with a daily cycle (8 steps per day).
        let background = 5.0 + 1.5 * (TAU * tf / 8.0).sin();
        // Two storm events near day 7.5 and day 20.
        let storms = storm(tf, 60.0, 10.0, 13.0) + storm(tf, 160.0, 12.0, 11.0);
        let speed = background + storms;
        // Wind direction swings slowly and rotates during storms.
        let angle = 0.6 * (TAU * tf / 56.0).sin() + 0.004 * storms * tf;
        for iy in 0..GRID_NY {
            for ix in 0..GRID_NX {
                // Traveling spatial pattern: cells see the same signal
                // with a position-dependent phase.
                let phase = TAU * ix as f64 / GRID_NX as f64
                    + 0.7 * (TAU * iy as f64 / GRID_NY as f64).sin()
                    - 0.22 * tf;
                // Second mode with a column-dependent frequency, so
                // distant columns decorrelate over time instead of
                // sharing one common-mode signal.
                let local = TAU * iy as f64 / 20.0 + (0.11 + 0.013 * ix as f64) * tf;
                let modulation = 1.0 + 0.25 * phase.sin() + 0.2 * local.sin();
                let w = speed * modulation * cell_gain[iy * GRID_NX + ix];
                u.push(w * angle.cos());
                v.push(w * angle.sin());
            }
        }
    }
    WindField::new(GRID_NX, GRID_NY, times, u, v).unwrap()
}

//! Calibration/validation scenarios: splits of the observation points
//! from single-point calibration up to all-points-but-one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};
use crate::grid::StationSet;
use crate::util::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioGroup {
    Singleton,
    Mid,
    Large,
}

impl ScenarioGroup {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioGroup::Singleton => "singleton",
            ScenarioGroup::Mid => "mid",
            ScenarioGroup::Large => "large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub group: ScenarioGroup,
    pub calibration: Vec<String>,
    pub validation: Vec<String>,
}

/// Build the scenario suite: one singleton per station, five random
/// mid-size calibration subsets, four random all-but-one subsets.
/// Deterministic per seed. For the reference 9-station layout this
/// yields 18 scenarios grouped 9/5/4.
pub fn build_scenarios(stations: &StationSet, seed: u64) -> Result<Vec<Scenario>> {
    let ids = stations.ids();
    let n = ids.len();
    if n < 3 {
        return Err(WavecalError::Config(format!(
            "scenario construction needs at least 3 stations, got {n}"
        )));
    }
    let mut scenarios = Vec::new();
    let mut next_id = 1;

    for station in &ids {
        scenarios.push(make(next_id, ScenarioGroup::Singleton, vec![station.clone()], &ids));
        next_id += 1;
    }

    let mid_lo = ((n - 1) / 2).max(2);
    let mid_hi = ((n + 1) / 2).max(2).min(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x7363656e]));
    for _ in 0..5 {
        let size = rng.random_range(mid_lo..=mid_hi);
        let mut pool = ids.clone();
        pool.shuffle(&mut rng);
        let mut calibration: Vec<String> = pool.into_iter().take(size).collect();
        calibration.sort();
        scenarios.push(make(next_id, ScenarioGroup::Mid, calibration, &ids));
        next_id += 1;
    }

    for _ in 0..4 {
        let mut pool = ids.clone();
        pool.shuffle(&mut rng);
        let mut calibration: Vec<String> = pool.into_iter().take(n - 1).collect();
        calibration.sort();
        scenarios.push(make(next_id, ScenarioGroup::Large, calibration, &ids));
        next_id += 1;
    }

    Ok(scenarios)
}

fn make(id: usize, group: ScenarioGroup, calibration: Vec<String>, all: &[String]) -> Scenario {
    let validation: Vec<String> = all
        .iter()
        .filter(|s| !calibration.contains(s))
        .cloned()
        .collect();
    Scenario {
        id,
        group,
        calibration,
        validation,
    }
}

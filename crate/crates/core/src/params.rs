//! Model parameter space: the calibratable triple, its bounds and
//! Latin hypercube sampling for population initialization.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WavecalError};

/// Number of tunable parameters.
pub const PARAM_COUNT: usize = 3;

/// Parameter names in genotype order. `drg` is also written DRF in some
/// configuration sources; the alias is accepted on input.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = ["drg", "cfw", "stpm"];

/// The calibratable parameter triple: wind-drag multiplier, Collins
/// bottom-friction coefficient and whitecapping steepness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub drg: f64,
    pub cfw: f64,
    pub stpm: f64,
}

impl ParameterVector {
    pub const fn new(drg: f64, cfw: f64, stpm: f64) -> Self {
        Self { drg, cfw, stpm }
    }

    /// Reference configuration used as the improvement baseline.
    pub const fn default_configuration() -> Self {
        Self::new(1.0, 0.015, 0.00302)
    }

    pub fn as_array(&self) -> [f64; PARAM_COUNT] {
        [self.drg, self.cfw, self.stpm]
    }

    pub fn from_array(a: [f64; PARAM_COUNT]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(WavecalError::Bounds(format!(
                "interval [{lo}, {hi}] requires finite lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-parameter closed bound intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub drg: Interval,
    pub cfw: Interval,
    pub stpm: Interval,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            drg: Interval { lo: 0.1, hi: 2.0 },
            cfw: Interval {
                lo: 0.0005,
                hi: 0.1,
            },
            stpm: Interval {
                lo: 0.0005,
                hi: 0.01,
            },
        }
    }
}

impl ParameterBounds {
    pub fn as_array(&self) -> [Interval; PARAM_COUNT] {
        [self.drg, self.cfw, self.stpm]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in PARAM_NAMES.iter().zip(self.as_array()) {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(WavecalError::Bounds(format!(
                    "{name}: [{}, {}] requires finite lo < hi",
                    iv.lo, iv.hi
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &ParameterVector) -> bool {
        self.as_array()
            .iter()
            .zip(p.as_array())
            .all(|(iv, v)| iv.contains(v))
    }
}

/// Project each coordinate into its bound interval. Idempotent.
pub fn clamp(p: &ParameterVector, bounds: &ParameterBounds) -> ParameterVector {
    ParameterVector::new(
        bounds.drg.clamp(p.drg),
        bounds.cfw.clamp(p.cfw),
        bounds.stpm.clamp(p.stpm),
    )
}

/// Latin hypercube sample of `n` parameter vectors: one sample per
/// equal-width stratum in every dimension, uniform position within the
/// stratum, strata permuted independently per dimension. Deterministic
/// for a fixed seed.
pub fn lhs_sample(n: usize, bounds: &ParameterBounds, seed: u64) -> Result<Vec<ParameterVector>> {
    if n == 0 {
        return Err(WavecalError::EmptyRequest(
            "lhs_sample requires n >= 1".into(),
        ));
    }
    bounds.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = [const { Vec::new() }; PARAM_COUNT];
    for (dim, iv) in bounds.as_array().iter().enumerate() {
        let mut vals: Vec<f64> = (0..n)
            .map(|k| {
                let u: f64 = rng.random();
                iv.lo + (k as f64 + u) / n as f64 * iv.width()
            })
            .collect();
        vals.shuffle(&mut rng);
        columns[dim] = vals;
    }

    Ok((0..n)
        .map(|i| ParameterVector::new(columns[0][i], columns[1][i], columns[2][i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stratum_indices(vals: &[f64], iv: Interval) -> Vec<usize> {
        let n = vals.len() as f64;
        let mut idx: Vec<usize> = vals
            .iter()
            .map(|v| (((v - iv.lo) / iv.width() * n) as usize).min(vals.len() - 1))
            .collect();
        idx.sort_unstable();
        idx
    }

    #[test]
    fn lhs_one_sample_per_stratum() {
        let bounds = ParameterBounds::default();
        for n in [1, 4, 20] {
            let sample = lhs_sample(n, &bounds, 7).unwrap();
            assert_eq!(sample.len(), n);
            for (dim, iv) in bounds.as_array().iter().enumerate() {
                let vals: Vec<f64> = sample.iter().map(|p| p.as_array()[dim]).collect();
                let idx = stratum_indices(&vals, *iv);
                let expect: Vec<usize> = (0..n).collect();
                assert_eq!(idx, expect, "dimension {dim}, n = {n}");
            }
            for p in &sample {
                assert!(bounds.contains(p));
                assert!(p.is_finite());
            }
        }
    }

    #[test]
    fn lhs_deterministic() {
        let bounds = ParameterBounds::default();
        let a = lhs_sample(20, &bounds, 42).unwrap();
        let b = lhs_sample(20, &bounds, 42).unwrap();
        assert_eq!(a, b);
        let c = lhs_sample(20, &bounds, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lhs_rejects_empty_and_bad_bounds() {
        let bounds = ParameterBounds::default();
        assert!(matches!(
            lhs_sample(0, &bounds, 1),
            Err(WavecalError::EmptyRequest(_))
        ));
        let mut bad = bounds;
        bad.drg = Interval { lo: 2.0, hi: 2.0 };
        assert!(matches!(
            lhs_sample(4, &bad, 1),
            Err(WavecalError::Bounds(_))
        ));
    }

    #[test]
    fn clamp_cases() {
        let bounds = ParameterBounds::default();
        let default = ParameterVector::default_configuration();
        assert_eq!(clamp(&default, &bounds), default);

        let low = ParameterVector::new(0.0, 0.015, 0.00302);
        let clamped = clamp(&low, &bounds);
        assert_eq!(clamped.drg, bounds.drg.lo);
        assert_eq!(clamped.cfw, 0.015);
        assert_eq!(clamped.stpm, 0.00302);

        let high = ParameterVector::new(10.0, 10.0, 10.0);
        let clamped = clamp(&high, &bounds);
        assert_eq!(
            clamped,
            ParameterVector::new(bounds.drg.hi, bounds.cfw.hi, bounds.stpm.hi)
        );

        // idempotent
        assert_eq!(clamp(&clamped, &bounds), clamped);
    }

    #[test]
    fn default_configuration_inside_default_bounds() {
        let bounds = ParameterBounds::default();
        assert!(bounds.contains(&ParameterVector::default_configuration()));
    }
}

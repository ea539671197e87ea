//! Robust evolutionary calibration of wind-wave model parameters:
//! a multi-objective evolutionary engine, an ensemble-based robust
//! fitness, correlated wind-forcing noise, a closed-form surrogate wave
//! model (plus an external-process adapter) and an experiment harness.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod params;
pub mod robust;
pub mod scenario;
pub mod series;
pub mod spea2;
pub mod synth;
pub mod util;
pub mod wind;

pub use error::{Result, WavecalError};
pub use params::{ParameterBounds, ParameterVector};

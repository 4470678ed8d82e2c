//! Shared fixtures for the benchmarks.

use arta_core::synth::{generate, SynthSpec};
use arta_core::{Normalizer, TimeSeries, TrainConfig};

/// Normalised default synthetic series.
pub fn series() -> TimeSeries {
    let s = generate(&SynthSpec::default())
        .expect("default synth spec is valid")
        .series;
    Normalizer::fit(&s).apply(&s).expect("same shape")
}

pub fn config() -> TrainConfig {
    TrainConfig {
        joint_epochs: 30,
        ..TrainConfig::default()
    }
}

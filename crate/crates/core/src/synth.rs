//! Labelled synthetic multivariate series: sinusoids plus AR(1) noise with
//! spikes and level shifts injected after the training split.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::TimeSeries;
use crate::error::{ArtaError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Spike,
    LevelShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectedAnomaly {
    pub start: usize,
    pub len: usize,
    pub kind: AnomalyKind,
    pub sensors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub len: usize,
    pub features: usize,
    pub anomalies: usize,
    /// Anomalies are placed at or after `train_fraction · len`.
    pub train_fraction: f64,
    /// Minimum clean gap between consecutive anomalies.
    pub min_gap: usize,
    pub noise_sd: f64,
    pub ar_rho: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            len: 5000,
            features: 5,
            anomalies: 20,
            train_fraction: 0.5,
            min_gap: 100,
            noise_sd: 0.1,
            ar_rho: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSeries {
    pub series: TimeSeries,
    pub anomalies: Vec<InjectedAnomaly>,
}

/// Generates the series. Anomaly `k` starts inside the `k`-th of equal
/// slots covering the test region, leaving at least `min_gap` clean points
/// before it.
pub fn generate(spec: &SynthSpec) -> Result<SynthSeries> {
    let f = spec.features;
    if f == 0 || spec.len == 0 {
        return Err(ArtaError::config(
            "synthetic series needs ≥ 1 sensor and ≥ 1 point",
        ));
    }
    let split = (spec.len as f64 * spec.train_fraction).floor() as usize;
    let slot = if spec.anomalies == 0 {
        0
    } else {
        (spec.len - split) / spec.anomalies
    };
    const MAX_LEN: usize = 15;
    if spec.anomalies > 0 && slot < spec.min_gap + MAX_LEN + 1 {
        return Err(ArtaError::config(format!(
            "{} anomalies do not fit after row {split} with gaps of {}",
            spec.anomalies, spec.min_gap
        )));
    }
    let mut r = rng::derive(spec.seed, rng::stream::SYNTH);
    let mut values = vec![0.0f32; spec.len * f];
    for s in 0..f {
        let period = r.random_range(20.0..80.0f64);
        let phase = r.random_range(0.0..std::f64::consts::TAU);
        let amp = r.random_range(0.5..1.5f64);
        let harmonic = r.random_range(0.0..0.4f64);
        let innov = spec.noise_sd * (1.0 - spec.ar_rho * spec.ar_rho).sqrt();
        let mut n = spec.noise_sd * r.sample::<f64, _>(StandardNormal);
        for t in 0..spec.len {
            if t > 0 {
                n = spec.ar_rho * n + innov * r.sample::<f64, _>(StandardNormal);
            }
            let w = std::f64::consts::TAU * t as f64 / period;
            values[t * f + s] = (amp * ((w + phase).sin() + harmonic * (2.0 * w).sin()) + n) as f32;
        }
    }

    let mut labels = vec![0u8; spec.len];
    let mut anomalies = Vec::with_capacity(spec.anomalies);
    for k in 0..spec.anomalies {
        let slot_start = split + k * slot;
        let kind = if k % 2 == 0 {
            AnomalyKind::Spike
        } else {
            AnomalyKind::LevelShift
        };
        let len = match kind {
            AnomalyKind::Spike => r.random_range(1..=3),
            AnomalyKind::LevelShift => r.random_range(5..=MAX_LEN),
        };
        let start = slot_start + spec.min_gap + r.random_range(0..=slot - spec.min_gap - MAX_LEN);
        let count = r.random_range(2.min(f)..=f.min(3));
        let sensors = sample(&mut r, f, count.max(1)).into_vec();
        for &s in &sensors {
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            let mag = match kind {
                AnomalyKind::Spike => r.random_range(4.0..6.0f32),
                AnomalyKind::LevelShift => r.random_range(2.5..3.5f32),
            };
            for t in start..start + len {
                values[t * f + s] += sign * mag;
            }
        }
        labels[start..start + len].iter_mut().for_each(|l| *l = 1);
        anomalies.push(InjectedAnomaly {
            start,
            len,
            kind,
            sensors,
        });
    }
    let names = (0..f).map(|i| format!("s{i}")).collect();
    Ok(SynthSeries {
        series: TimeSeries::new(values, f, Some(labels), names)?,
        anomalies,
    })
}

//! Test-time noise injection: white Gaussian and AR(1) noise at a target SNR,
//! and salt-and-pepper replacement.
//!
//! SNR targets are met per sensor: sensor `f` with mean-square power `P_f`
//! receives noise of (stationary) variance `P_f / 10^(snr/10)`. A sensor
//! with zero power receives no noise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::TimeSeries;
use crate::error::{ArtaError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    SaltPepper,
    Colored,
}

impl FromStr for NoiseKind {
    type Err = ArtaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "salt_pepper" => Ok(NoiseKind::SaltPepper),
            "colored" => Ok(NoiseKind::Colored),
            _ => Err(ArtaError::config(format!(
                "unknown noise kind {s:?} (gaussian|salt_pepper|colored)"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::SaltPepper => "salt_pepper",
            NoiseKind::Colored => "colored",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Target SNR in dB; `f64::INFINITY` means no noise.
    pub snr_db: Option<f64>,
    pub p: Option<f64>,
    pub rho: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_RHO: f64 = 0.5;

    pub fn gaussian(snr_db: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            snr_db: Some(snr_db),
            p: None,
            rho: Self::DEFAULT_RHO,
            seed,
        }
    }

    pub fn colored(snr_db: f64, rho: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Colored,
            snr_db: Some(snr_db),
            p: None,
            rho,
            seed,
        }
    }

    pub fn salt_pepper(p: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::SaltPepper,
            snr_db: None,
            p: Some(p),
            rho: Self::DEFAULT_RHO,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::Gaussian | NoiseKind::Colored => {
                let snr = self.snr_db.ok_or_else(|| {
                    ArtaError::config(format!("{} noise needs snr_db", self.kind))
                })?;
                check_snr(snr)?;
            }
            NoiseKind::SaltPepper => {
                check_p(
                    self.p
                        .ok_or_else(|| ArtaError::config("salt_pepper noise needs p"))?,
                )?;
            }
        }
        check_rho(self.rho)
    }
}

fn check_snr(snr_db: f64) -> Result<()> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(ArtaError::config(format!("invalid snr_db {snr_db}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ArtaError::config(format!("p must be in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(ArtaError::config(format!("|rho| must be < 1, got {rho}")));
    }
    Ok(())
}

/// Per-sensor noise variances for `snr_db`.
fn noise_variances(ts: &TimeSeries, snr_db: f64) -> Result<Vec<f64>> {
    let n = ts.len() as f64;
    let power: Vec<f64> = (0..ts.features())
        .map(|f| ts.column(f).map(|v| (v as f64).powi(2)).sum::<f64>() / n)
        .collect();
    if power.iter().all(|&p| p == 0.0) {
        return Err(ArtaError::config("signal power is zero; SNR is undefined"));
    }
    let ratio = 10f64.powf(snr_db / 10.0);
    Ok(power.into_iter().map(|p| p / ratio).collect())
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    rng::derive(seed, rng::stream::CORRUPTION)
}

/// Adds i.i.d. `N(0, σ_f²)` noise with `σ_f² = P_f / 10^(snr_db/10)`.
pub fn add_gaussian(ts: &TimeSeries, snr_db: f64, seed: u64) -> Result<TimeSeries> {
    add_colored_inner(ts, snr_db, 0.0, seed)
}

/// Adds AR(1) noise `n_t = ρ n_{t−1} + ε_t` whose stationary variance meets
/// the target SNR. `n_0` is drawn from the stationary distribution.
pub fn add_colored(ts: &TimeSeries, snr_db: f64, rho: f64, seed: u64) -> Result<TimeSeries> {
    check_rho(rho)?;
    add_colored_inner(ts, snr_db, rho, seed)
}

fn add_colored_inner(ts: &TimeSeries, snr_db: f64, rho: f64, seed: u64) -> Result<TimeSeries> {
    check_snr(snr_db)?;
    if snr_db == f64::INFINITY {
        return Ok(ts.clone());
    }
    let var = noise_variances(ts, snr_db)?;
    let mut r = noise_rng(seed);
    let mut out = ts.clone();
    let f = ts.features();
    let innovation = (1.0 - rho * rho).sqrt();
    for (col, v) in var.iter().enumerate() {
        let sd = v.sqrt();
        let mut n = sd * r.sample::<f64, _>(StandardNormal);
        for t in 0..ts.len() {
            if t > 0 {
                n = rho * n + sd * innovation * r.sample::<f64, _>(StandardNormal);
            }
            let cell = &mut out.values_mut()[t * f + col];
            *cell = (*cell as f64 + n) as f32;
        }
    }
    Ok(out)
}

/// Replaces each cell independently with probability `p` by its sensor's
/// minimum or maximum over `ts` (each with probability ½).
pub fn add_salt_pepper(ts: &TimeSeries, p: f64, seed: u64) -> Result<TimeSeries> {
    check_p(p)?;
    let f = ts.features();
    let mut lo = vec![f32::INFINITY; f];
    let mut hi = vec![f32::NEG_INFINITY; f];
    for row in ts.values().chunks_exact(f) {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    let mut r = noise_rng(seed);
    let mut out = ts.clone();
    for (i, cell) in out.values_mut().iter_mut().enumerate() {
        if r.random::<f64>() < p {
            *cell = if r.random::<bool>() {
                hi[i % f]
            } else {
                lo[i % f]
            };
        }
    }
    Ok(out)
}

/// Applies `spec` to the whole series.
pub fn corrupt(ts: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    spec.validate()?;
    match spec.kind {
        NoiseKind::Gaussian => add_gaussian(ts, spec.snr_db.expect("validated"), spec.seed),
        NoiseKind::Colored => add_colored(ts, spec.snr_db.expect("validated"), spec.rho, spec.seed),
        NoiseKind::SaltPepper => add_salt_pepper(ts, spec.p.expect("validated"), spec.seed),
    }
}

/// Applies `spec` to rows `start..` only; earlier rows and labels are kept.
/// Powers and extreme values are taken from the corrupted part.
pub fn corrupt_from(ts: &TimeSeries, start: usize, spec: &NoiseSpec) -> Result<TimeSeries> {
    if start >= ts.len() {
        return Err(ArtaError::config(format!(
            "corruption start {start} is past the end of a {}-row series",
            ts.len()
        )));
    }
    if start == 0 {
        return corrupt(ts, spec);
    }
    let head = ts.slice(0, start)?;
    let tail = corrupt(&ts.slice(start, ts.len())?, spec)?;
    head.concat(&tail)
}

/// `10 log10(Σ x² / Σ (x̃ − x)²)`; `+∞` when the two series are identical.
pub fn measure_snr(clean: &TimeSeries, corrupted: &TimeSeries) -> Result<f64> {
    if clean.len() != corrupted.len() || clean.features() != corrupted.features() {
        return Err(ArtaError::config("measure_snr needs equally shaped series"));
    }
    let (mut s, mut n) = (0.0f64, 0.0f64);
    for (&a, &b) in clean.values().iter().zip(corrupted.values()) {
        s += (a as f64).powi(2);
        n += (b as f64 - a as f64).powi(2);
    }
    if n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (s / n).log10())
}

/// Default salt-and-pepper probabilities for robustness sweeps.
pub const DEFAULT_P_GRID: [f64; 5] = [0.01, 0.05, 0.10, 0.15, 0.20];
/// Default SNR levels (dB) for robustness sweeps, mild to severe.
pub const DEFAULT_SNR_GRID: [f64; 5] = [30.0, 25.0, 20.0, 15.0, 10.0];

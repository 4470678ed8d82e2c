//! Empirical checks of the stability bounds for sparse baseline-aware masking.
//!
//! The detector's Lipschitz constant (with respect to `ℓ₁`) is not known in
//! closed form, so it is estimated by sampling. The reports quantify how
//! often the bounds built on that estimate are violated; they prove nothing.

use rand::Rng;

use crate::data::baseline_into;
use crate::detector::{anomaly_scores_batch, Aggregator, DetectorParams};
use crate::error::{ArtaError, Result};
use crate::generator::{mask_into, GeneratorKernel, GeneratorParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub l_hat: f64,
    pub samples: usize,
    pub eps_scale: f64,
}

/// Mean-aggregated detector scores for a batch of `T × F` inputs.
pub fn detector_scores<'a>(
    detector: &'a DetectorParams,
    steps: usize,
) -> impl FnMut(&[&[f32]]) -> Result<Vec<f64>> + 'a {
    move |inputs| anomaly_scores_batch(detector, inputs, steps, Aggregator::Mean)
}

fn l1(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum()
}

/// `max |A(X + δ) − A(X)| / ‖δ‖₁` over `n_pairs` perturbations with `δ`
/// uniform in `[−eps_scale, eps_scale]`, cycling through `windows`.
pub fn estimate_lipschitz<F>(
    mut score: F,
    windows: &[&[f32]],
    n_pairs: usize,
    eps_scale: f64,
    seed: u64,
) -> Result<LipschitzEstimate>
where
    F: FnMut(&[&[f32]]) -> Result<Vec<f64>>,
{
    if windows.is_empty() {
        return Err(ArtaError::config(
            "no windows to estimate a Lipschitz constant on",
        ));
    }
    if !(eps_scale > 0.0) {
        return Err(ArtaError::config("eps_scale must be > 0"));
    }
    let mut r = rng::derive(seed, rng::stream::STABILITY);
    let eps = eps_scale as f32;
    let perturbed: Vec<Vec<f32>> = (0..n_pairs)
        .map(|k| {
            windows[k % windows.len()]
                .iter()
                .map(|&v| v + r.random_range(-eps..=eps))
                .collect()
        })
        .collect();
    let base = score(windows)?;
    let moved = score(&perturbed.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    let mut l_hat = 0.0f64;
    for (k, p) in perturbed.iter().enumerate() {
        let w = windows[k % windows.len()];
        let d = l1(w, p);
        if d > 0.0 {
            l_hat = l_hat.max((moved[k] - base[k % windows.len()]).abs() / d);
        }
    }
    Ok(LipschitzEstimate {
        l_hat,
        samples: n_pairs,
        eps_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Trial {
    pub trial: usize,
    /// `|A(X̃_δ) − A(X̃)|`.
    pub deviation: f64,
    /// `L̂ · ε · ‖m‖₁ · F`.
    pub bound: f64,
}

impl Theorem1Trial {
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.deviation / self.bound
        } else if self.deviation == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn violated(&self) -> bool {
        self.deviation > self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub eps: f64,
    pub l_hat: f64,
    pub trials: Vec<Theorem1Trial>,
}

impl StabilityReport {
    pub fn violation_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.violated()).count() as f64 / self.trials.len() as f64
    }

    pub fn max_ratio(&self) -> f64 {
        self.trials
            .iter()
            .map(Theorem1Trial::ratio)
            .fold(0.0, f64::max)
    }

    /// Ratio quantiles `(q50, q90, q99, max)`.
    pub fn ratio_quantiles(&self) -> [f64; 4] {
        let mut r: Vec<f64> = self.trials.iter().map(Theorem1Trial::ratio).collect();
        if r.is_empty() {
            return [0.0; 4];
        }
        r.sort_by(f64::total_cmp);
        let q = |p: f64| r[((r.len() - 1) as f64 * p).round() as usize];
        [q(0.5), q(0.9), q(0.99), q(1.0)]
    }

    /// `trial,deviation,bound,ratio,violated` rows after a `# seed=…` comment.
    pub fn to_csv(&self, seed: u64) -> String {
        let mut s = format!(
            "# seed={seed} eps={} l_hat={:e} violation_rate={}\ntrial,deviation,bound,ratio,violated\n",
            self.eps,
            self.l_hat,
            self.violation_rate()
        );
        for t in &self.trials {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                t.trial,
                t.deviation,
                t.bound,
                t.ratio(),
                u8::from(t.violated())
            ));
        }
        s
    }
}

/// Masked windows `X̃ = m ⊙ X + (1 − m) ⊙ B` and their masks.
fn masked_windows(
    generator: &GeneratorParams,
    windows: &[&[f32]],
    steps: usize,
    zero_baseline: bool,
) -> (Vec<Vec<f32>>, Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let f = generator.features();
    let gk = GeneratorKernel::<f32>::new(generator);
    let mut masks = Vec::new();
    let mut bases = Vec::new();
    let mut masked = Vec::new();
    for w in windows {
        let m = gk.forward(w, 1, steps).mask;
        let mut b = vec![0.0f32; w.len()];
        if !zero_baseline {
            baseline_into(w, steps, f, &mut b);
        }
        let mut xt = vec![0.0f32; w.len()];
        mask_into(w, &m, &b, f, &mut xt);
        masks.push(m);
        bases.push(b);
        masked.push(xt);
    }
    (masks, bases, masked)
}

/// Compares `|A(X̃_δ) − A(X̃)|` against `L̂ · ε · ‖m‖₁ · F` over `n_trials`
/// perturbations `δ` uniform in `[−ε, ε]`. `X̃_δ` masks `X + δ` against the
/// baseline of the unperturbed window. Trial 0 uses `δ = 0`.
#[allow(clippy::too_many_arguments)]
pub fn check_theorem1<F>(
    mut score: F,
    generator: &GeneratorParams,
    windows: &[&[f32]],
    steps: usize,
    eps: f64,
    n_trials: usize,
    l_hat: f64,
    zero_baseline: bool,
    seed: u64,
) -> Result<StabilityReport>
where
    F: FnMut(&[&[f32]]) -> Result<Vec<f64>>,
{
    if !(eps > 0.0) {
        return Err(ArtaError::config("eps must be > 0"));
    }
    if windows.is_empty() && n_trials > 0 {
        return Err(ArtaError::config("no windows for the stability check"));
    }
    let f = generator.features();
    let (masks, bases, masked) = masked_windows(generator, windows, steps, zero_baseline);
    let mut r = rng::derive_indexed(seed, rng::stream::STABILITY, 1);
    let e = eps as f32;
    let mut perturbed = Vec::with_capacity(n_trials);
    for k in 0..n_trials {
        let i = k % windows.len();
        let x: Vec<f32> = windows[i]
            .iter()
            .map(|&v| {
                if k == 0 {
                    v
                } else {
                    v + r.random_range(-e..=e)
                }
            })
            .collect();
        let mut xt = vec![0.0f32; x.len()];
        mask_into(&x, &masks[i], &bases[i], f, &mut xt);
        perturbed.push(xt);
    }
    let base = score(&masked.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    let moved = score(&perturbed.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    let trials = (0..n_trials)
        .map(|k| {
            let i = k % windows.len();
            let m1: f64 = masks[i].iter().map(|&v| v as f64).sum();
            Theorem1Trial {
                trial: k,
                deviation: (moved[k] - base[i]).abs(),
                bound: l_hat * eps * m1 * f as f64,
            }
        })
        .collect();
    Ok(StabilityReport { eps, l_hat, trials })
}

/// One sampled mask pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityPair {
    /// `‖X̃₁ − X̃₂‖₁`.
    pub diameter: f64,
    /// `2k · F · ‖X − B‖_∞`.
    pub bound: f64,
    /// `‖X − B‖_∞ · ‖m₁ − m₂‖₁ · F`, the intermediate Hölder bound.
    pub holder: f64,
    /// `|A(X̃₁) − A(X̃₂)|`, when a score function was supplied.
    pub score_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub k: f64,
    pub l_hat: Option<f64>,
    pub pairs: Vec<CapacityPair>,
}

impl CapacityReport {
    /// Pairs with `diameter > 2k · F · ‖X − B‖_∞`.
    pub fn violations(&self) -> usize {
        self.pairs.iter().filter(|p| p.diameter > p.bound).count()
    }

    /// Pairs with `diameter > ‖X − B‖_∞ · ‖m₁ − m₂‖₁ · F`.
    pub fn holder_violations(&self) -> usize {
        self.pairs.iter().filter(|p| p.diameter > p.holder).count()
    }

    /// Fraction of pairs whose score difference exceeds `L̂ · diameter`.
    pub fn score_violation_rate(&self) -> Option<f64> {
        let l = self.l_hat?;
        let scored: Vec<f64> = self
            .pairs
            .iter()
            .filter_map(|p| p.score_diff.map(|d| d - l * p.diameter))
            .collect();
        if scored.is_empty() {
            return None;
        }
        Some(scored.iter().filter(|&&e| e > 0.0).count() as f64 / scored.len() as f64)
    }
}

/// Draws a mask in `[0, 1]^T` and scales it down so `‖m‖₁ ≤ k`.
pub fn sparse_mask<R: Rng>(steps: usize, k: f64, r: &mut R) -> Vec<f64> {
    let mut m: Vec<f64> = (0..steps).map(|_| r.random::<f64>()).collect();
    let s: f64 = m.iter().sum();
    if s > k {
        m.iter_mut().for_each(|v| *v *= k / s);
    }
    m
}

/// Samples `n_pairs` mask pairs with `‖m‖₁ ≤ k` and measures the spread of
/// the masked windows (computed in `f64`) against the capacity bound. With a
/// score function and `l_hat`, the score spread is recorded as well.
#[allow(clippy::too_many_arguments)]
pub fn check_capacity<F>(
    x: &[f32],
    baseline: &[f32],
    steps: usize,
    k: f64,
    n_pairs: usize,
    seed: u64,
    mut score: Option<F>,
    l_hat: Option<f64>,
) -> Result<CapacityReport>
where
    F: FnMut(&[&[f32]]) -> Result<Vec<f64>>,
{
    if steps == 0 || x.len() % steps != 0 || baseline.len() != x.len() {
        return Err(ArtaError::config("window and baseline must both be T × F"));
    }
    if !(k >= 0.0) {
        return Err(ArtaError::config("k must be ≥ 0"));
    }
    let f = x.len() / steps;
    let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let b64: Vec<f64> = baseline.iter().map(|&v| v as f64).collect();
    let dev_inf = x64
        .iter()
        .zip(&b64)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let apply = |m: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| b64[i] + m[i / f] * (x64[i] - b64[i]))
            .collect()
    };
    let mut r = rng::derive_indexed(seed, rng::stream::STABILITY, 2);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut inputs: Vec<Vec<f32>> = Vec::new();
    for _ in 0..n_pairs {
        let m1 = sparse_mask(steps, k, &mut r);
        let m2 = sparse_mask(steps, k, &mut r);
        let (a, b) = (apply(&m1), apply(&m2));
        let diameter: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum();
        let dm: f64 = m1.iter().zip(&m2).map(|(p, q)| (p - q).abs()).sum();
        pairs.push(CapacityPair {
            diameter,
            bound: 2.0 * k * f as f64 * dev_inf,
            holder: dev_inf * dm * f as f64,
            score_diff: None,
        });
        if score.is_some() {
            inputs.push(a.iter().map(|&v| v as f32).collect());
            inputs.push(b.iter().map(|&v| v as f32).collect());
        }
    }
    if let Some(s) = score.as_mut() {
        let out = s(&inputs.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        for (p, d) in pairs.iter_mut().zip(out.chunks_exact(2)) {
            p.score_diff = Some((d[0] - d[1]).abs());
        }
    }
    Ok(CapacityReport { k, l_hat, pairs })
}

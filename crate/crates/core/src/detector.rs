//! LSTM autoencoder detector.
//!
//! The encoder reads the `T × F` window; its final hidden state `z` is fed to
//! the decoder at every one of the `T` steps; a linear projection maps each
//! decoder state back to `F` outputs. Reconstruction error is the anomaly
//! signal.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::data::Window;
use crate::error::{ArtaError, Result};
use crate::numerics::linear::LinearKernel;
use crate::numerics::loss::mse;
use crate::numerics::lstm::{self, LstmGrads, LstmKernel, LstmTape, SeqInput};
use crate::numerics::scalar::{to_f32, Scalar};
use crate::numerics::{normalize_spectral, LinearParams, LstmParams, SpectralState, Tensor};

/// Trainable tensors of the detector. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorWeights {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub projection: LinearParams,
}

impl DetectorWeights {
    pub fn zeros(features: usize, hidden: usize) -> Self {
        Self {
            encoder: LstmParams::zeros(features, hidden),
            decoder: LstmParams::zeros(hidden, hidden),
            projection: LinearParams::zeros(hidden, features),
        }
    }

    pub fn init<R: Rng>(features: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f32).sqrt();
        let encoder = LstmParams::init_uniform(features, hidden, rng);
        let decoder = LstmParams::init_uniform(hidden, hidden, rng);
        let mut projection = LinearParams::zeros(hidden, features);
        for t in projection.tensors_mut() {
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Self {
            encoder,
            decoder,
            projection,
        }
    }

    pub fn features(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub const NAMES: [&'static str; 8] = [
        "encoder.w_ih",
        "encoder.w_hh",
        "encoder.b",
        "decoder.w_ih",
        "decoder.w_hh",
        "decoder.b",
        "projection.w",
        "projection.b",
    ];

    pub fn tensors(&self) -> Vec<&Tensor> {
        let [a, b, c] = self.encoder.tensors();
        let [d, e, f] = self.decoder.tensors();
        let [g, h] = self.projection.tensors();
        vec![a, b, c, d, e, f, g, h]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [a, b, c] = self.encoder.tensors_mut();
        let [d, e, f] = self.decoder.tensors_mut();
        let [g, h] = self.projection.tensors_mut();
        vec![a, b, c, d, e, f, g, h]
    }

    /// Rebuilds from tensors in [`Self::NAMES`] order.
    pub fn from_tensors(t: Vec<Tensor>) -> Result<Self> {
        let [a, b, c, d, e, f, g, h]: [Tensor; 8] = t
            .try_into()
            .map_err(|_| ArtaError::config("detector needs exactly 8 tensors"))?;
        let w = Self {
            encoder: LstmParams {
                w_ih: a,
                w_hh: b,
                b: c,
            },
            decoder: LstmParams {
                w_ih: d,
                w_hh: e,
                b: f,
            },
            projection: LinearParams { w: g, b: h },
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        self.projection.validate()?;
        let h = self.hidden();
        if self.decoder.input_size() != h || self.decoder.hidden_size() != h {
            return Err(ArtaError::config("decoder must be H → H"));
        }
        if self.projection.input_size() != h || self.projection.output_size() != self.features() {
            return Err(ArtaError::config("projection must map H → F"));
        }
        Ok(())
    }

    /// The weight matrices under spectral normalisation, in a fixed order.
    pub fn spectral_matrices_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.encoder.w_ih,
            &mut self.encoder.w_hh,
            &mut self.decoder.w_ih,
            &mut self.decoder.w_hh,
            &mut self.projection.w,
        ]
    }

    pub fn spectral_matrices(&self) -> [&Tensor; 5] {
        [
            &self.encoder.w_ih,
            &self.encoder.w_hh,
            &self.decoder.w_ih,
            &self.decoder.w_hh,
            &self.projection.w,
        ]
    }
}

/// Detector weights plus one power-iteration state per weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub weights: DetectorWeights,
    pub spectral: Vec<SpectralState>,
}

impl DetectorParams {
    pub fn new(weights: DetectorWeights, spectral: Vec<SpectralState>) -> Result<Self> {
        let rows: Vec<usize> = weights
            .spectral_matrices()
            .iter()
            .map(|m| m.rows())
            .collect();
        if spectral.len() != rows.len() || spectral.iter().zip(&rows).any(|(s, &r)| s.u.len() != r)
        {
            return Err(ArtaError::config(
                "spectral states do not match detector matrices",
            ));
        }
        Ok(Self { weights, spectral })
    }

    /// Fresh spectral states for the given weights.
    pub fn with_weights<R: Rng>(weights: DetectorWeights, rng: &mut R) -> Self {
        let spectral = weights
            .spectral_matrices()
            .iter()
            .map(|m| SpectralState::new(m.rows(), rng))
            .collect();
        Self { weights, spectral }
    }

    pub fn features(&self) -> usize {
        self.weights.features()
    }

    pub fn hidden(&self) -> usize {
        self.weights.hidden()
    }
}

/// Divides every detector weight matrix by its power-iteration spectral norm
/// estimate (`iters` iterations from the persistent state). Biases are not
/// touched. Returns the estimates.
pub fn apply_spectral_normalization(params: &mut DetectorParams, iters: usize) -> Vec<f64> {
    apply_spectral_normalization_to(params, iters, 1.0)
}

/// Like [`apply_spectral_normalization`] but rescales every matrix to
/// spectral norm `target` instead of 1.
pub fn apply_spectral_normalization_to(
    params: &mut DetectorParams,
    iters: usize,
    target: f32,
) -> Vec<f64> {
    let DetectorParams { weights, spectral } = params;
    weights
        .spectral_matrices_mut()
        .into_iter()
        .zip(spectral.iter_mut())
        .map(|(w, st)| {
            let s = normalize_spectral(w, st, iters);
            if target != 1.0 && s >= 1e-12 {
                w.scale(target);
            }
            s
        })
        .collect()
}

/// Temporal aggregation of point-wise scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
    Max,
}

impl FromStr for Aggregator {
    type Err = ArtaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "max" => Ok(Aggregator::Max),
            _ => Err(ArtaError::config(format!(
                "unknown aggregator {s:?} (mean|max)"
            ))),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
        })
    }
}

/// Per-timestamp reconstruction error averaged over sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScores(pub Vec<f64>);

pub(crate) struct DetectorKernel<S> {
    pub enc: LstmKernel<S>,
    pub dec: LstmKernel<S>,
    pub proj: LinearKernel<S>,
}

pub(crate) struct DetectorTape<S> {
    pub batch: usize,
    pub steps: usize,
    pub enc: LstmTape<S>,
    pub dec: LstmTape<S>,
    /// `B × T × F`.
    pub recon: Vec<S>,
}

pub(crate) struct DetectorGrads<S> {
    pub enc: LstmGrads<S>,
    pub dec: LstmGrads<S>,
    pub proj_w: Vec<S>,
    pub proj_b: Vec<S>,
}

impl<S: Scalar> DetectorGrads<S> {
    pub fn zeros(k: &DetectorKernel<S>) -> Self {
        Self {
            enc: LstmGrads::zeros(&k.enc),
            dec: LstmGrads::zeros(&k.dec),
            proj_w: vec![S::zero(); k.proj.w.len()],
            proj_b: vec![S::zero(); k.proj.b.len()],
        }
    }

    pub fn into_weights(self, features: usize, hidden: usize) -> DetectorWeights {
        DetectorWeights {
            encoder: self.enc.into_params(features, hidden),
            decoder: self.dec.into_params(hidden, hidden),
            projection: LinearParams {
                w: Tensor::new(vec![features, hidden], to_f32(&self.proj_w)).expect("grad shape"),
                b: Tensor::vector(to_f32(&self.proj_b)),
            },
        }
    }
}

impl<S: Scalar> DetectorKernel<S> {
    pub fn new(w: &DetectorWeights) -> Self {
        Self {
            enc: LstmKernel::new(&w.encoder),
            dec: LstmKernel::new(&w.decoder),
            proj: LinearKernel::new(&w.projection),
        }
    }

    pub fn features(&self) -> usize {
        self.enc.input
    }

    fn input(x: &[S], steps: usize, features: usize) -> SeqInput<'_, S> {
        SeqInput::Strided {
            data: x,
            batch_stride: steps * features,
            time_stride: features,
        }
    }

    /// Reconstructs a batch of windows laid out `B × T × F`.
    pub fn forward(&self, x: &[S], batch: usize, steps: usize) -> DetectorTape<S> {
        let f = self.features();
        debug_assert_eq!(x.len(), batch * steps * f);
        let enc = lstm::forward(&self.enc, Self::input(x, steps, f), batch, steps, None);
        let dec = lstm::forward(
            &self.dec,
            SeqInput::Repeated(enc.last_h()),
            batch,
            steps,
            None,
        );
        let y = self.proj.forward(dec.hidden_seq(), steps * batch);
        let mut recon = vec![S::zero(); batch * steps * f];
        for t in 0..steps {
            for b in 0..batch {
                let src = &y[(t * batch + b) * f..(t * batch + b + 1) * f];
                recon[(b * steps + t) * f..(b * steps + t + 1) * f].copy_from_slice(src);
            }
        }
        DetectorTape {
            batch,
            steps,
            enc,
            dec,
            recon,
        }
    }

    /// Back-propagates `d_recon` (`B × T × F`). Accumulates into `grads` and
    /// writes the input gradient into `d_x` when requested.
    pub fn backward(
        &self,
        x: &[S],
        tape: &DetectorTape<S>,
        d_recon: &[S],
        grads: Option<&mut DetectorGrads<S>>,
        d_x: Option<&mut [S]>,
    ) {
        let f = self.features();
        let (batch, steps) = (tape.batch, tape.steps);
        let mut dy = vec![S::zero(); batch * steps * f];
        for t in 0..steps {
            for b in 0..batch {
                dy[(t * batch + b) * f..(t * batch + b + 1) * f]
                    .copy_from_slice(&d_recon[(b * steps + t) * f..(b * steps + t + 1) * f]);
            }
        }
        let (proj_grads, enc_grads, dec_grads) = match grads {
            Some(g) => (
                Some((g.proj_w.as_mut_slice(), g.proj_b.as_mut_slice())),
                Some(&mut g.enc),
                Some(&mut g.dec),
            ),
            None => (None, None, None),
        };
        let d_hdec = self
            .proj
            .backward(tape.dec.hidden_seq(), &dy, steps * batch, proj_grads);
        let mut dz = vec![S::zero(); batch * self.dec.input];
        lstm::backward(
            &self.dec,
            SeqInput::Repeated(tape.enc.last_h()),
            &tape.dec,
            Some(&d_hdec),
            None,
            dec_grads,
            Some(&mut dz),
        );
        lstm::backward(
            &self.enc,
            Self::input(x, steps, f),
            &tape.enc,
            None,
            Some(&dz),
            enc_grads,
            d_x,
        );
    }
}

fn check_window(params: &DetectorParams, w: &Window<'_>) -> Result<()> {
    if w.features != params.features() {
        return Err(ArtaError::config(format!(
            "window has {} sensors, detector expects {}",
            w.features,
            params.features()
        )));
    }
    Ok(())
}

/// Reconstruction `D(w)` as a `T × F` tensor.
pub fn reconstruct(params: &DetectorParams, w: &Window<'_>) -> Result<Tensor> {
    check_window(params, w)?;
    let k = DetectorKernel::<f32>::new(&params.weights);
    let tape = k.forward(w.values, 1, w.steps);
    Tensor::new(vec![w.steps, w.features], tape.recon)
}

/// `a_t = (1/F) Σ_f (w_tf − ŵ_tf)²`.
pub fn pointwise_scores(params: &DetectorParams, w: &Window<'_>) -> Result<PointScores> {
    let recon = reconstruct(params, w)?;
    Ok(pointwise_from(w.values, recon.data(), w.features))
}

pub(crate) fn pointwise_from<S: Scalar>(x: &[S], recon: &[S], features: usize) -> PointScores {
    PointScores(
        x.chunks_exact(features)
            .zip(recon.chunks_exact(features))
            .map(|(a, b)| mse(a, b))
            .collect(),
    )
}

/// Aggregated score `A_D`. The mean aggregator is the window MSE itself.
pub fn anomaly_score(
    params: &DetectorParams,
    w: &Window<'_>,
    aggregator: Aggregator,
) -> Result<f64> {
    let recon = reconstruct(params, w)?;
    Ok(aggregate(w.values, recon.data(), w.features, aggregator))
}

pub(crate) fn aggregate<S: Scalar>(
    x: &[S],
    recon: &[S],
    features: usize,
    aggregator: Aggregator,
) -> f64 {
    match aggregator {
        Aggregator::Mean => mse(x, recon),
        Aggregator::Max => pointwise_from(x, recon, features)
            .0
            .into_iter()
            .fold(0.0, f64::max),
    }
}

/// `A_D` for each of a set of equally shaped `T × F` inputs, batched.
pub fn anomaly_scores_batch(
    params: &DetectorParams,
    inputs: &[&[f32]],
    steps: usize,
    aggregator: Aggregator,
) -> Result<Vec<f64>> {
    let f = params.features();
    let k = DetectorKernel::<f32>::new(&params.weights);
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(64) {
        let mut x = Vec::with_capacity(chunk.len() * steps * f);
        for w in chunk {
            if w.len() != steps * f {
                return Err(ArtaError::config("batch inputs must all be T × F"));
            }
            x.extend_from_slice(w);
        }
        let tape = k.forward(&x, chunk.len(), steps);
        let n = steps * f;
        for b in 0..chunk.len() {
            out.push(aggregate(
                &x[b * n..(b + 1) * n],
                &tape.recon[b * n..(b + 1) * n],
                f,
                aggregator,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{estimate_spectral_norm, loss_mse};
    use crate::rng;

    fn random_params(f: usize, h: usize, seed: u64) -> DetectorParams {
        let mut r = rng::derive(seed, 0);
        let w = DetectorWeights::init(f, h, &mut r);
        DetectorParams::with_weights(w, &mut r)
    }

    fn random_window(t: usize, f: usize, seed: u64) -> Vec<f32> {
        let mut r = rng::derive(seed, 9);
        (0..t * f).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_weights_reconstruct_bias() {
        let mut w = DetectorWeights::zeros(2, 4);
        w.projection.b.data_mut().copy_from_slice(&[0.25, -1.5]);
        let p = DetectorParams::with_weights(w, &mut rng::derive(0, 0));
        let vals = random_window(6, 2, 1);
        let win = Window::from_slice(&vals, 6, 2).unwrap();
        let r = reconstruct(&p, &win).unwrap();
        for t in 0..6 {
            assert_eq!(r.at(t, 0), 0.25);
            assert_eq!(r.at(t, 1), -1.5);
        }
    }

    #[test]
    fn deterministic_reconstruction() {
        let p = random_params(3, 5, 2);
        let vals = random_window(7, 3, 2);
        let win = Window::from_slice(&vals, 7, 3).unwrap();
        assert_eq!(
            reconstruct(&p, &win).unwrap(),
            reconstruct(&p, &win).unwrap()
        );
    }

    #[test]
    fn pointwise_arithmetic() {
        let x = [0.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let r = [0.0f32; 8];
        let ps = pointwise_from(&x, &r, 2);
        assert_eq!(ps.0, vec![0.0, 0.0, 0.0, 0.5]);
        assert_eq!(pointwise_from(&x, &x, 2).0, vec![0.0; 4]);
    }

    #[test]
    fn pointwise_matches_double_loop_and_mean_matches_mse() {
        let p = random_params(3, 6, 3);
        let vals = random_window(9, 3, 3);
        let win = Window::from_slice(&vals, 9, 3).unwrap();
        let recon = reconstruct(&p, &win).unwrap();
        let ps = pointwise_scores(&p, &win).unwrap();
        for t in 0..9 {
            let mut s = 0.0f64;
            for f in 0..3 {
                s += (vals[t * 3 + f] as f64 - recon.at(t, f) as f64).powi(2);
            }
            assert!((ps.0[t] - s / 3.0).abs() < 1e-7);
        }
        let mean = anomaly_score(&p, &win, Aggregator::Mean).unwrap();
        assert_eq!(mean, loss_mse(&win.to_tensor(), &recon).unwrap());
        let max = anomaly_score(&p, &win, Aggregator::Max).unwrap();
        assert!(max >= mean && mean >= 0.0);
    }

    #[test]
    fn aggregator_examples() {
        let x = [1.0f32, 2.0f32.sqrt(), 3.0f32.sqrt()];
        let r = [0.0f32; 3];
        assert!((aggregate(&x, &r, 1, Aggregator::Mean) - 2.0).abs() < 1e-6);
        assert!((aggregate(&x, &r, 1, Aggregator::Max) - 3.0).abs() < 1e-6);
        assert_eq!(aggregate(&r, &r, 1, Aggregator::Mean), 0.0);
    }

    #[test]
    fn spectral_normalization_bounds_every_matrix() {
        let mut p = random_params(3, 8, 4);
        apply_spectral_normalization(&mut p, 100);
        let mut r = rng::derive(40, 0);
        for m in p.weights.spectral_matrices() {
            let mut st = SpectralState::new(m.rows(), &mut r);
            let s = estimate_spectral_norm(m, &mut st, 200);
            assert!((0.95..=1.05).contains(&s), "sigma {s}");
        }
    }

    #[test]
    fn batch_scores_equal_single_scores() {
        let p = random_params(2, 4, 5);
        let a = random_window(5, 2, 6);
        let b = random_window(5, 2, 7);
        let batch = anomaly_scores_batch(&p, &[&a, &b], 5, Aggregator::Mean).unwrap();
        let sa =
            anomaly_score(&p, &Window::from_slice(&a, 5, 2).unwrap(), Aggregator::Mean).unwrap();
        assert!((batch[0] - sa).abs() < 1e-6);
    }

    #[test]
    fn rejects_wrong_sensor_count() {
        let p = random_params(2, 4, 5);
        let v = random_window(5, 3, 1);
        assert!(reconstruct(&p, &Window::from_slice(&v, 5, 3).unwrap()).is_err());
    }
}

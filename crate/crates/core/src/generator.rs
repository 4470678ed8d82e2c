//! Temporal mask generator and baseline-aware masking.
//!
//! An LSTM reads the window; a linear head on its final hidden state emits
//! `T` logits; a sigmoid turns them into a mask in `(0, 1)^T` that is shared
//! by all sensors. Masking blends each timestamp between the observation and
//! the window baseline: `x̃ = m·x + (1 − m)·b`.

use rand::Rng;

use crate::data::Window;
use crate::error::{ArtaError, Result};
use crate::numerics::linear::LinearKernel;
use crate::numerics::lstm::{self, LstmGrads, LstmKernel, LstmTape, SeqInput};
use crate::numerics::scalar::{sigmoid, to_f32, Scalar};
use crate::numerics::{LinearParams, LstmParams, Tensor};

/// Generator weights (not spectrally normalised). Also the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub lstm: LstmParams,
    pub head: LinearParams,
}

impl GeneratorParams {
    pub fn zeros(features: usize, hidden: usize, steps: usize) -> Self {
        Self {
            lstm: LstmParams::zeros(features, hidden),
            head: LinearParams::zeros(hidden, steps),
        }
    }

    pub fn init<R: Rng>(features: usize, hidden: usize, steps: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f32).sqrt();
        let lstm = LstmParams::init_uniform(features, hidden, rng);
        let mut head = LinearParams::zeros(hidden, steps);
        for t in head.tensors_mut() {
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Self { lstm, head }
    }

    pub fn steps(&self) -> usize {
        self.head.output_size()
    }

    pub fn features(&self) -> usize {
        self.lstm.input_size()
    }

    pub const NAMES: [&'static str; 5] = ["lstm.w_ih", "lstm.w_hh", "lstm.b", "head.w", "head.b"];

    pub fn tensors(&self) -> Vec<&Tensor> {
        let [a, b, c] = self.lstm.tensors();
        let [d, e] = self.head.tensors();
        vec![a, b, c, d, e]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [a, b, c] = self.lstm.tensors_mut();
        let [d, e] = self.head.tensors_mut();
        vec![a, b, c, d, e]
    }

    pub fn from_tensors(t: Vec<Tensor>) -> Result<Self> {
        let [a, b, c, d, e]: [Tensor; 5] = t
            .try_into()
            .map_err(|_| ArtaError::config("generator needs exactly 5 tensors"))?;
        let g = Self {
            lstm: LstmParams {
                w_ih: a,
                w_hh: b,
                b: c,
            },
            head: LinearParams { w: d, b: e },
        };
        g.lstm.validate()?;
        g.head.validate()?;
        if g.head.input_size() != g.lstm.hidden_size() {
            return Err(ArtaError::config(
                "generator head must take the LSTM hidden state",
            ));
        }
        Ok(g)
    }
}

/// Mask values, one per timestamp, strictly inside `(0, 1)` when produced by
/// the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMask(pub Vec<f32>);

impl TemporalMask {
    pub fn constant(steps: usize, value: f32) -> Self {
        Self(vec![value; steps])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) struct GeneratorKernel<S> {
    pub lstm: LstmKernel<S>,
    pub head: LinearKernel<S>,
}

pub(crate) struct GeneratorTape<S> {
    pub batch: usize,
    pub steps: usize,
    pub lstm: LstmTape<S>,
    /// `B × T`.
    pub mask: Vec<S>,
}

pub(crate) struct GeneratorGrads<S> {
    pub lstm: LstmGrads<S>,
    pub head_w: Vec<S>,
    pub head_b: Vec<S>,
}

impl<S: Scalar> GeneratorGrads<S> {
    pub fn zeros(k: &GeneratorKernel<S>) -> Self {
        Self {
            lstm: LstmGrads::zeros(&k.lstm),
            head_w: vec![S::zero(); k.head.w.len()],
            head_b: vec![S::zero(); k.head.b.len()],
        }
    }

    pub fn into_params(self, features: usize, hidden: usize, steps: usize) -> GeneratorParams {
        GeneratorParams {
            lstm: self.lstm.into_params(features, hidden),
            head: LinearParams {
                w: Tensor::new(vec![steps, hidden], to_f32(&self.head_w)).expect("grad shape"),
                b: Tensor::vector(to_f32(&self.head_b)),
            },
        }
    }
}

impl<S: Scalar> GeneratorKernel<S> {
    pub fn new(p: &GeneratorParams) -> Self {
        Self {
            lstm: LstmKernel::new(&p.lstm),
            head: LinearKernel::new(&p.head),
        }
    }

    fn input<'x>(&self, x: &'x [S], steps: usize) -> SeqInput<'x, S> {
        let f = self.lstm.input;
        SeqInput::Strided {
            data: x,
            batch_stride: steps * f,
            time_stride: f,
        }
    }

    /// Masks for a `B × T × F` batch.
    pub fn forward(&self, x: &[S], batch: usize, steps: usize) -> GeneratorTape<S> {
        let tape = lstm::forward(&self.lstm, self.input(x, steps), batch, steps, None);
        let logits = self.head.forward(tape.last_h(), batch);
        GeneratorTape {
            batch,
            steps,
            lstm: tape,
            mask: logits.into_iter().map(sigmoid).collect(),
        }
    }

    /// Back-propagates `d_mask` (`B × T`) into `grads`.
    pub fn backward(
        &self,
        x: &[S],
        tape: &GeneratorTape<S>,
        d_mask: &[S],
        grads: &mut GeneratorGrads<S>,
    ) {
        let d_logits: Vec<S> = d_mask
            .iter()
            .zip(&tape.mask)
            .map(|(&d, &m)| d * m * (S::one() - m))
            .collect();
        let dh = self.head.backward(
            tape.lstm.last_h(),
            &d_logits,
            tape.batch,
            Some((&mut grads.head_w, &mut grads.head_b)),
        );
        lstm::backward(
            &self.lstm,
            self.input(x, tape.steps),
            &tape.lstm,
            None,
            Some(&dh),
            Some(&mut grads.lstm),
            None,
        );
    }
}

/// `m = σ(head(h_T))` for one window.
pub fn generate_mask(params: &GeneratorParams, w: &Window<'_>) -> Result<TemporalMask> {
    if w.features != params.features() || w.steps != params.steps() {
        return Err(ArtaError::config(format!(
            "window {}×{} does not match generator {}×{}",
            w.steps,
            w.features,
            params.steps(),
            params.features()
        )));
    }
    let k = GeneratorKernel::<f32>::new(params);
    Ok(TemporalMask(k.forward(w.values, 1, w.steps).mask))
}

/// `x̃_tf = m_t x_tf + (1 − m_t) b_tf`.
pub fn apply_mask(w: &Window<'_>, m: &TemporalMask, baseline: &Tensor) -> Result<Tensor> {
    if m.len() != w.steps {
        return Err(ArtaError::config(format!(
            "mask length {} for window of {} steps",
            m.len(),
            w.steps
        )));
    }
    baseline.expect_shape(&[w.steps, w.features], "baseline")?;
    let mut out = vec![0.0f32; w.values.len()];
    mask_into(w.values, &m.0, baseline.data(), w.features, &mut out);
    Tensor::new(vec![w.steps, w.features], out)
}

pub(crate) fn mask_into<S: Scalar>(
    x: &[S],
    m: &[S],
    baseline: &[S],
    features: usize,
    out: &mut [S],
) {
    for (t, &mt) in m.iter().enumerate() {
        let r = t * features..(t + 1) * features;
        for ((o, &xv), &bv) in out[r.clone()]
            .iter_mut()
            .zip(&x[r.clone()])
            .zip(&baseline[r])
        {
            *o = mt * xv + (S::one() - mt) * bv;
        }
    }
}

/// `Σ_t m_t`.
pub fn mask_l1(m: &TemporalMask) -> f64 {
    m.0.iter().map(|&v| v as f64).sum()
}

//! Single-layer LSTM: parameters, batched forward pass with a tape, and the
//! matching reverse pass.
//!
//! Gate layout inside every `4H` block is input, forget, cell, output:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
//! ```
//!
//! Batched buffers are time-major: `[t][b][h]`.

use rand::Rng;

use super::scalar::{gemm, sigmoid, to_f32, to_scalar, Scalar, Strides};
use super::tensor::Tensor;
use crate::error::{ArtaError, Result};

/// LSTM weights: `w_ih` is `4H × F_in`, `w_hh` is `4H × H`, `b` is `4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[4 * hidden, input]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Uniform(−1/√H, 1/√H) initialisation of every entry.
    pub fn init_uniform<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f32).sqrt();
        let mut p = Self::zeros(input, hidden);
        for t in [&mut p.w_ih, &mut p.w_hh, &mut p.b] {
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.w_hh.cols();
        let i = self.w_ih.cols();
        self.w_ih.expect_shape(&[4 * h, i], "lstm w_ih")?;
        self.w_hh.expect_shape(&[4 * h, h], "lstm w_hh")?;
        self.b.expect_shape(&[4 * h], "lstm bias")
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.w_ih, &self.w_hh, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.w_ih, &mut self.w_hh, &mut self.b]
    }
}

/// Weights converted to the kernel scalar type.
pub(crate) struct LstmKernel<S> {
    pub input: usize,
    pub hidden: usize,
    pub w_ih: Vec<S>,
    pub w_hh: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> LstmKernel<S> {
    pub fn new(p: &LstmParams) -> Self {
        Self {
            input: p.input_size(),
            hidden: p.hidden_size(),
            w_ih: to_scalar(p.w_ih.data()),
            w_hh: to_scalar(p.w_hh.data()),
            b: to_scalar(p.b.data()),
        }
    }
}

/// Gradient buffers matching an [`LstmKernel`].
pub(crate) struct LstmGrads<S> {
    pub w_ih: Vec<S>,
    pub w_hh: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> LstmGrads<S> {
    pub fn zeros(k: &LstmKernel<S>) -> Self {
        Self {
            w_ih: vec![S::zero(); k.w_ih.len()],
            w_hh: vec![S::zero(); k.w_hh.len()],
            b: vec![S::zero(); k.b.len()],
        }
    }

    pub fn into_params(self, input: usize, hidden: usize) -> LstmParams {
        LstmParams {
            w_ih: Tensor::new(vec![4 * hidden, input], to_f32(&self.w_ih)).expect("grad shape"),
            w_hh: Tensor::new(vec![4 * hidden, hidden], to_f32(&self.w_hh)).expect("grad shape"),
            b: Tensor::new(vec![4 * hidden], to_f32(&self.b)).expect("grad shape"),
        }
    }
}

/// Where the per-step inputs come from.
#[derive(Clone, Copy)]
pub(crate) enum SeqInput<'a, S> {
    /// Element `(b, t, f)` lives at `b * batch_stride + t * time_stride + f`.
    Strided {
        data: &'a [S],
        batch_stride: usize,
        time_stride: usize,
    },
    /// The same `B × F_in` input at every step.
    Repeated(&'a [S]),
}

/// Activations recorded by [`forward`] for [`backward`].
pub(crate) struct LstmTape<S> {
    pub batch: usize,
    pub steps: usize,
    pub hidden: usize,
    /// `(T+1) × B × H`; slot 0 is the initial state.
    pub h: Vec<S>,
    pub c: Vec<S>,
    /// Post-activation gates, `T × B × 4H`.
    pub gates: Vec<S>,
    /// `tanh(c_t)`, `T × B × H`.
    pub tanh_c: Vec<S>,
}

impl<S: Scalar> LstmTape<S> {
    /// Hidden state after step `t` (1-based; 0 is the initial state).
    pub fn h_at(&self, t: usize) -> &[S] {
        let n = self.batch * self.hidden;
        &self.h[t * n..(t + 1) * n]
    }

    pub fn last_h(&self) -> &[S] {
        self.h_at(self.steps)
    }

    pub fn last_c(&self) -> &[S] {
        let n = self.batch * self.hidden;
        &self.c[self.steps * n..(self.steps + 1) * n]
    }

    /// Hidden states for steps 1..=T as one `T·B × H` block.
    pub fn hidden_seq(&self) -> &[S] {
        &self.h[self.batch * self.hidden..]
    }
}

/// Runs the recurrence over `steps` steps for a batch of `batch` sequences.
pub(crate) fn forward<S: Scalar>(
    k: &LstmKernel<S>,
    input: SeqInput<'_, S>,
    batch: usize,
    steps: usize,
    init: Option<(&[S], &[S])>,
) -> LstmTape<S> {
    let hd = k.hidden;
    let g4 = 4 * hd;
    let bh = batch * hd;
    let mut tape = LstmTape {
        batch,
        steps,
        hidden: hd,
        h: vec![S::zero(); (steps + 1) * bh],
        c: vec![S::zero(); (steps + 1) * bh],
        gates: vec![S::zero(); steps * batch * g4],
        tanh_c: vec![S::zero(); steps * bh],
    };
    if let Some((h0, c0)) = init {
        tape.h[..bh].copy_from_slice(h0);
        tape.c[..bh].copy_from_slice(c0);
    }

    // Input contribution plus bias, computed once when the input repeats.
    let repeated = match input {
        SeqInput::Repeated(x) => {
            let mut zin = vec![S::zero(); batch * g4];
            for row in zin.chunks_exact_mut(g4) {
                row.copy_from_slice(&k.b);
            }
            gemm(
                batch,
                k.input,
                g4,
                S::one(),
                x,
                Strides::row_major(k.input),
                &k.w_ih,
                Strides::transposed(k.input),
                S::one(),
                &mut zin,
                Strides::row_major(g4),
            );
            Some(zin)
        }
        SeqInput::Strided { .. } => None,
    };

    for t in 0..steps {
        let (prev, rest) = tape.h.split_at_mut((t + 1) * bh);
        let h_prev = &prev[t * bh..];
        let h_next = &mut rest[..bh];
        let g = &mut tape.gates[t * batch * g4..(t + 1) * batch * g4];

        match (&repeated, input) {
            (Some(zin), _) => g.copy_from_slice(zin),
            (
                None,
                SeqInput::Strided {
                    data,
                    batch_stride,
                    time_stride,
                },
            ) => {
                for row in g.chunks_exact_mut(g4) {
                    row.copy_from_slice(&k.b);
                }
                gemm(
                    batch,
                    k.input,
                    g4,
                    S::one(),
                    &data[t * time_stride..],
                    Strides(batch_stride, 1),
                    &k.w_ih,
                    Strides::transposed(k.input),
                    S::one(),
                    g,
                    Strides::row_major(g4),
                );
            }
            (None, SeqInput::Repeated(_)) => unreachable!(),
        }
        gemm(
            batch,
            hd,
            g4,
            S::one(),
            h_prev,
            Strides::row_major(hd),
            &k.w_hh,
            Strides::transposed(hd),
            S::one(),
            g,
            Strides::row_major(g4),
        );

        let (cprev_all, cnext_all) = tape.c.split_at_mut((t + 1) * bh);
        let c_prev = &cprev_all[t * bh..];
        let c_next = &mut cnext_all[..bh];
        let tc = &mut tape.tanh_c[t * bh..(t + 1) * bh];
        for b in 0..batch {
            let row = &mut g[b * g4..(b + 1) * g4];
            for j in 0..hd {
                let i_g = sigmoid(row[j]);
                let f_g = sigmoid(row[hd + j]);
                let c_g = row[2 * hd + j].tanh();
                let o_g = sigmoid(row[3 * hd + j]);
                row[j] = i_g;
                row[hd + j] = f_g;
                row[2 * hd + j] = c_g;
                row[3 * hd + j] = o_g;
                let c = f_g * c_prev[b * hd + j] + i_g * c_g;
                let th = c.tanh();
                c_next[b * hd + j] = c;
                tc[b * hd + j] = th;
                h_next[b * hd + j] = o_g * th;
            }
        }
    }
    tape
}

/// Reverse pass through a recorded forward.
///
/// `d_h_seq` carries external gradients on every hidden output (`T·B × H`,
/// time-major), `d_h_last` an extra gradient on the final hidden state.
/// Parameter gradients are accumulated into `grads`; input gradients are
/// written to `d_input` in the layout of `input` (for a repeated input, the
/// `B × F_in` sum over steps).
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<S: Scalar>(
    k: &LstmKernel<S>,
    input: SeqInput<'_, S>,
    tape: &LstmTape<S>,
    d_h_seq: Option<&[S]>,
    d_h_last: Option<&[S]>,
    mut grads: Option<&mut LstmGrads<S>>,
    mut d_input: Option<&mut [S]>,
) {
    let hd = k.hidden;
    let g4 = 4 * hd;
    let batch = tape.batch;
    let bh = batch * hd;
    let mut dh = vec![S::zero(); bh];
    let mut dc = vec![S::zero(); bh];
    let mut dg = vec![S::zero(); batch * g4];
    let mut d_rep = match input {
        SeqInput::Repeated(_) => Some(vec![S::zero(); batch * g4]),
        _ => None,
    };
    if let Some(d) = d_h_last {
        dh.copy_from_slice(d);
    }

    for t in (0..tape.steps).rev() {
        if let Some(seq) = d_h_seq {
            for (a, &b) in dh.iter_mut().zip(&seq[t * bh..(t + 1) * bh]) {
                *a += b;
            }
        }
        let gates = &tape.gates[t * batch * g4..(t + 1) * batch * g4];
        let tc = &tape.tanh_c[t * bh..(t + 1) * bh];
        let c_prev = &tape.c[t * bh..(t + 1) * bh];
        for b in 0..batch {
            let row = &gates[b * g4..(b + 1) * g4];
            let drow = &mut dg[b * g4..(b + 1) * g4];
            for j in 0..hd {
                let idx = b * hd + j;
                let (i_g, f_g, c_g, o_g) = (row[j], row[hd + j], row[2 * hd + j], row[3 * hd + j]);
                let th = tc[idx];
                let d_o = dh[idx] * th;
                let d_c = dc[idx] + dh[idx] * o_g * (S::one() - th * th);
                let d_i = d_c * c_g;
                let d_g = d_c * i_g;
                let d_f = d_c * c_prev[idx];
                dc[idx] = d_c * f_g;
                drow[j] = d_i * i_g * (S::one() - i_g);
                drow[hd + j] = d_f * f_g * (S::one() - f_g);
                drow[2 * hd + j] = d_g * (S::one() - c_g * c_g);
                drow[3 * hd + j] = d_o * o_g * (S::one() - o_g);
            }
        }

        let h_prev = tape.h_at(t);
        if let Some(gr) = grads.as_deref_mut() {
            for row in dg.chunks_exact(g4) {
                for (a, &v) in gr.b.iter_mut().zip(row) {
                    *a += v;
                }
            }
            gemm(
                g4,
                batch,
                hd,
                S::one(),
                &dg,
                Strides::transposed(g4),
                h_prev,
                Strides::row_major(hd),
                S::one(),
                &mut gr.w_hh,
                Strides::row_major(hd),
            );
        }
        match input {
            SeqInput::Strided {
                data,
                batch_stride,
                time_stride,
            } => {
                if let Some(gr) = grads.as_deref_mut() {
                    gemm(
                        g4,
                        batch,
                        k.input,
                        S::one(),
                        &dg,
                        Strides::transposed(g4),
                        &data[t * time_stride..],
                        Strides(batch_stride, 1),
                        S::one(),
                        &mut gr.w_ih,
                        Strides::row_major(k.input),
                    );
                }
                if let Some(dx) = d_input.as_deref_mut() {
                    gemm(
                        batch,
                        g4,
                        k.input,
                        S::one(),
                        &dg,
                        Strides::row_major(g4),
                        &k.w_ih,
                        Strides::row_major(k.input),
                        S::zero(),
                        &mut dx[t * time_stride..],
                        Strides(batch_stride, 1),
                    );
                }
            }
            SeqInput::Repeated(_) => {
                let acc = d_rep.as_mut().expect("repeated accumulator");
                for (a, &v) in acc.iter_mut().zip(&dg) {
                    *a += v;
                }
            }
        }
        // dh for the previous step
        gemm(
            batch,
            g4,
            hd,
            S::one(),
            &dg,
            Strides::row_major(g4),
            &k.w_hh,
            Strides::row_major(hd),
            S::zero(),
            &mut dh,
            Strides::row_major(hd),
        );
    }

    if let (SeqInput::Repeated(x), Some(acc)) = (input, d_rep.as_ref()) {
        if let Some(gr) = grads.as_deref_mut() {
            gemm(
                g4,
                batch,
                k.input,
                S::one(),
                acc,
                Strides::transposed(g4),
                x,
                Strides::row_major(k.input),
                S::one(),
                &mut gr.w_ih,
                Strides::row_major(k.input),
            );
        }
        if let Some(dx) = d_input.as_deref_mut() {
            gemm(
                batch,
                g4,
                k.input,
                S::one(),
                acc,
                Strides::row_major(g4),
                &k.w_ih,
                Strides::row_major(k.input),
                S::zero(),
                dx,
                Strides::row_major(k.input),
            );
        }
    }
}

/// Runs one sequence through the LSTM from the given initial state.
///
/// Returns the `T × H` hidden sequence and the final hidden and cell states.
pub fn forward_lstm(
    params: &LstmParams,
    inputs: &Tensor,
    h0: &Tensor,
    c0: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    params.validate()?;
    let hd = params.hidden_size();
    if inputs.shape().len() != 2 || inputs.cols() != params.input_size() {
        return Err(ArtaError::config(format!(
            "lstm input shape {:?} incompatible with input size {}",
            inputs.shape(),
            params.input_size()
        )));
    }
    h0.expect_shape(&[hd], "lstm h0")?;
    c0.expect_shape(&[hd], "lstm c0")?;
    let steps = inputs.rows();
    let k = LstmKernel::<f32>::new(params);
    let tape = forward(
        &k,
        SeqInput::Strided {
            data: inputs.data(),
            batch_stride: steps * params.input_size(),
            time_stride: params.input_size(),
        },
        1,
        steps,
        Some((h0.data(), c0.data())),
    );
    let seq = Tensor::new(vec![steps, hd], tape.hidden_seq().to_vec())?;
    let h = Tensor::vector(tape.last_h().to_vec());
    let c = Tensor::vector(tape.last_c().to_vec());
    Ok((seq, h, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Cell equations applied one step at a time, no batching, no GEMM.
    fn oracle_step(p: &LstmParams, x: &[f32], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = p.hidden_size();
        let fi = p.input_size();
        let pre = |row: usize| -> f64 {
            let mut s = p.b.data()[row] as f64;
            for j in 0..fi {
                s += p.w_ih.at(row, j) as f64 * x[j] as f64;
            }
            for j in 0..hd {
                s += p.w_hh.at(row, j) as f64 * h[j];
            }
            s
        };
        let mut h2 = vec![0.0; hd];
        let mut c2 = vec![0.0; hd];
        for j in 0..hd {
            let i = sig(pre(j));
            let f = sig(pre(hd + j));
            let g = pre(2 * hd + j).tanh();
            let o = sig(pre(3 * hd + j));
            c2[j] = f * c[j] + i * g;
            h2[j] = o * c2[j].tanh();
        }
        (h2, c2)
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let x = Tensor::new(vec![5, 3], (0..15).map(|v| v as f32).collect()).unwrap();
        let (seq, h, c) = forward_lstm(&p, &x, &Tensor::zeros(&[4]), &Tensor::zeros(&[4])).unwrap();
        assert!(seq.data().iter().all(|&v| v == 0.0));
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn open_gates_single_cell() {
        // Large biases saturate i, o to 1 and f to 0: h1 = tanh(tanh(w x)).
        let mut p = LstmParams::zeros(1, 1);
        p.w_ih.data_mut().copy_from_slice(&[0.0, 0.0, 0.7, 0.0]);
        p.b.data_mut().copy_from_slice(&[30.0, -30.0, 0.0, 30.0]);
        let x = Tensor::new(vec![1, 1], vec![0.5]).unwrap();
        let (_, h, c) = forward_lstm(&p, &x, &Tensor::zeros(&[1]), &Tensor::zeros(&[1])).unwrap();
        let g = (0.7f64 * 0.5).tanh();
        assert!((c.data()[0] as f64 - g).abs() < 1e-6);
        assert!((h.data()[0] as f64 - g.tanh()).abs() < 1e-6);
    }

    #[test]
    fn matches_step_oracle() {
        let mut r = rng::derive(11, 0);
        let p = LstmParams::init_uniform(2, 3, &mut r);
        let xs: Vec<f32> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = Tensor::new(vec![3, 2], xs.clone()).unwrap();
        let h0 = Tensor::vector(vec![0.1, -0.2, 0.3]);
        let c0 = Tensor::vector(vec![-0.5, 0.0, 0.25]);
        let (seq, h, c) = forward_lstm(&p, &x, &h0, &c0).unwrap();

        let mut hh: Vec<f64> = h0.data().iter().map(|&v| v as f64).collect();
        let mut cc: Vec<f64> = c0.data().iter().map(|&v| v as f64).collect();
        for t in 0..3 {
            let (h2, c2) = oracle_step(&p, &xs[t * 2..t * 2 + 2], &hh, &cc);
            hh = h2;
            cc = c2;
            for j in 0..3 {
                assert!((seq.at(t, j) as f64 - hh[j]).abs() < 1e-6);
            }
        }
        for j in 0..3 {
            assert!((h.data()[j] as f64 - hh[j]).abs() < 1e-6);
            assert!((c.data()[j] as f64 - cc[j]).abs() < 1e-6);
            assert_eq!(h.data()[j], seq.at(2, j));
        }
    }

    #[test]
    fn rejects_bad_input_width() {
        let p = LstmParams::zeros(3, 4);
        let x = Tensor::zeros(&[5, 2]);
        assert!(forward_lstm(&p, &x, &Tensor::zeros(&[4]), &Tensor::zeros(&[4])).is_err());
        let x = Tensor::zeros(&[5, 3]);
        assert!(forward_lstm(&p, &x, &Tensor::zeros(&[3]), &Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn batched_equals_per_sequence() {
        let mut r = rng::derive(12, 0);
        let p = LstmParams::init_uniform(2, 4, &mut r);
        let k = LstmKernel::<f64>::new(&p);
        let data: Vec<f64> = (0..3 * 5 * 2).map(|_| r.random_range(-1.0..1.0)).collect();
        let tape = forward(
            &k,
            SeqInput::Strided {
                data: &data,
                batch_stride: 10,
                time_stride: 2,
            },
            3,
            5,
            None,
        );
        for b in 0..3 {
            let single = forward(
                &k,
                SeqInput::Strided {
                    data: &data[b * 10..],
                    batch_stride: 10,
                    time_stride: 2,
                },
                1,
                5,
                None,
            );
            for j in 0..4 {
                assert!((tape.last_h()[b * 4 + j] - single.last_h()[j]).abs() < 1e-14);
            }
        }
    }
}

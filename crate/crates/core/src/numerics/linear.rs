use rand::Rng;

use super::scalar::{gemm, to_scalar, Scalar, Strides};
use super::tensor::Tensor;
use crate::error::{ArtaError, Result};

/// Affine map `y = W x + b` with `W: O × I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl LinearParams {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
        }
    }

    /// Uniform(−1/√I, 1/√I), the usual fan-in scaling.
    pub fn init_uniform<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f32).sqrt();
        let mut p = Self::zeros(input, output);
        for t in [&mut p.w, &mut p.b] {
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn output_size(&self) -> usize {
        self.w.rows()
    }

    pub fn validate(&self) -> Result<()> {
        self.b.expect_shape(&[self.w.rows()], "linear bias")
    }

    pub fn tensors(&self) -> [&Tensor; 2] {
        [&self.w, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.w, &mut self.b]
    }
}

pub(crate) struct LinearKernel<S> {
    pub input: usize,
    pub output: usize,
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> LinearKernel<S> {
    pub fn new(p: &LinearParams) -> Self {
        Self {
            input: p.input_size(),
            output: p.output_size(),
            w: to_scalar(p.w.data()),
            b: to_scalar(p.b.data()),
        }
    }

    /// `rows × I` → `rows × O`.
    pub fn forward(&self, x: &[S], rows: usize) -> Vec<S> {
        let mut y = Vec::with_capacity(rows * self.output);
        for _ in 0..rows {
            y.extend_from_slice(&self.b);
        }
        gemm(
            rows,
            self.input,
            self.output,
            S::one(),
            x,
            Strides::row_major(self.input),
            &self.w,
            Strides::transposed(self.input),
            S::one(),
            &mut y,
            Strides::row_major(self.output),
        );
        y
    }

    /// Accumulates `dW`, `db` (when `grads` is given) and returns `dx`.
    pub fn backward(
        &self,
        x: &[S],
        dy: &[S],
        rows: usize,
        grads: Option<(&mut [S], &mut [S])>,
    ) -> Vec<S> {
        if let Some((dw, db)) = grads {
            for row in dy.chunks_exact(self.output) {
                for (a, &v) in db.iter_mut().zip(row) {
                    *a += v;
                }
            }
            gemm(
                self.output,
                rows,
                self.input,
                S::one(),
                dy,
                Strides::transposed(self.output),
                x,
                Strides::row_major(self.input),
                S::one(),
                dw,
                Strides::row_major(self.input),
            );
        }
        let mut dx = vec![S::zero(); rows * self.input];
        gemm(
            rows,
            self.output,
            self.input,
            S::one(),
            dy,
            Strides::row_major(self.output),
            &self.w,
            Strides::row_major(self.input),
            S::zero(),
            &mut dx,
            Strides::row_major(self.input),
        );
        dx
    }
}

/// `y = W x + b` for a single vector.
pub fn forward_linear(w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor> {
    if w.shape().len() != 2 {
        return Err(ArtaError::config(format!(
            "linear weight must be rank 2, got {:?}",
            w.shape()
        )));
    }
    b.expect_shape(&[w.rows()], "linear bias")?;
    x.expect_shape(&[w.cols()], "linear input")?;
    let k = LinearKernel::<f32> {
        input: w.cols(),
        output: w.rows(),
        w: w.data().to_vec(),
        b: b.data().to_vec(),
    };
    Ok(Tensor::vector(k.forward(x.data(), 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_constant() {
        let x = Tensor::vector(vec![1.5, -2.0, 3.0]);
        let y = forward_linear(&Tensor::identity(3), &Tensor::zeros(&[3]), &x).unwrap();
        assert_eq!(y, x);
        let c = Tensor::vector(vec![4.0, 5.0]);
        let y = forward_linear(&Tensor::zeros(&[2, 3]), &c, &x).unwrap();
        assert_eq!(y, c);
    }

    #[test]
    fn random_three_by_two_matches_loop() {
        let w = Tensor::matrix(3, 2, vec![0.3, -1.2, 2.5, 0.7, -0.4, 1.1]).unwrap();
        let b = Tensor::vector(vec![0.1, 0.2, -0.3]);
        let x = Tensor::vector(vec![-0.8, 1.9]);
        let y = forward_linear(&w, &b, &x).unwrap();
        for i in 0..3 {
            let mut s = b.data()[i] as f64;
            for j in 0..2 {
                s += w.at(i, j) as f64 * x.data()[j] as f64;
            }
            assert!((y.data()[i] as f64 - s).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let r = forward_linear(
            &Tensor::zeros(&[2, 3]),
            &Tensor::zeros(&[2]),
            &Tensor::zeros(&[2]),
        );
        assert!(matches!(r, Err(ArtaError::Config(_))));
    }
}

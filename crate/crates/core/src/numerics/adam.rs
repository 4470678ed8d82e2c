use super::tensor::Tensor;
use crate::error::{ArtaError, Result};

/// First/second moment estimates for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.shape()), Tensor::zeros(p.shape())))
            .unzip();
        Self {
            m,
            v,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step.
///
/// Gradients are validated before anything is written, so a non-finite
/// gradient leaves both parameters and state untouched.
pub fn adam_update(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(ArtaError::config(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(ArtaError::config(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        g.expect_shape(p.shape(), "adam gradient")?;
        state.m[i].expect_shape(p.shape(), "adam moment")?;
        if !g.is_finite() {
            return Err(ArtaError::numeric(
                "adam_update",
                format!("non-finite gradient in parameter {i}"),
            ));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let gj = gj as f64;
            let mj = b1 * m[j] as f64 + (1.0 - b1) * gj;
            let vj = b2 * v[j] as f64 + (1.0 - b2) * gj * gj;
            m[j] = mj as f32;
            v[j] = vj as f32;
            let step = lr * (mj / c1) / ((vj / c2).sqrt() + state.eps);
            *w = (*w as f64 - step) as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_quadratic(w0: f32, target: f32, lr: f64, steps: usize) -> f32 {
        let mut w = Tensor::vector(vec![w0]);
        let mut st = AdamState::new([&w]);
        for _ in 0..steps {
            let g = Tensor::vector(vec![2.0 * (w.data()[0] - target)]);
            adam_update(&mut [&mut w], &[&g], &mut st, lr).unwrap();
        }
        w.data()[0]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::vector(vec![1.0, -2.0]);
        let mut st = AdamState::new([&w]);
        let g = Tensor::zeros(&[2]);
        adam_update(&mut [&mut w], &[&g], &mut st, 0.1).unwrap();
        assert_eq!(w.data(), &[1.0, -2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn descends_and_converges() {
        assert!(run_quadratic(1.0, 0.0, 0.1, 1) < 1.0);
        assert!((run_quadratic(0.0, 2.0, 0.05, 200) - 2.0).abs() < 0.05);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut w = Tensor::vector(vec![1.0]);
        let mut st = AdamState::new([&w]);
        let g = Tensor::vector(vec![f32::NAN]);
        let err = adam_update(&mut [&mut w], &[&g], &mut st, 0.1).unwrap_err();
        assert!(matches!(err, ArtaError::Numeric { .. }));
        assert_eq!(st.t, 0);
        assert_eq!(w.data(), &[1.0]);
    }
}

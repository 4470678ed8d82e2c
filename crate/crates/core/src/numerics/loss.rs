use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{ArtaError, Result};

/// Mean of squared element-wise differences, accumulated in `f64`.
pub fn loss_mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(ArtaError::config(format!(
            "mse shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(mse(a.data(), b.data()))
}

pub(crate) fn mse<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.to_f64_lossless() - y.to_f64_lossless();
            d * d
        })
        .sum();
    sum / a.len() as f64
}

/// Gradient of `scale * mse(pred, target)` with respect to `pred`.
pub(crate) fn mse_grad<S: Scalar>(pred: &[S], target: &[S], scale: f64) -> Vec<S> {
    let k = S::from_f64(2.0 * scale / pred.len() as f64).expect("finite scale");
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| k * (p - t))
        .collect()
}

pub(crate) fn ensure_finite(op: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ArtaError::numeric(op, format!("loss evaluated to {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let a = Tensor::vector(vec![0.0, 0.0]);
        let b = Tensor::vector(vec![1.0, 1.0]);
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_mse(&a, &b).unwrap(), 1.0);
        assert!(loss_mse(&a, &Tensor::vector(vec![1.0])).is_err());
    }

    #[test]
    fn matches_element_loop() {
        let a = Tensor::vector((0..17).map(|i| (i as f32 * 0.37).sin()).collect());
        let b = Tensor::vector((0..17).map(|i| (i as f32 * 0.11).cos()).collect());
        let mut s = 0.0f64;
        for i in 0..17 {
            let d = a.data()[i] as f64 - b.data()[i] as f64;
            s += d * d;
        }
        assert!((loss_mse(&a, &b).unwrap() - s / 17.0).abs() < 1e-7);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        assert!(matches!(
            ensure_finite("mse", f64::NAN),
            Err(ArtaError::Numeric { op: "mse", .. })
        ));
    }
}

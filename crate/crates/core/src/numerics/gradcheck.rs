//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use super::tensor::Tensor;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// `(tensor index, element index, analytic, finite difference)` at the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares `analytic` against central differences of `loss_fn` on up to
/// `samples` randomly chosen coordinates (every coordinate if there are fewer).
///
/// The relative error per coordinate is
/// `|a − fd| / (|a| + |fd| + 1e-8)`. The difference quotient divides by the
/// actual `f32` spacing `(w + step) − (w − step)`, so rounding of the
/// perturbed parameter does not bias the estimate.
pub fn check_gradients<F>(
    mut loss_fn: F,
    params: &[Tensor],
    analytic: &[Tensor],
    step: f32,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    assert_eq!(params.len(), analytic.len());
    let total: usize = params.iter().map(Tensor::len).sum();
    let mut r = rng::derive(seed, rng::stream::GRADCHECK);
    let mut picks: Vec<usize> = if samples >= total {
        (0..total).collect()
    } else {
        sample(&mut r, total, samples).into_vec()
    };
    picks.sort_unstable();

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: picks.len(),
        worst: None,
    };
    for flat in picks {
        let (ti, ei) = locate(params, flat);
        let w0 = params[ti].data()[ei];
        let wp = w0 + step;
        let wm = w0 - step;
        work[ti].data_mut()[ei] = wp;
        let lp = loss_fn(&work)?;
        work[ti].data_mut()[ei] = wm;
        let lm = loss_fn(&work)?;
        work[ti].data_mut()[ei] = w0;
        let fd = (lp - lm) / (wp as f64 - wm as f64);
        let a = analytic[ti].data()[ei] as f64;
        let rel = (a - fd).abs() / (a.abs() + fd.abs() + 1e-8);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((ti, ei, a, fd));
        }
    }
    Ok(report)
}

fn locate(params: &[Tensor], mut flat: usize) -> (usize, usize) {
    for (i, p) in params.iter().enumerate() {
        if flat < p.len() {
            return (i, flat);
        }
        flat -= p.len();
    }
    unreachable!("coordinate out of range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linear::LinearKernel;
    use crate::numerics::loss::{mse, mse_grad};
    use crate::numerics::lstm::{self, LstmGrads, LstmKernel, LstmParams, SeqInput};
    use crate::numerics::scalar::to_f32;
    use crate::numerics::LinearParams;
    use rand::Rng;

    #[test]
    fn quadratic_exact() {
        let w = vec![Tensor::vector(vec![3.0])];
        let g = vec![Tensor::vector(vec![6.0])];
        let rep = check_gradients(
            |p| {
                let x = p[0].data()[0] as f64;
                Ok(x * x)
            },
            &w,
            &g,
            1e-3,
            50,
            0,
        )
        .unwrap();
        let (_, _, a, fd) = rep.worst.unwrap();
        assert!((a - fd).abs() < 1e-6);
    }

    fn linear_loss(p: &[Tensor], x: &[f64], target: &[f64]) -> (f64, Vec<Tensor>) {
        let lin = LinearParams {
            w: p[0].clone(),
            b: p[1].clone(),
        };
        let k = LinearKernel::<f64>::new(&lin);
        let rows = x.len() / k.input;
        let y = k.forward(x, rows);
        let loss = mse(&y, target);
        let dy = mse_grad(&y, target, 1.0);
        let mut dw = vec![0.0; k.w.len()];
        let mut db = vec![0.0; k.b.len()];
        k.backward(x, &dy, rows, Some((&mut dw, &mut db)));
        (
            loss,
            vec![
                Tensor::new(p[0].shape().to_vec(), to_f32(&dw)).unwrap(),
                Tensor::vector(to_f32(&db)),
            ],
        )
    }

    #[test]
    fn linear_regression_closed_form_and_fd() {
        let mut r = rng::derive(21, 0);
        let lin = LinearParams::init_uniform(3, 2, &mut r);
        let params = vec![lin.w.clone(), lin.b.clone()];
        let x: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, grads) = linear_loss(&params, &x, &t);

        // closed form: dW = 2 (ŷ − t) xᵀ / n over all outputs
        let n = t.len() as f64;
        for o in 0..2 {
            for i in 0..3 {
                let mut s = 0.0;
                for row in 0..4 {
                    let mut y = params[1].data()[o] as f64;
                    for j in 0..3 {
                        y += params[0].at(o, j) as f64 * x[row * 3 + j];
                    }
                    s += 2.0 * (y - t[row * 2 + o]) * x[row * 3 + i] / n;
                }
                assert!((grads[0].at(o, i) as f64 - s).abs() < 1e-6);
            }
        }

        let rep = check_gradients(
            |p| Ok(linear_loss(p, &x, &t).0),
            &params,
            &grads,
            1e-3,
            50,
            1,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn lstm_one_step_toy() {
        let mut r = rng::derive(22, 0);
        let p = LstmParams::init_uniform(2, 3, &mut r);
        let x: Vec<f64> = (0..2 * 4).map(|_| r.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..3 * 4).map(|_| r.random_range(-0.5..0.5)).collect();
        let eval = |tensors: &[Tensor]| {
            let lp = LstmParams {
                w_ih: tensors[0].clone(),
                w_hh: tensors[1].clone(),
                b: tensors[2].clone(),
            };
            let k = LstmKernel::<f64>::new(&lp);
            let input = SeqInput::Strided {
                data: &x,
                batch_stride: 2,
                time_stride: 8,
            };
            // four sequences of one step each
            let tape = lstm::forward(&k, input, 4, 1, None);
            let h = tape.hidden_seq().to_vec();
            let loss = mse(&h, &target);
            let dh = mse_grad(&h, &target, 1.0);
            let mut g = LstmGrads::zeros(&k);
            lstm::backward(&k, input, &tape, Some(&dh), None, Some(&mut g), None);
            let gp = g.into_params(2, 3);
            (loss, vec![gp.w_ih, gp.w_hh, gp.b])
        };
        let params = vec![p.w_ih.clone(), p.w_hh.clone(), p.b.clone()];
        let (_, grads) = eval(&params);
        let rep = check_gradients(|t| Ok(eval(t).0), &params, &grads, 1e-3, 50, 2).unwrap();
        assert!(rep.max_rel_error < 1e-3, "{rep:?}");
    }

    #[test]
    fn mse_of_identical_inputs_has_zero_gradient() {
        let a = vec![0.5f64, -1.0, 2.0];
        assert!(mse_grad(&a, &a, 1.0).iter().all(|&g| g == 0.0));
        assert_eq!(mse(&a, &a), 0.0);
    }
}

//! Power-iteration spectral norm estimates and weight normalisation.

use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor;

/// Persistent left singular vector estimate for one weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u: Tensor,
}

impl SpectralState {
    /// Random unit vector of length `rows`.
    pub fn new<R: Rng>(rows: usize, rng: &mut R) -> Self {
        let mut u: Vec<f64> = (0..rows)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&u).max(1e-12);
        u.iter_mut().for_each(|x| *x /= n);
        Self {
            u: Tensor::vector(u.into_iter().map(|x| x as f32).collect()),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value of `w` (rows × cols) by `iters` power iterations,
/// warm-started from `state.u`. A zero matrix yields 0 and leaves the state
/// untouched.
pub fn estimate_spectral_norm(w: &Tensor, state: &mut SpectralState, iters: usize) -> f64 {
    let rows = w.rows();
    let cols = w.cols();
    assert_eq!(
        state.u.len(),
        rows,
        "spectral state does not match matrix rows"
    );
    let data = w.data();
    let mut u: Vec<f64> = state.u.data().iter().map(|&x| x as f64).collect();
    let mut v = vec![0.0f64; cols];
    let mut sigma = 0.0;
    for _ in 0..iters.max(1) {
        v.iter_mut().for_each(|x| *x = 0.0);
        for (r, &ur) in u.iter().enumerate() {
            let row = &data[r * cols..(r + 1) * cols];
            for (vc, &wrc) in v.iter_mut().zip(row) {
                *vc += wrc as f64 * ur;
            }
        }
        let nv = norm(&v);
        if nv < 1e-30 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let wv: Vec<f64> = (0..rows)
            .map(|r| {
                data[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(&v)
                    .map(|(&a, &b)| a as f64 * b)
                    .sum()
            })
            .collect();
        sigma = norm(&wv);
        if sigma < 1e-30 {
            return 0.0;
        }
        u = wv.into_iter().map(|x| x / sigma).collect();
    }
    for (dst, src) in state.u.data_mut().iter_mut().zip(&u) {
        *dst = *src as f32;
    }
    sigma
}

/// Divides `w` by its estimated spectral norm. Matrices whose estimate falls
/// below `1e-12` are left unchanged. Returns the estimate used.
pub fn normalize_spectral(w: &mut Tensor, state: &mut SpectralState, iters: usize) -> f64 {
    let sigma = estimate_spectral_norm(w, state, iters);
    if sigma >= 1e-12 {
        let inv = (1.0 / sigma) as f32;
        w.scale(inv);
    }
    sigma
}

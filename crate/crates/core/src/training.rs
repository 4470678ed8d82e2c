//! Two-stage optimisation: detector warm-up on clean windows, then the
//! alternating min–max phase.
//!
//! Per mini-batch of the joint phase the generator takes one Adam step on
//!
//! ```text
//! L_G = −mse(x, D(x̃)) + λ · mean_b ‖m_b‖₁
//! ```
//!
//! with the detector frozen, then the detector takes one Adam step on
//!
//! ```text
//! L_D = mse(x, D(x)) + γ · mse(x, D(x̃))
//! ```
//!
//! with a freshly generated mask and the generator frozen. `x̃` is the
//! baseline-aware masked window and both reconstruction errors are measured
//! against the clean `x`. Every detector update is followed by spectral
//! normalisation of the detector weight matrices.

use rand::seq::SliceRandom;

use crate::config::TrainConfig;
use crate::data::{baseline_into, Window};
use crate::detector::{
    apply_spectral_normalization_to, DetectorGrads, DetectorKernel, DetectorParams, DetectorWeights,
};
use crate::error::{ArtaError, Result};
use crate::generator::{mask_into, GeneratorGrads, GeneratorKernel, GeneratorParams};
use crate::numerics::loss::{ensure_finite, mse, mse_grad};
use crate::numerics::scalar::{to_scalar, Scalar};
use crate::numerics::{adam_update, check_gradients, AdamState, Tensor};
use crate::rng;

/// Power iterations used when normalising freshly initialised weights.
pub const INIT_SN_ITERS: usize = 50;

/// A gathered mini-batch: `B × T × F` windows and their baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Vec<f32>,
    pub baseline: Vec<f32>,
    pub size: usize,
    pub steps: usize,
    pub features: usize,
}

impl Batch {
    /// Gathers windows; `zero_baseline` replaces window means by zeros.
    pub fn gather(windows: &[Window<'_>], zero_baseline: bool) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| ArtaError::config("empty batch"))?;
        let (steps, features) = (first.steps, first.features);
        let n = steps * features;
        let mut x = Vec::with_capacity(windows.len() * n);
        let mut baseline = vec![0.0f32; windows.len() * n];
        for (i, w) in windows.iter().enumerate() {
            if w.steps != steps || w.features != features {
                return Err(ArtaError::config("batch windows differ in shape"));
            }
            x.extend_from_slice(w.values);
            if !zero_baseline {
                baseline_into(w.values, steps, features, &mut baseline[i * n..(i + 1) * n]);
            }
        }
        Ok(Self {
            x,
            baseline,
            size: windows.len(),
            steps,
            features,
        })
    }
}

/// Quantities observed during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub loss: f64,
    /// `mse(x, D(x))`.
    pub clean_error: f64,
    /// `mse(x, D(x̃))`, when a generator is present.
    pub masked_error: Option<f64>,
    /// Batch-mean `‖m‖₁`, when a generator is present.
    pub mask_l1: Option<f64>,
}

fn masked_batch<S: Scalar>(x: &[S], baseline: &[S], mask: &[S], b: &Batch) -> Vec<S> {
    let n = b.steps * b.features;
    let mut out = vec![S::zero(); x.len()];
    for i in 0..b.size {
        let r = i * n..(i + 1) * n;
        mask_into(
            &x[r.clone()],
            &mask[i * b.steps..(i + 1) * b.steps],
            &baseline[r.clone()],
            b.features,
            &mut out[r],
        );
    }
    out
}

fn mean_l1<S: Scalar>(mask: &[S], size: usize) -> f64 {
    mask.iter().map(|m| m.to_f64_lossless()).sum::<f64>() / size as f64
}

/// `L_D` and its gradient with respect to the detector weights.
pub(crate) fn detector_objective<S: Scalar>(
    det: &DetectorWeights,
    gen: Option<&GeneratorParams>,
    batch: &Batch,
    gamma: f64,
    want_grads: bool,
) -> Result<(StepStats, Option<DetectorWeights>)> {
    let dk = DetectorKernel::<S>::new(det);
    let x: Vec<S> = to_scalar(&batch.x);
    let clean = dk.forward(&x, batch.size, batch.steps);
    let clean_error = ensure_finite("detector reconstruction", mse(&clean.recon, &x))?;

    let masked = gen.map(|g| {
        let gk = GeneratorKernel::<S>::new(g);
        let mask = gk.forward(&x, batch.size, batch.steps).mask;
        let xt = masked_batch(&x, &to_scalar(&batch.baseline), &mask, batch);
        let tape = dk.forward(&xt, batch.size, batch.steps);
        (mask, xt, tape)
    });
    let masked_error = match &masked {
        Some((_, _, tape)) => Some(ensure_finite(
            "masked reconstruction",
            mse(&tape.recon, &x),
        )?),
        None => None,
    };
    let loss = ensure_finite(
        "detector loss",
        clean_error + gamma * masked_error.unwrap_or(0.0),
    )?;
    let stats = StepStats {
        loss,
        clean_error,
        masked_error,
        mask_l1: masked.as_ref().map(|(m, _, _)| mean_l1(m, batch.size)),
    };
    if !want_grads {
        return Ok((stats, None));
    }

    let mut grads = DetectorGrads::zeros(&dk);
    let d_clean = mse_grad(&clean.recon, &x, 1.0);
    dk.backward(&x, &clean, &d_clean, Some(&mut grads), None);
    if let Some((_, xt, tape)) = &masked {
        if gamma != 0.0 {
            let d_masked = mse_grad(&tape.recon, &x, gamma);
            dk.backward(xt, tape, &d_masked, Some(&mut grads), None);
        }
    }
    Ok((
        stats,
        Some(grads.into_weights(det.features(), det.hidden())),
    ))
}

/// `L_G` and its gradient with respect to the generator weights.
pub(crate) fn generator_objective<S: Scalar>(
    det: &DetectorWeights,
    gen: &GeneratorParams,
    batch: &Batch,
    lambda: f64,
    want_grads: bool,
) -> Result<(StepStats, Option<GeneratorParams>)> {
    let dk = DetectorKernel::<S>::new(det);
    let gk = GeneratorKernel::<S>::new(gen);
    let x: Vec<S> = to_scalar(&batch.x);
    let baseline: Vec<S> = to_scalar(&batch.baseline);
    let gtape = gk.forward(&x, batch.size, batch.steps);
    let xt = masked_batch(&x, &baseline, &gtape.mask, batch);
    let dtape = dk.forward(&xt, batch.size, batch.steps);
    let masked_error = ensure_finite("masked reconstruction", mse(&dtape.recon, &x))?;
    let l1 = mean_l1(&gtape.mask, batch.size);
    let loss = ensure_finite("generator loss", -masked_error + lambda * l1)?;
    let stats = StepStats {
        loss,
        clean_error: f64::NAN,
        masked_error: Some(masked_error),
        mask_l1: Some(l1),
    };
    if !want_grads {
        return Ok((stats, None));
    }

    let d_recon = mse_grad(&dtape.recon, &x, -1.0);
    let mut d_xt = vec![S::zero(); xt.len()];
    dk.backward(&xt, &dtape, &d_recon, None, Some(&mut d_xt));
    // ∂x̃/∂m_t = x_t − b_t, summed over sensors; ∂(λ mean‖m‖₁)/∂m_t = λ / B.
    let f = batch.features;
    let l1_grad = S::from_f64(lambda / batch.size as f64).expect("finite");
    let d_mask: Vec<S> = (0..batch.size * batch.steps)
        .map(|bt| {
            let r = bt * f..(bt + 1) * f;
            let mut s = l1_grad;
            for ((&d, &xv), &bv) in d_xt[r.clone()].iter().zip(&x[r.clone()]).zip(&baseline[r]) {
                s += d * (xv - bv);
            }
            s
        })
        .collect();
    let mut grads = GeneratorGrads::zeros(&gk);
    gk.backward(&x, &gtape, &d_mask, &mut grads);
    Ok((
        stats,
        Some(grads.into_params(gen.features(), gen.lstm.hidden_size(), gen.steps())),
    ))
}

/// Loss and gradients of `L_D`, evaluated with `f64` kernels.
pub fn detector_loss_f64(
    det: &DetectorWeights,
    gen: Option<&GeneratorParams>,
    batch: &Batch,
    gamma: f64,
) -> Result<(f64, DetectorWeights)> {
    let (s, g) = detector_objective::<f64>(det, gen, batch, gamma, true)?;
    Ok((s.loss, g.expect("gradients requested")))
}

/// Loss and gradients of `L_G`, evaluated with `f64` kernels.
pub fn generator_loss_f64(
    det: &DetectorWeights,
    gen: &GeneratorParams,
    batch: &Batch,
    lambda: f64,
) -> Result<(f64, GeneratorParams)> {
    let (s, g) = generator_objective::<f64>(det, gen, batch, lambda, true)?;
    Ok((s.loss, g.expect("gradients requested")))
}

/// Finite-difference check of the `L_D` gradient on one batch.
pub fn check_detector_gradients(
    det: &DetectorWeights,
    gen: Option<&GeneratorParams>,
    batch: &Batch,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let (_, grads) = detector_loss_f64(det, gen, batch, gamma)?;
    let params: Vec<Tensor> = det.tensors().into_iter().cloned().collect();
    let analytic: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();
    let rep = check_gradients(
        |p| {
            let w = DetectorWeights::from_tensors(p.to_vec())?;
            Ok(detector_objective::<f64>(&w, gen, batch, gamma, false)?
                .0
                .loss)
        },
        &params,
        &analytic,
        1e-3,
        samples,
        seed,
    )?;
    Ok(rep.max_rel_error)
}

/// Finite-difference check of the `L_G` gradient on one batch.
pub fn check_generator_gradients(
    det: &DetectorWeights,
    gen: &GeneratorParams,
    batch: &Batch,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let (_, grads) = generator_loss_f64(det, gen, batch, lambda)?;
    let params: Vec<Tensor> = gen.tensors().into_iter().cloned().collect();
    let analytic: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();
    let rep = check_gradients(
        |p| {
            let g = GeneratorParams::from_tensors(p.to_vec())?;
            Ok(generator_objective::<f64>(det, &g, batch, lambda, false)?
                .0
                .loss)
        },
        &params,
        &analytic,
        1e-3,
        samples,
        seed,
    )?;
    Ok(rep.max_rel_error)
}

/// The two networks and their optimiser states.
#[derive(Debug, Clone, PartialEq)]
pub struct Nets {
    pub detector: DetectorParams,
    pub generator: Option<GeneratorParams>,
    pub detector_adam: AdamState,
    pub generator_adam: Option<AdamState>,
}

impl Nets {
    /// Seeded initialisation. The detector weights are spectrally normalised
    /// straight away so training starts inside the constraint.
    pub fn init(cfg: &TrainConfig, features: usize) -> Self {
        let mut r = rng::derive(cfg.seed, rng::stream::DETECTOR_INIT);
        let weights = DetectorWeights::init(features, cfg.hidden, &mut r);
        let mut sr = rng::derive(cfg.seed, rng::stream::SPECTRAL_INIT);
        let mut detector = DetectorParams::with_weights(weights, &mut sr);
        apply_spectral_normalization_to(&mut detector, INIT_SN_ITERS, cfg.sn_scale as f32);
        let generator = (!cfg.ablation.no_generator).then(|| {
            let mut g = rng::derive(cfg.seed, rng::stream::GENERATOR_INIT);
            GeneratorParams::init(features, cfg.hidden, cfg.window, &mut g)
        });
        let detector_adam = AdamState::new(detector.weights.tensors());
        let generator_adam = generator.as_ref().map(|g| AdamState::new(g.tensors()));
        Self {
            detector,
            generator,
            detector_adam,
            generator_adam,
        }
    }
}

/// One generator update against a frozen detector.
pub fn generator_step(
    cfg: &TrainConfig,
    detector: &DetectorParams,
    generator: &mut GeneratorParams,
    adam: &mut AdamState,
    batch: &Batch,
) -> Result<StepStats> {
    if cfg.ablation.no_generator {
        return Err(ArtaError::config(
            "generator_step called with the generator ablated",
        ));
    }
    let (stats, grads) = generator_objective::<f32>(
        &detector.weights,
        generator,
        batch,
        cfg.effective_lambda(),
        true,
    )?;
    let grads = grads.expect("gradients requested");
    adam_update(&mut generator.tensors_mut(), &grads.tensors(), adam, cfg.lr)?;
    Ok(stats)
}

/// One detector update against a frozen generator (or none), followed by
/// spectral normalisation.
pub fn detector_step(
    cfg: &TrainConfig,
    detector: &mut DetectorParams,
    adam: &mut AdamState,
    generator: Option<&GeneratorParams>,
    batch: &Batch,
) -> Result<StepStats> {
    let (stats, grads) =
        detector_objective::<f32>(&detector.weights, generator, batch, cfg.gamma_rob, true)?;
    let grads = grads.expect("gradients requested");
    adam_update(
        &mut detector.weights.tensors_mut(),
        &grads.tensors(),
        adam,
        cfg.lr,
    )?;
    apply_spectral_normalization_to(detector, cfg.sn_iters, cfg.sn_scale as f32);
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Joint,
}

/// Epoch means of the per-batch statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub loss_d: f64,
    pub loss_g: Option<f64>,
    pub mask_l1: Option<f64>,
    pub clean_error: f64,
    /// `mse(x, D(x̃))` measured right after each generator update.
    pub masked_error: Option<f64>,
    pub grad_check: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// CSV with one row per epoch; optional columns are left empty.
    pub fn to_csv(&self, seed: u64) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
        let mut s = format!(
            "# seed={seed}\nepoch,phase,L_D,L_G,mask_l1_mean,clean_error,masked_error,grad_check\n"
        );
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{:.9e},{},{},{:.9e},{},{}\n",
                e.epoch,
                match e.phase {
                    Phase::Warmup => "warmup",
                    Phase::Joint => "joint",
                },
                e.loss_d,
                opt(e.loss_g),
                opt(e.mask_l1),
                e.clean_error,
                opt(e.masked_error),
                opt(e.grad_check),
            ));
        }
        s
    }
}

#[derive(Default)]
struct Acc {
    n: usize,
    loss_d: f64,
    loss_g: f64,
    g_n: usize,
    l1: f64,
    l1_n: usize,
    clean: f64,
    masked: f64,
    masked_n: usize,
}

impl Acc {
    fn record(&self, epoch: usize, phase: Phase, grad_check: Option<f64>) -> EpochRecord {
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        EpochRecord {
            epoch,
            phase,
            loss_d: self.loss_d / self.n.max(1) as f64,
            loss_g: mean(self.loss_g, self.g_n),
            mask_l1: mean(self.l1, self.l1_n),
            clean_error: self.clean / self.n.max(1) as f64,
            masked_error: mean(self.masked, self.masked_n),
            grad_check,
        }
    }
}

fn epoch_order(cfg: &TrainConfig, epoch: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::derive_indexed(
        cfg.seed,
        rng::stream::SHUFFLE,
        epoch as u64,
    ));
    idx
}

fn batches<'w, 'a>(
    windows: &'w [Window<'a>],
    order: &[usize],
    size: usize,
) -> Vec<Vec<Window<'a>>> {
    order
        .chunks(size)
        .map(|c| c.iter().map(|&i| windows[i]).collect())
        .collect()
}

/// Detector-only reconstruction training for `cfg.warmup_epochs` epochs.
pub fn warmup(
    cfg: &TrainConfig,
    detector: &mut DetectorParams,
    adam: &mut AdamState,
    windows: &[Window<'_>],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    if windows.is_empty() {
        return Err(ArtaError::config("no training windows"));
    }
    let mut records = Vec::with_capacity(cfg.warmup_epochs);
    for epoch in 0..cfg.warmup_epochs {
        let mut acc = Acc::default();
        for chunk in batches(windows, &epoch_order(cfg, epoch, windows.len()), cfg.batch) {
            let b = Batch::gather(&chunk, cfg.ablation.no_baseline)?;
            let s = detector_step(cfg, detector, adam, None, &b)?;
            acc.n += 1;
            acc.loss_d += s.loss;
            acc.clean += s.clean_error;
        }
        let rec = acc.record(epoch, Phase::Warmup, None);
        on_epoch(&rec);
        records.push(rec);
    }
    Ok(records)
}

/// Warm-up followed by the alternating phase, honouring the ablation flags.
pub fn joint_train(
    cfg: &TrainConfig,
    windows: &[Window<'_>],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Nets, TrainReport)> {
    cfg.validate()?;
    let first = windows
        .first()
        .ok_or_else(|| ArtaError::config("no training windows"))?;
    if first.steps != cfg.window {
        return Err(ArtaError::config(format!(
            "windows have {} steps, config says {}",
            first.steps, cfg.window
        )));
    }
    let mut nets = Nets::init(cfg, first.features);
    let mut report = TrainReport {
        epochs: warmup(
            cfg,
            &mut nets.detector,
            &mut nets.detector_adam,
            windows,
            &mut on_epoch,
        )?,
    };

    let adversarial = !cfg.ablation.no_generator && !cfg.ablation.no_adversarial;
    for j in 0..cfg.joint_epochs {
        let epoch = cfg.warmup_epochs + j;
        let mut acc = Acc::default();
        let mut grad_check = None;
        for (bi, chunk) in batches(windows, &epoch_order(cfg, epoch, windows.len()), cfg.batch)
            .into_iter()
            .enumerate()
        {
            let b = Batch::gather(&chunk, cfg.ablation.no_baseline)?;
            if cfg.grad_check && bi == 0 {
                let small = Batch::gather(&chunk[..chunk.len().min(2)], cfg.ablation.no_baseline)?;
                grad_check = Some(check_detector_gradients(
                    &nets.detector.weights,
                    nets.generator.as_ref(),
                    &small,
                    cfg.gamma_rob,
                    50,
                    rng::child_seed(cfg.seed, rng::stream::GRADCHECK, epoch as u64),
                )?);
            }
            if adversarial {
                let g = nets.generator.as_mut().expect("generator present");
                let adam = nets.generator_adam.as_mut().expect("generator optimiser");
                let s = generator_step(cfg, &nets.detector, g, adam, &b)?;
                acc.loss_g += s.loss;
                acc.g_n += 1;
            }
            let s = detector_step(
                cfg,
                &mut nets.detector,
                &mut nets.detector_adam,
                nets.generator.as_ref(),
                &b,
            )?;
            acc.n += 1;
            acc.loss_d += s.loss;
            acc.clean += s.clean_error;
            if let (Some(m), Some(l1)) = (s.masked_error, s.mask_l1) {
                acc.masked += m;
                acc.masked_n += 1;
                acc.l1 += l1;
                acc.l1_n += 1;
            }
        }
        let rec = acc.record(epoch, Phase::Joint, grad_check);
        on_epoch(&rec);
        report.epochs.push(rec);
    }
    Ok((nets, report))
}

//! Inference-time anomaly scores and window-to-timestamp alignment.

use std::fmt;
use std::str::FromStr;

use crate::data::{baseline_into, make_windows, TimeSeries, Window};
use crate::detector::{aggregate, Aggregator, DetectorKernel, DetectorParams};
use crate::error::{ArtaError, Result};
use crate::generator::{mask_into, GeneratorKernel, GeneratorParams};
use crate::model::Model;
use crate::numerics::loss::mse;

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Reconstruction error of the clean window.
    #[default]
    Detector,
    /// Reconstruction error weighted per timestamp by the generator mask.
    MaskWeighted,
    /// Clean reconstruction error minus the masked window's own reconstruction error.
    SensitivityGap,
}

impl Strategy {
    pub fn needs_generator(self) -> bool {
        self != Strategy::Detector
    }
}

impl FromStr for Strategy {
    type Err = ArtaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detector" => Ok(Strategy::Detector),
            "mask_weighted" => Ok(Strategy::MaskWeighted),
            "sensitivity_gap" => Ok(Strategy::SensitivityGap),
            _ => Err(ArtaError::config(format!(
                "unknown strategy {s:?} (detector|mask_weighted|sensitivity_gap)"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Detector => "detector",
            Strategy::MaskWeighted => "mask_weighted",
            Strategy::SensitivityGap => "sensitivity_gap",
        })
    }
}

/// One score per timestamp of the scored series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub strategy: Strategy,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `timestamp,score[,label]` with a leading `# seed=…` comment.
    pub fn to_csv(&self, labels: Option<&[u8]>, seed: u64) -> String {
        let mut s = format!("# seed={seed} strategy={}\n", self.strategy);
        s.push_str(if labels.is_some() {
            "timestamp,score,label\n"
        } else {
            "timestamp,score\n"
        });
        for (t, v) in self.scores.iter().enumerate() {
            match labels {
                Some(l) => s.push_str(&format!("{t},{v:e},{}\n", l[t])),
                None => s.push_str(&format!("{t},{v:e}\n")),
            }
        }
        s
    }
}

/// Reads a `timestamp,score[,label]` file written by [`ScoreSeries::to_csv`].
/// Returns the scores and, when the column exists, the labels.
pub fn parse_scores_csv(text: &str) -> Result<(Vec<f64>, Option<Vec<u8>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let score_col =
        col("score").ok_or_else(|| ArtaError::Format("no `score` column in header".into()))?;
    let label_col = col("label");
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |c: usize| -> Result<f64> {
            record[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ArtaError::Parse {
                    row,
                    column: c + 1,
                    message: format!("not a finite number: {:?}", &record[c]),
                })
        };
        scores.push(cell(score_col)?);
        if let Some(c) = label_col {
            labels.push(match cell(c)? {
                v if v == 0.0 => 0,
                v if v == 1.0 => 1,
                v => {
                    return Err(ArtaError::Parse {
                        row,
                        column: c + 1,
                        message: format!("label must be 0 or 1, got {v}"),
                    })
                }
            });
        }
    }
    if scores.is_empty() {
        return Err(ArtaError::Format("no score rows".into()));
    }
    Ok((scores, label_col.map(|_| labels)))
}

/// `(1/TF) Σ_t Σ_f m_t (x − x̂)²`.
fn mask_weighted(x: &[f32], recon: &[f32], mask: &[f32], features: usize) -> f64 {
    let sum: f64 = x
        .iter()
        .zip(recon)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let d = a as f64 - b as f64;
            mask[i / features] as f64 * (d * d)
        })
        .sum();
    sum / x.len() as f64
}

/// The networks and settings needed to score windows.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub detector: &'a DetectorParams,
    pub generator: Option<&'a GeneratorParams>,
    pub aggregator: Aggregator,
    /// Mask towards zero instead of the window mean.
    pub zero_baseline: bool,
}

impl<'a> Scorer<'a> {
    pub fn from_model(model: &'a Model) -> Self {
        Self {
            detector: &model.detector,
            generator: model.generator.as_ref(),
            aggregator: model.config.aggregator,
            zero_baseline: model.config.ablation.no_baseline,
        }
    }

    /// Scores equally shaped `T × F` inputs. Masks come from `masks` when
    /// given (one `T`-vector per input), otherwise from the generator.
    pub fn score(
        &self,
        inputs: &[&[f32]],
        steps: usize,
        strategy: Strategy,
        masks: Option<&[Vec<f32>]>,
    ) -> Result<Vec<f64>> {
        let f = self.detector.features();
        let n = steps * f;
        if strategy.needs_generator() && self.generator.is_none() && masks.is_none() {
            return Err(ArtaError::config(format!(
                "strategy {strategy} needs a generator"
            )));
        }
        if let Some(m) = masks {
            if m.len() != inputs.len() || m.iter().any(|v| v.len() != steps) {
                return Err(ArtaError::config(
                    "one mask of length T is needed per input",
                ));
            }
        }
        let dk = DetectorKernel::<f32>::new(&self.detector.weights);
        let gk = self.generator.map(GeneratorKernel::<f32>::new);
        let mut out = Vec::with_capacity(inputs.len());
        for (ci, chunk) in inputs.chunks(CHUNK).enumerate() {
            let b = chunk.len();
            let mut x = Vec::with_capacity(b * n);
            for w in chunk {
                if w.len() != n {
                    return Err(ArtaError::config(format!(
                        "input of {} values is not {steps}×{f}",
                        w.len()
                    )));
                }
                x.extend_from_slice(w);
            }
            let clean = dk.forward(&x, b, steps);
            if strategy == Strategy::Detector {
                for i in 0..b {
                    let r = i * n..(i + 1) * n;
                    out.push(aggregate(
                        &x[r.clone()],
                        &clean.recon[r],
                        f,
                        self.aggregator,
                    ));
                }
                continue;
            }
            let mask: Vec<f32> = match masks {
                Some(m) => m[ci * CHUNK..ci * CHUNK + b].concat(),
                None => {
                    gk.as_ref()
                        .expect("checked above")
                        .forward(&x, b, steps)
                        .mask
                }
            };
            let mask_of = |i: usize| &mask[i * steps..(i + 1) * steps];
            if strategy == Strategy::MaskWeighted {
                for i in 0..b {
                    let r = i * n..(i + 1) * n;
                    out.push(mask_weighted(&x[r.clone()], &clean.recon[r], mask_of(i), f));
                }
                continue;
            }
            let mut xt = vec![0.0f32; x.len()];
            let mut base = vec![0.0f32; n];
            for i in 0..b {
                let r = i * n..(i + 1) * n;
                if !self.zero_baseline {
                    baseline_into(&x[r.clone()], steps, f, &mut base);
                }
                mask_into(&x[r.clone()], mask_of(i), &base, f, &mut xt[r]);
            }
            let masked = dk.forward(&xt, b, steps);
            for i in 0..b {
                let r = i * n..(i + 1) * n;
                out.push(
                    mse(&x[r.clone()], &clean.recon[r.clone()])
                        - mse(&xt[r.clone()], &masked.recon[r]),
                );
            }
        }
        Ok(out)
    }
}

fn check_model(model: &Model, strategy: Strategy) -> Result<()> {
    if strategy.needs_generator() && model.generator.is_none() {
        return Err(ArtaError::config(format!(
            "strategy {strategy} needs a generator but the model was trained without one"
        )));
    }
    Ok(())
}

/// Score of one (already normalised) window.
pub fn score_window(model: &Model, w: &Window<'_>, strategy: Strategy) -> Result<f64> {
    check_model(model, strategy)?;
    if w.steps != model.window() || w.features != model.features() {
        return Err(ArtaError::config(format!(
            "window {}×{} does not match model {}×{}",
            w.steps,
            w.features,
            model.window(),
            model.features()
        )));
    }
    Ok(Scorer::from_model(model).score(&[w.values], w.steps, strategy, None)?[0])
}

/// Places window `i`'s score at timestamp `i + T − 1` and pads the first
/// `T − 1` timestamps with the first window's score.
pub fn align_scores(window_scores: &[f64], steps: usize) -> Vec<f64> {
    let Some(&first) = window_scores.first() else {
        return Vec::new();
    };
    let mut s = vec![first; steps - 1];
    s.extend_from_slice(window_scores);
    s
}

/// Stride-1 scores for a raw series; the model's normalizer is applied first.
pub fn score_series(model: &Model, ts: &TimeSeries, strategy: Strategy) -> Result<ScoreSeries> {
    check_model(model, strategy)?;
    let t = model.window();
    if ts.len() < t {
        return Err(ArtaError::config(format!(
            "series of length {} is shorter than the window {t}",
            ts.len()
        )));
    }
    if ts.features() != model.features() {
        return Err(ArtaError::config(format!(
            "series has {} sensors, model expects {}",
            ts.features(),
            model.features()
        )));
    }
    let normalized;
    let ts = match &model.normalizer {
        Some(n) => {
            normalized = n.apply(ts)?;
            &normalized
        }
        None => ts,
    };
    let windows = make_windows(ts, t, 1)?;
    let inputs: Vec<&[f32]> = windows.iter().map(|w| w.values).collect();
    let raw = Scorer::from_model(model).score(&inputs, t, strategy, None)?;
    if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
        return Err(ArtaError::numeric(
            "scoring",
            format!("non-finite score for window {bad}"),
        ));
    }
    Ok(ScoreSeries {
        scores: align_scores(&raw, t),
        strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::detector::DetectorWeights;
    use crate::numerics::LstmParams;
    use crate::rng;
    use rand::Rng;

    fn model(f: usize, h: usize, t: usize, seed: u64) -> Model {
        let mut r = rng::derive(seed, 0);
        let det = DetectorParams::with_weights(DetectorWeights::init(f, h, &mut r), &mut r);
        let gen = GeneratorParams::init(f, h, t, &mut r);
        let cfg = TrainConfig {
            window: t,
            hidden: h,
            ..TrainConfig::default()
        };
        Model::new(cfg, None, det, Some(gen))
    }

    fn random_values(n: usize, seed: u64) -> Vec<f32> {
        let mut r = rng::derive(seed, 1);
        (0..n).map(|_| r.random_range(-1.5..1.5)).collect()
    }

    // Straight-line f64 reference implementations.
    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn lstm(p: &LstmParams, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = p.hidden_size();
        let f = p.input_size();
        let (wi, wh, b) = (p.w_ih.data(), p.w_hh.data(), p.b.data());
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut out = Vec::new();
        for x in xs {
            let mut z = vec![0.0; 4 * h];
            for (g, zg) in z.iter_mut().enumerate() {
                *zg = b[g] as f64;
                for k in 0..f {
                    *zg += wi[g * f + k] as f64 * x[k];
                }
                for k in 0..h {
                    *zg += wh[g * h + k] as f64 * hs[k];
                }
            }
            for j in 0..h {
                let i = sig(z[j]);
                let fg = sig(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sig(z[3 * h + j]);
                cs[j] = fg * cs[j] + i * g;
                hs[j] = o * cs[j].tanh();
            }
            out.push(hs.clone());
        }
        out
    }

    fn rows(v: &[f32], f: usize) -> Vec<Vec<f64>> {
        v.chunks(f)
            .map(|r| r.iter().map(|&x| x as f64).collect())
            .collect()
    }

    fn reconstruct(m: &Model, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let w = &m.detector.weights;
        let z = lstm(&w.encoder, xs).pop().unwrap();
        let dec = lstm(&w.decoder, &vec![z; xs.len()]);
        let (pw, pb) = (w.projection.w.data(), w.projection.b.data());
        let f = m.features();
        let h = m.detector.hidden();
        dec.iter()
            .map(|hd| {
                (0..f)
                    .map(|o| {
                        pb[o] as f64 + (0..h).map(|k| pw[o * h + k] as f64 * hd[k]).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    fn mask(m: &Model, xs: &[Vec<f64>]) -> Vec<f64> {
        let g = m.generator.as_ref().unwrap();
        let hl = lstm(&g.lstm, xs).pop().unwrap();
        let (w, b) = (g.head.w.data(), g.head.b.data());
        (0..xs.len())
            .map(|t| {
                sig(b[t] as f64
                    + hl.iter()
                        .enumerate()
                        .map(|(k, v)| w[t * hl.len() + k] as f64 * v)
                        .sum::<f64>())
            })
            .collect()
    }

    fn oracle(m: &Model, v: &[f32], strategy: Strategy) -> f64 {
        let f = m.features();
        let xs = rows(v, f);
        let t = xs.len();
        let xh = reconstruct(m, &xs);
        let n = (t * f) as f64;
        let mut det = 0.0;
        let mut mw = 0.0;
        let ms = mask(m, &xs);
        let means: Vec<f64> = (0..f)
            .map(|j| xs.iter().map(|r| r[j]).sum::<f64>() / t as f64)
            .collect();
        let xt: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                (0..f)
                    .map(|j| ms[i] * xs[i][j] + (1.0 - ms[i]) * means[j])
                    .collect()
            })
            .collect();
        let xth = reconstruct(m, &xt);
        let mut masked = 0.0;
        for i in 0..t {
            for j in 0..f {
                let e = (xs[i][j] - xh[i][j]).powi(2);
                det += e;
                mw += ms[i] * e;
                masked += (xt[i][j] - xth[i][j]).powi(2);
            }
        }
        match strategy {
            Strategy::Detector => det / n,
            Strategy::MaskWeighted => mw / n,
            Strategy::SensitivityGap => (det - masked) / n,
        }
    }

    #[test]
    fn strategies_match_double_loop_reference() {
        for seed in 0..5 {
            let m = model(3, 5, 7, seed);
            let v = random_values(21, seed);
            let w = Window::from_slice(&v, 7, 3).unwrap();
            for s in [
                Strategy::Detector,
                Strategy::MaskWeighted,
                Strategy::SensitivityGap,
            ] {
                let got = score_window(&m, &w, s).unwrap();
                let want = oracle(&m, &v, s);
                assert!(
                    (got - want).abs() < 1e-6,
                    "{s} seed {seed}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn identity_mask_reductions_are_exact() {
        let m = model(3, 4, 6, 9);
        let scorer = Scorer::from_model(&m);
        let v = random_values(18, 9);
        let ones = vec![vec![1.0f32; 6]];
        let d = scorer.score(&[&v], 6, Strategy::Detector, None).unwrap()[0];
        let mw = scorer
            .score(&[&v], 6, Strategy::MaskWeighted, Some(&ones))
            .unwrap()[0];
        let gap = scorer
            .score(&[&v], 6, Strategy::SensitivityGap, Some(&ones))
            .unwrap()[0];
        assert_eq!(d, mw);
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn mask_weighted_never_exceeds_detector() {
        let m = model(2, 4, 5, 4);
        let scorer = Scorer::from_model(&m);
        for seed in 0..20 {
            let v = random_values(10, 100 + seed);
            let d = scorer.score(&[&v], 5, Strategy::Detector, None).unwrap()[0];
            let mw = scorer
                .score(&[&v], 5, Strategy::MaskWeighted, None)
                .unwrap()[0];
            assert!(mw <= d);
        }
    }

    #[test]
    fn series_alignment_and_padding() {
        let m = model(2, 3, 4, 2);
        let v = random_values(2 * 10, 2);
        let ts = TimeSeries::from_values(v.clone(), 2, None).unwrap();
        let s = score_series(&m, &ts, Strategy::Detector).unwrap();
        assert_eq!(s.len(), 10);
        for i in 0..7 {
            let w = Window::from_slice(&v[i * 2..(i + 4) * 2], 4, 2).unwrap();
            assert_eq!(
                s.scores[i + 3],
                score_window(&m, &w, Strategy::Detector).unwrap()
            );
        }
        assert!(s.scores[..3].iter().all(|&x| x == s.scores[3]));

        // Changing the future does not change past scores.
        let mut v2 = v.clone();
        v2[2 * 8] += 5.0;
        let s2 = score_series(
            &m,
            &TimeSeries::from_values(v2, 2, None).unwrap(),
            Strategy::Detector,
        )
        .unwrap();
        assert_eq!(s.scores[..8], s2.scores[..8]);
        assert_ne!(s.scores[8], s2.scores[8]);

        let exact = TimeSeries::from_values(v[..8].to_vec(), 2, None).unwrap();
        let s = score_series(&m, &exact, Strategy::Detector).unwrap();
        assert!(s.scores.iter().all(|&x| x == s.scores[0]) && s.len() == 4);
        let short = TimeSeries::from_values(v[..6].to_vec(), 2, None).unwrap();
        assert!(matches!(
            score_series(&m, &short, Strategy::Detector),
            Err(ArtaError::Config(_))
        ));
    }

    #[test]
    fn strategies_need_a_generator() {
        let mut m = model(2, 3, 4, 3);
        m.generator = None;
        let v = random_values(8, 3);
        let w = Window::from_slice(&v, 4, 2).unwrap();
        assert!(score_window(&m, &w, Strategy::Detector).is_ok());
        for s in [Strategy::MaskWeighted, Strategy::SensitivityGap] {
            assert!(matches!(score_window(&m, &w, s), Err(ArtaError::Config(_))));
        }
    }

    #[test]
    fn score_csv_round_trip() {
        let s = ScoreSeries {
            scores: vec![0.1, 1.0 / 3.0, -2.5e-7, 4.0],
            strategy: Strategy::SensitivityGap,
        };
        let labels = [0u8, 1, 1, 0];
        let (back, l) = parse_scores_csv(&s.to_csv(Some(&labels), 7)).unwrap();
        assert_eq!(back, s.scores);
        assert_eq!(l.unwrap(), labels);
        let (back, l) = parse_scores_csv(&s.to_csv(None, 7)).unwrap();
        assert_eq!(back, s.scores);
        assert!(l.is_none());
        assert!(parse_scores_csv("timestamp,score\n0,abc\n").is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            Strategy::Detector,
            Strategy::MaskWeighted,
            Strategy::SensitivityGap,
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("best".parse::<Strategy>().is_err());
    }
}

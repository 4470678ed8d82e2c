//! Threshold-sweep detection metrics and their tolerance-augmented volumes.
//!
//! Scores are min–max normalised to `[0, 1]` and swept over the thresholds
//! `h_i = i / I`; a timestamp is predicted anomalous when its score is `≥ h`.
//! A tolerance `ℓ` relaxes matching in both directions:
//!
//! * a predicted point is a true positive when it lies within `ℓ` steps of a
//!   labelled point (i.e. inside the labels dilated by `ℓ`), otherwise a false
//!   positive;
//! * a labelled point counts as detected when some prediction lies within `ℓ`
//!   steps of it, otherwise it is a false negative;
//! * true negatives are unpredicted points outside the dilated labels.
//!
//! At `ℓ = 0` these are the ordinary point-wise counts. Each curve is closed
//! with a virtual threshold above every score, where nothing is predicted
//! (recall 0, precision 1, FPR 0).

use std::fmt;
use std::str::FromStr;

use crate::error::{ArtaError, Result};

/// Point-wise counts at one threshold and tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    /// Predicted points within tolerance of a label.
    pub tp: usize,
    /// Predicted points away from every label.
    pub fp: usize,
    /// Labelled points with no prediction within tolerance.
    pub fn_: usize,
    /// Unpredicted points away from every label.
    pub tn: usize,
    /// Labelled points with a prediction within tolerance.
    pub detected: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let pos = self.detected + self.fn_;
        if pos == 0 {
            0.0
        } else {
            self.detected as f64 / pos as f64
        }
    }

    pub fn fpr(&self) -> f64 {
        if self.fp + self.tn == 0 {
            0.0
        } else {
            self.fp as f64 / (self.fp + self.tn) as f64
        }
    }
}

/// Precision, recall and F1 from counts. Precision is 1 when nothing is
/// predicted; F1 is 0 when precision and recall are both 0.
pub fn pr_f1(tp: usize, fp: usize, fn_: usize) -> Result<(f64, f64, f64)> {
    if tp + fn_ == 0 {
        return Err(ArtaError::Evaluation(
            "no anomalies in ground truth; recall is undefined".into(),
        ));
    }
    let p = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = tp as f64 / (tp + fn_) as f64;
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    Ok((p, r, f1))
}

/// Maximal runs of 1s as half-open `[start, end)` ranges.
pub fn segments(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, labels.len()));
    }
    out
}

/// Extends every run of `true` by `l` points on both sides, clipped to bounds.
pub fn dilate(mask: &[bool], l: usize) -> Vec<bool> {
    if l == 0 {
        return mask.to_vec();
    }
    let n = mask.len();
    // Difference array over the covered intervals.
    let mut diff = vec![0i32; n + 1];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            diff[i.saturating_sub(l)] += 1;
            diff[(i + l + 1).min(n)] -= 1;
        }
    }
    let mut acc = 0;
    diff[..n]
        .iter()
        .map(|d| {
            acc += d;
            acc > 0
        })
        .collect()
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(ArtaError::config(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ArtaError::config("scores must be finite"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(ArtaError::config("labels must be 0 or 1"));
    }
    Ok(())
}

fn check_classes(labels: &[u8]) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(ArtaError::Evaluation(
            "ground truth contains a single class; the metric is undefined".into(),
        ));
    }
    Ok(())
}

/// Min–max normalisation; a constant series maps to all zeros.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; scores.len()];
    }
    scores
        .iter()
        .map(|&s| ((s - lo) / range).clamp(0.0, 1.0))
        .collect()
}

/// Counts at threshold `h` and tolerance `l` for already normalised scores.
pub fn confusion(scores: &[f64], labels: &[u8], h: f64, l: usize) -> Result<Confusion> {
    check_inputs(scores, labels)?;
    let truth: Vec<bool> = labels.iter().map(|&v| v == 1).collect();
    let pred: Vec<bool> = scores.iter().map(|&s| s >= h).collect();
    Ok(count(&pred, &truth, &dilate(&truth, l), l))
}

fn count(pred: &[bool], truth: &[bool], truth_dil: &[bool], l: usize) -> Confusion {
    let pred_dil = dilate(pred, l);
    let mut c = Confusion::default();
    for i in 0..pred.len() {
        match (pred[i], truth_dil[i]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => {}
        }
        if truth[i] {
            if pred_dil[i] {
                c.detected += 1;
            } else {
                c.fn_ += 1;
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    Pr,
    Roc,
}

impl FromStr for CurveMode {
    type Err = ArtaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pr" => Ok(CurveMode::Pr),
            "roc" => Ok(CurveMode::Roc),
            _ => Err(ArtaError::config(format!("unknown curve {s:?} (pr|roc)"))),
        }
    }
}

impl fmt::Display for CurveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveMode::Pr => "pr",
            CurveMode::Roc => "roc",
        })
    }
}

/// Threshold count `I` and the tolerance list `ℓ_0 = 0 < … ≤ ℓ_J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VusGrid {
    pub thresholds: usize,
    pub tolerances: Vec<usize>,
}

impl VusGrid {
    pub const DEFAULT_I: usize = 50;
    pub const DEFAULT_J: usize = 10;
    pub const DEFAULT_L_MAX: usize = 20;

    /// `ℓ_j = round(j · l_max / J)` for `j = 0..=J`.
    pub fn uniform(thresholds: usize, slices: usize, l_max: usize) -> Result<Self> {
        if slices == 0 {
            return Err(ArtaError::config("J must be ≥ 1"));
        }
        let tolerances = (0..=slices)
            .map(|j| ((j * l_max) as f64 / slices as f64).round() as usize)
            .collect();
        Self::new(thresholds, tolerances)
    }

    pub fn new(thresholds: usize, tolerances: Vec<usize>) -> Result<Self> {
        if thresholds == 0 {
            return Err(ArtaError::config("I must be ≥ 1"));
        }
        if tolerances.len() < 2 || tolerances[0] != 0 {
            return Err(ArtaError::config(
                "tolerance grid must start at 0 and have J ≥ 1 further entries",
            ));
        }
        if tolerances.windows(2).any(|w| w[1] < w[0]) {
            return Err(ArtaError::config("tolerance grid must be non-decreasing"));
        }
        Ok(Self {
            thresholds,
            tolerances,
        })
    }

    pub fn threshold(&self, i: usize) -> f64 {
        i as f64 / self.thresholds as f64
    }
}

impl Default for VusGrid {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_I, Self::DEFAULT_J, Self::DEFAULT_L_MAX)
            .expect("valid defaults")
    }
}

/// Curve values over the `(I + 1) × (J + 1)` grid, indexed `[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSurface {
    pub thresholds: Vec<f64>,
    pub tolerances: Vec<usize>,
    /// Recall (PR) or TPR (ROC).
    pub y_recall: Vec<Vec<f64>>,
    /// Precision (PR) or FPR (ROC).
    pub x_other: Vec<Vec<f64>>,
}

impl MetricSurface {
    /// Builds the surface from normalised scores.
    pub fn build(scores: &[f64], labels: &[u8], grid: &VusGrid, mode: CurveMode) -> Result<Self> {
        check_inputs(scores, labels)?;
        let truth: Vec<bool> = labels.iter().map(|&v| v == 1).collect();
        let dilated: Vec<Vec<bool>> = grid.tolerances.iter().map(|&l| dilate(&truth, l)).collect();
        let thresholds: Vec<f64> = (0..=grid.thresholds).map(|i| grid.threshold(i)).collect();
        let mut y = Vec::with_capacity(thresholds.len());
        let mut x = Vec::with_capacity(thresholds.len());
        for &h in &thresholds {
            let pred: Vec<bool> = scores.iter().map(|&s| s >= h).collect();
            let (mut yr, mut xr) = (Vec::new(), Vec::new());
            for (j, &l) in grid.tolerances.iter().enumerate() {
                let c = count(&pred, &truth, &dilated[j], l);
                yr.push(c.recall());
                xr.push(match mode {
                    CurveMode::Pr => c.precision(),
                    CurveMode::Roc => c.fpr(),
                });
            }
            y.push(yr);
            x.push(xr);
        }
        Ok(Self {
            thresholds,
            tolerances: grid.tolerances.clone(),
            y_recall: y,
            x_other: x,
        })
    }

    /// CSV matrix: one row per threshold, one column per tolerance.
    pub fn to_csv(&self, which: &str) -> String {
        let grid = if which == "recall" {
            &self.y_recall
        } else {
            &self.x_other
        };
        let mut s = String::from("threshold");
        for l in &self.tolerances {
            s.push_str(&format!(",l{l}"));
        }
        s.push('\n');
        for (h, row) in self.thresholds.iter().zip(grid) {
            s.push_str(&format!("{h}"));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Trapezoidal area of one tolerance slice, closing the curve at the
/// virtual threshold above every score.
fn slice_area(surface: &MetricSurface, j: usize, mode: CurveMode) -> f64 {
    let n = surface.thresholds.len();
    let point = |i: usize| -> (f64, f64) {
        if i == n {
            return match mode {
                CurveMode::Pr => (0.0, 1.0),
                CurveMode::Roc => (0.0, 0.0),
            };
        }
        let r = surface.y_recall[i][j];
        let o = surface.x_other[i][j];
        match mode {
            // (x, y) = (recall, precision)
            CurveMode::Pr => (r, o),
            // (x, y) = (FPR, TPR)
            CurveMode::Roc => (o, r),
        }
    };
    let mut area = 0.0;
    for i in 1..=n {
        let (x0, y0) = point(i - 1);
        let (x1, y1) = point(i);
        area += 0.5 * (x0 - x1) * (y1 + y0);
    }
    area
}

#[derive(Debug, Clone, PartialEq)]
pub struct VusResult {
    /// Mean slice area over `j = 1..=J`; lies in `[0, 1]`.
    pub value: f64,
    /// `¼ Σ_j Σ_i ΔR (P_i + P_{i−1})` summed over the slices without averaging.
    pub raw: f64,
    pub surface: MetricSurface,
}

/// Volume under the PR or ROC surface.
pub fn vus(scores: &[f64], labels: &[u8], mode: CurveMode, grid: &VusGrid) -> Result<VusResult> {
    check_inputs(scores, labels)?;
    check_classes(labels)?;
    let norm = normalize_scores(scores);
    let surface = MetricSurface::build(&norm, labels, grid, mode)?;
    let areas: Vec<f64> = (1..grid.tolerances.len())
        .map(|j| slice_area(&surface, j, mode))
        .collect();
    let sum: f64 = areas.iter().sum();
    Ok(VusResult {
        value: sum / areas.len() as f64,
        raw: 0.5 * sum,
        surface,
    })
}

fn flat_area(scores: &[f64], labels: &[u8], thresholds: usize, mode: CurveMode) -> Result<f64> {
    check_inputs(scores, labels)?;
    check_classes(labels)?;
    let grid = VusGrid::new(thresholds, vec![0, 0])?;
    let surface = MetricSurface::build(&normalize_scores(scores), labels, &grid, mode)?;
    Ok(slice_area(&surface, 0, mode))
}

/// Area under the precision–recall curve over `I + 1` thresholds at `ℓ = 0`.
pub fn auc_pr(scores: &[f64], labels: &[u8], thresholds: usize) -> Result<f64> {
    flat_area(scores, labels, thresholds, CurveMode::Pr)
}

/// Area under the ROC curve over `I + 1` thresholds at `ℓ = 0`.
pub fn auc_roc(scores: &[f64], labels: &[u8], thresholds: usize) -> Result<f64> {
    flat_area(scores, labels, thresholds, CurveMode::Roc)
}

/// Probability that a random positive outscores a random negative, ties
/// counted half.
pub fn auc_rank(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    check_classes(labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tie groups.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Best F1 over the threshold grid at `ℓ = 0`, with its threshold.
pub fn best_f1(scores: &[f64], labels: &[u8], thresholds: usize) -> Result<(f64, f64)> {
    check_inputs(scores, labels)?;
    check_classes(labels)?;
    let norm = normalize_scores(scores);
    let mut best = (0.0, 0.0);
    for i in 0..=thresholds {
        let h = i as f64 / thresholds as f64;
        let c = confusion(&norm, labels, h, 0)?;
        let (_, _, f1) = pr_f1(c.tp, c.fp, c.fn_)?;
        if f1 > best.0 {
            best = (f1, h);
        }
    }
    Ok(best)
}

/// Every headline metric for one score series.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub auc_pr: f64,
    pub auc_roc: f64,
    pub vus_pr: f64,
    pub vus_roc: f64,
    pub vus_pr_raw: f64,
    pub vus_roc_raw: f64,
    pub best_f1: f64,
    pub best_f1_threshold: f64,
    pub grid: VusGrid,
}

pub fn evaluate(scores: &[f64], labels: &[u8], grid: &VusGrid) -> Result<MetricReport> {
    let pr = vus(scores, labels, CurveMode::Pr, grid)?;
    let roc = vus(scores, labels, CurveMode::Roc, grid)?;
    let (best_f1, best_f1_threshold) = best_f1(scores, labels, grid.thresholds)?;
    Ok(MetricReport {
        auc_pr: auc_pr(scores, labels, grid.thresholds)?,
        auc_roc: auc_roc(scores, labels, grid.thresholds)?,
        vus_pr: pr.value,
        vus_roc: roc.value,
        vus_pr_raw: pr.raw,
        vus_roc_raw: roc.raw,
        best_f1,
        best_f1_threshold,
        grid: grid.clone(),
    })
}

impl MetricReport {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("auc_pr", self.auc_pr),
            ("auc_roc", self.auc_roc),
            ("vus_pr", self.vus_pr),
            ("vus_roc", self.vus_roc),
            ("vus_pr_raw", self.vus_pr_raw),
            ("vus_roc_raw", self.vus_roc_raw),
            ("f1", self.best_f1),
            ("f1_threshold", self.best_f1_threshold),
        ]
    }

    /// `metric,value,I,J,l_max` rows after a `# seed=…` comment.
    pub fn to_csv(&self, seed: u64) -> String {
        let j = self.grid.tolerances.len() - 1;
        let l_max = *self.grid.tolerances.last().expect("non-empty grid");
        let mut s = format!("# seed={seed}\nmetric,value,I,J,l_max\n");
        for (name, v) in self.rows() {
            s.push_str(&format!(
                "{name},{v},{},{j},{l_max}\n",
                self.grid.thresholds
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_instance(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut r = rng::derive(seed, 11);
        let mut labels = vec![0u8; n];
        let mut t = r.random_range(0..20);
        while t < n {
            let len = r.random_range(1..8);
            for l in labels.iter_mut().skip(t).take(len) {
                *l = 1;
            }
            t += len + r.random_range(10..40);
        }
        let scores = labels
            .iter()
            .map(|&l| l as f64 * 0.6 + r.random::<f64>())
            .collect();
        (scores, labels)
    }

    #[test]
    fn pr_f1_examples() {
        assert_eq!(pr_f1(1, 0, 0).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(pr_f1(1, 1, 1).unwrap(), (0.5, 0.5, 0.5));
        let (p, r, f) = pr_f1(2, 1, 3).unwrap();
        assert!(
            (p - 2.0 / 3.0).abs() < 1e-15 && (r - 0.4).abs() < 1e-15 && (f - 0.5).abs() < 1e-15
        );
        assert!(matches!(pr_f1(0, 3, 0), Err(ArtaError::Evaluation(_))));
    }

    #[test]
    fn confusion_examples() {
        let labels = [0, 1, 1, 0, 0, 1];
        let scores: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let c = confusion(&scores, &labels, 0.5, 0).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&scores, &labels, 0.0, 0).unwrap();
        assert_eq!((c.fn_, c.tn), (0, 0));

        // Anomaly at 5, prediction at 6, ten points.
        let mut labels = [0u8; 10];
        labels[5] = 1;
        let mut scores = [0.0; 10];
        scores[6] = 1.0;
        let strict = confusion(&scores, &labels, 0.5, 0).unwrap();
        assert_eq!(
            strict,
            Confusion {
                tp: 0,
                fp: 1,
                fn_: 1,
                tn: 8,
                detected: 0
            }
        );
        let loose = confusion(&scores, &labels, 0.5, 1).unwrap();
        assert_eq!(
            loose,
            Confusion {
                tp: 1,
                fp: 0,
                fn_: 0,
                tn: 7,
                detected: 1
            }
        );
    }

    #[test]
    fn segments_and_dilation() {
        assert_eq!(
            segments(&[1, 1, 0, 0, 1, 0, 1]),
            vec![(0, 2), (4, 5), (6, 7)]
        );
        let m = [false, false, true, false, false, false, false, true];
        let d = dilate(&m, 2);
        assert_eq!(d, vec![true, true, true, true, true, true, true, true]);
        let d = dilate(&m, 1);
        assert_eq!(d, vec![false, true, true, true, false, false, true, true]);
    }

    #[test]
    fn trivial_curves() {
        let labels = [0, 0, 1, 1, 0, 0, 0, 1, 0, 0];
        let perfect: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        assert_eq!(auc_roc(&perfect, &labels, 50).unwrap(), 1.0);
        assert_eq!(auc_pr(&perfect, &labels, 50).unwrap(), 1.0);
        let grid = VusGrid::uniform(20, 4, 3).unwrap();
        assert!(vus(&perfect, &labels, CurveMode::Pr, &grid).unwrap().value >= 1.0 - 1.0 / 20.0);
        let constant = [0.3; 10];
        assert_eq!(auc_roc(&constant, &labels, 50).unwrap(), 0.5);
        assert_eq!(auc_rank(&constant, &labels).unwrap(), 0.5);
        assert!(matches!(
            auc_roc(&constant, &[0; 10], 50),
            Err(ArtaError::Evaluation(_))
        ));
        assert!(matches!(
            auc_roc(&constant, &[0; 9], 50),
            Err(ArtaError::Config(_))
        ));
    }

    #[test]
    fn degenerate_grid_reduces_to_auc() {
        for seed in 0..10 {
            let (s, l) = random_instance(200, seed);
            let grid = VusGrid::new(20, vec![0; 5]).unwrap();
            let a = auc_pr(&s, &l, 20).unwrap();
            let v = vus(&s, &l, CurveMode::Pr, &grid).unwrap();
            assert!((a - v.value).abs() < 1e-12);
            assert!((v.raw - 0.5 * 4.0 * a).abs() < 1e-12);
            let a = auc_roc(&s, &l, 20).unwrap();
            assert!((a - vus(&s, &l, CurveMode::Roc, &grid).unwrap().value).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_tracks_rank_statistic() {
        for seed in 0..20 {
            let (s, l) = random_instance(50, seed);
            let a = auc_roc(&s, &l, 100).unwrap();
            let b = auc_rank(&s, &l).unwrap();
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn surface_cells_grow_with_tolerance() {
        for seed in 0..10 {
            let (s, l) = random_instance(300, seed);
            let grid = VusGrid::uniform(20, 5, 10).unwrap();
            let pr = MetricSurface::build(&normalize_scores(&s), &l, &grid, CurveMode::Pr).unwrap();
            for i in 0..=20 {
                for j in 1..=5 {
                    assert!(pr.y_recall[i][j] >= pr.y_recall[i][j - 1]);
                    assert!(pr.x_other[i][j] >= pr.x_other[i][j - 1]);
                }
                if i > 0 {
                    for j in 0..=5 {
                        assert!(pr.y_recall[i][j] <= pr.y_recall[i - 1][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn tolerance_helps_offset_detections() {
        // Detections lag the labels by a few steps.
        let n = 400;
        let mut labels = vec![0u8; n];
        let mut scores = vec![0.1; n];
        for start in [50, 150, 260, 350] {
            for t in start..start + 5 {
                labels[t] = 1;
                scores[t + 3] = 0.9;
            }
        }
        let mut prev = 0.0;
        for l_max in [0, 2, 4, 8, 16] {
            let grid = VusGrid::uniform(20, 4, l_max).unwrap();
            let v = vus(&scores, &labels, CurveMode::Pr, &grid).unwrap().value;
            assert!(v >= prev - 1e-12, "l_max {l_max}: {v} < {prev}");
            prev = v;
        }
        assert!(prev > 0.9);
    }

    proptest! {
        #[test]
        fn monotone_transforms_leave_metrics_unchanged(seed in 0u64..1000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let (s, l) = random_instance(120, seed);
            // Continuous scores keep every normalised value clear of the threshold grid.
            let t: Vec<f64> = s.iter().map(|v| a * v + b).collect();
            let grid = VusGrid::uniform(16, 3, 4).unwrap();
            let e1 = evaluate(&s, &l, &grid).unwrap();
            let e2 = evaluate(&t, &l, &grid).unwrap();
            prop_assert!((e1.auc_roc - e2.auc_roc).abs() < 1e-9);
            prop_assert!((e1.auc_pr - e2.auc_pr).abs() < 1e-9);
            prop_assert!((e1.vus_pr - e2.vus_pr).abs() < 1e-9);
            prop_assert!((e1.vus_roc - e2.vus_roc).abs() < 1e-9);
            prop_assert!((auc_rank(&s, &l).unwrap() - auc_rank(&t.iter().map(|v| v.exp()).collect::<Vec<_>>(), &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn volumes_lie_in_unit_interval(seed in 0u64..1000) {
            let (s, l) = random_instance(150, seed);
            let e = evaluate(&s, &l, &VusGrid::uniform(10, 3, 6).unwrap()).unwrap();
            for (name, v) in e.rows() {
                if name.ends_with("_raw") {
                    continue;
                }
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}

//! Time-series containers, CSV I/O, z-score normalisation, sliding windows
//! and window-local baselines.
//!
//! Everything is time-major: row `t` of a series holds the `F` sensor
//! readings at timestamp `t`, so a window of `T` consecutive rows is one
//! contiguous `T × F` slice.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{ArtaError, Result};
use crate::numerics::Tensor;

/// `N × F` readings with optional 0/1 point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f32>,
    len: usize,
    features: usize,
    labels: Option<Vec<u8>>,
    sensor_names: Vec<String>,
}

impl TimeSeries {
    pub fn new(
        values: Vec<f32>,
        features: usize,
        labels: Option<Vec<u8>>,
        sensor_names: Vec<String>,
    ) -> Result<Self> {
        if features == 0 || values.is_empty() || values.len() % features != 0 {
            return Err(ArtaError::config(format!(
                "series needs N ≥ 1 rows of F ≥ 1 sensors, got {} values for {features} sensors",
                values.len()
            )));
        }
        let len = values.len() / features;
        if let Some(l) = &labels {
            if l.len() != len {
                return Err(ArtaError::config(format!(
                    "{} labels for {len} rows",
                    l.len()
                )));
            }
            if l.iter().any(|&v| v > 1) {
                return Err(ArtaError::config("labels must be 0 or 1"));
            }
        }
        if sensor_names.len() != features {
            return Err(ArtaError::config(format!(
                "{} sensor names for {features} sensors",
                sensor_names.len()
            )));
        }
        Ok(Self {
            values,
            len,
            features,
            labels,
            sensor_names,
        })
    }

    /// Series with generated sensor names `s0, s1, …`.
    pub fn from_values(values: Vec<f32>, features: usize, labels: Option<Vec<u8>>) -> Result<Self> {
        let names = (0..features).map(|i| format!("s{i}")).collect();
        Self::new(values, features, labels, names)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.features..(t + 1) * self.features]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn sensor_names(&self) -> &[String] {
        &self.sensor_names
    }

    pub fn with_labels(mut self, labels: Option<Vec<u8>>) -> Result<Self> {
        let names = std::mem::take(&mut self.sensor_names);
        Self::new(self.values, self.features, labels, names)
    }

    /// Values of sensor `f` over time.
    pub fn column(&self, f: usize) -> impl Iterator<Item = f32> + '_ {
        self.values.iter().skip(f).step_by(self.features).copied()
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start >= end || end > self.len {
            return Err(ArtaError::config(format!(
                "row range {start}..{end} invalid for N={}",
                self.len
            )));
        }
        TimeSeries::new(
            self.values[start * self.features..end * self.features].to_vec(),
            self.features,
            self.labels.as_ref().map(|l| l[start..end].to_vec()),
            self.sensor_names.clone(),
        )
    }

    /// Appends `other` below `self`; sensor counts must agree.
    pub fn concat(&self, other: &TimeSeries) -> Result<TimeSeries> {
        if other.features != self.features {
            return Err(ArtaError::config(
                "cannot concatenate series with different sensor counts",
            ));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        TimeSeries::new(values, self.features, labels, self.sensor_names.clone())
    }

    /// First row of the test region for a given training fraction.
    pub fn split_index(&self, train_fraction: f64) -> usize {
        ((self.len as f64) * train_fraction).floor() as usize
    }
}

fn is_label_header(name: &str) -> bool {
    name.trim().eq_ignore_ascii_case("label")
}

/// Parses CSV text: header row, numeric sensor columns, optional `label`
/// column (case-insensitive). Lines starting with `#` are comments.
///
/// With `has_labels` set the label column is required; otherwise it is
/// skipped if present.
pub fn parse_csv(text: &str, has_labels: bool) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let label_col = headers.iter().position(is_label_header);
    if has_labels && label_col.is_none() {
        return Err(ArtaError::Format("no `label` column in header".into()));
    }
    let sensor_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != label_col)
        .collect();
    if sensor_cols.is_empty() {
        return Err(ArtaError::Format("no sensor columns".into()));
    }
    let names = sensor_cols
        .iter()
        .map(|&c| headers[c].to_string())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(ArtaError::Format(format!(
                "ragged row at line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for &c in &sensor_cols {
            values.push(parse_cell(&record[c], line, c)?);
        }
        if has_labels {
            let c = label_col.expect("checked above");
            let v = parse_cell(&record[c], line, c)?;
            let l = match v {
                v if v == 0.0 => 0,
                v if v == 1.0 => 1,
                _ => {
                    return Err(ArtaError::Parse {
                        row: line,
                        column: c + 1,
                        message: format!("label must be 0 or 1, got {v}"),
                    })
                }
            };
            labels.push(l);
        }
    }
    if values.is_empty() {
        return Err(ArtaError::Format("no data rows".into()));
    }
    TimeSeries::new(
        values,
        sensor_cols.len(),
        has_labels.then_some(labels),
        names,
    )
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f32> {
    let v: f32 = cell.parse().map_err(|_| ArtaError::Parse {
        row,
        column: col + 1,
        message: format!("not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(ArtaError::Parse {
            row,
            column: col + 1,
            message: format!("non-finite value {cell:?}"),
        });
    }
    Ok(v)
}

/// Reads a CSV file; see [`parse_csv`].
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, has_labels)
}

/// True if the file's header names a `label` column.
pub fn csv_has_label_column(path: impl AsRef<Path>) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    Ok(header.split(',').any(is_label_header))
}

/// Renders a series as CSV. Values use the shortest representation that
/// parses back to the same `f32`.
pub fn format_csv(ts: &TimeSeries, comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&ts.sensor_names.join(","));
    if ts.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for t in 0..ts.len {
        let row = ts.row(t);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        if let Some(l) = &ts.labels {
            out.push(',');
            out.push_str(if l[t] == 1 { "1" } else { "0" });
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(ts: &TimeSeries, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    write_atomic(path, format_csv(ts, comment).as_bytes())
}

/// Writes via a sibling temp file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| ArtaError::config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A `T × F` view into a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub values: &'a [f32],
    pub start: usize,
    pub steps: usize,
    pub features: usize,
}

impl<'a> Window<'a> {
    pub fn from_slice(values: &'a [f32], steps: usize, features: usize) -> Result<Self> {
        if steps == 0 || features == 0 || values.len() != steps * features {
            return Err(ArtaError::config(format!(
                "window of {} values is not {steps}×{features}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            start: 0,
            steps,
            features,
        })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.steps, self.features], self.values.to_vec()).expect("window shape")
    }
}

/// Windows of `steps` rows starting at `0, stride, 2·stride, …`.
pub fn make_windows(ts: &TimeSeries, steps: usize, stride: usize) -> Result<Vec<Window<'_>>> {
    if steps == 0 || stride == 0 {
        return Err(ArtaError::config("window length and stride must be ≥ 1"));
    }
    if steps > ts.len {
        return Err(ArtaError::config(format!(
            "window length {steps} exceeds series length {}",
            ts.len
        )));
    }
    let f = ts.features;
    Ok((0..=ts.len - steps)
        .step_by(stride)
        .map(|start| Window {
            values: &ts.values[start * f..(start + steps) * f],
            start,
            steps,
            features: f,
        })
        .collect())
}

/// `floor((N − T) / stride) + 1`, the number of windows [`make_windows`] yields.
pub fn window_count(len: usize, steps: usize, stride: usize) -> usize {
    if steps > len || stride == 0 {
        0
    } else {
        (len - steps) / stride + 1
    }
}

/// Per-sensor window mean repeated over all `T` rows.
pub fn compute_baseline(w: &Window<'_>) -> Tensor {
    let mut out = vec![0.0f32; w.values.len()];
    baseline_into(w.values, w.steps, w.features, &mut out);
    Tensor::new(vec![w.steps, w.features], out).expect("window shape")
}

/// Baseline of one `steps × features` slice written into `out`.
pub(crate) fn baseline_into(values: &[f32], steps: usize, features: usize, out: &mut [f32]) {
    let mut sums = vec![0.0f64; features];
    for row in values.chunks_exact(features) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let means: Vec<f32> = sums.iter().map(|s| (s / steps as f64) as f32).collect();
    for row in out.chunks_exact_mut(features) {
        row.copy_from_slice(&means);
    }
}

/// Per-sensor z-score statistics from a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn fit(train: &TimeSeries) -> Self {
        let n = train.len as f64;
        let mut mean = vec![0.0f64; train.features];
        for row in train.values.chunks_exact(train.features) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; train.features];
        for row in train.values.chunks_exact(train.features) {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let std = var
            .iter()
            .map(|s| (s / n).sqrt().max(Self::STD_FLOOR))
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        self.check(ts)?;
        let mut out = ts.clone();
        for row in out.values.chunks_exact_mut(ts.features) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        self.check(ts)?;
        let mut out = ts.clone();
        for row in out.values.chunks_exact_mut(ts.features) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v as f64 * s + m) as f32;
            }
        }
        Ok(out)
    }

    fn check(&self, ts: &TimeSeries) -> Result<()> {
        if ts.features != self.mean.len() {
            return Err(ArtaError::config(format!(
                "normalizer fitted on {} sensors, series has {}",
                self.mean.len(),
                ts.features
            )));
        }
        Ok(())
    }
}

/// Fits on `train` and applies the same statistics to `train` and `others`.
pub fn fit_apply_normalizer(
    train: &TimeSeries,
    others: &[TimeSeries],
) -> Result<(Normalizer, TimeSeries, Vec<TimeSeries>)> {
    let norm = Normalizer::fit(train);
    let train_n = norm.apply(train)?;
    let others_n = others
        .iter()
        .map(|o| norm.apply(o))
        .collect::<Result<Vec<_>>>()?;
    Ok((norm, train_n, others_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_labels_case_insensitively() {
        let ts = parse_csv("a,b,label\n1,2,0\n3,4,0\n5,6,1\n", true).unwrap();
        assert_eq!((ts.len(), ts.features()), (3, 2));
        assert_eq!(ts.labels().unwrap(), &[0, 0, 1]);
        let ts = parse_csv("a,Label,b\n1,1,2\n", true).unwrap();
        assert_eq!(ts.labels().unwrap(), &[1]);
        assert_eq!(ts.values(), &[1.0, 2.0]);
    }

    #[test]
    fn reports_bad_cells_and_ragged_rows() {
        match parse_csv("a,b\n1,2\n3,x\n", false) {
            Err(ArtaError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_csv("a,b\n1,2\n3\n", false),
            Err(ArtaError::Format(_))
        ));
        assert!(matches!(
            parse_csv("a,b\n1,\n", false),
            Err(ArtaError::Parse { .. })
        ));
        assert!(matches!(
            parse_csv("a,b,label\n1,2,2\n", true),
            Err(ArtaError::Parse { .. })
        ));
    }

    #[test]
    fn skips_comment_lines() {
        let ts = parse_csv("# seed=3\na\n1.5\n", false).unwrap();
        assert_eq!(ts.values(), &[1.5]);
    }

    #[test]
    fn window_counts() {
        let ts = TimeSeries::from_values((0..5).map(|v| v as f32).collect(), 1, None).unwrap();
        let w = make_windows(&ts, 3, 1).unwrap();
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(w[1].values, &[1.0, 2.0, 3.0]);
        assert!(make_windows(&ts, 6, 1).is_err());
        let ts = TimeSeries::from_values(vec![0.0; 100], 1, None).unwrap();
        assert_eq!(make_windows(&ts, 100, 1).unwrap().len(), 1);
    }

    #[test]
    fn long_series_window_count() {
        let ts = TimeSeries::from_values(vec![0.0; 240_000], 1, None).unwrap();
        let mut counted = 0;
        let mut start = 0;
        while start + 100 <= 240_000 {
            counted += 1;
            start += 1;
        }
        assert_eq!(counted, 239_901);
        assert_eq!(make_windows(&ts, 100, 1).unwrap().len(), counted);
        assert_eq!(window_count(240_000, 100, 1), counted);
    }

    #[test]
    fn normalizer_basics() {
        let train = TimeSeries::from_values(vec![0.0, 5.0, 2.0, 5.0], 2, None).unwrap();
        let (norm, t, _) = fit_apply_normalizer(&train, &[]).unwrap();
        assert_eq!(norm.mean, vec![1.0, 5.0]);
        assert_eq!(norm.std[0], 1.0);
        assert_eq!(t.column(0).collect::<Vec<_>>(), vec![-1.0, 1.0]);
        assert_eq!(t.column(1).collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn baseline_examples() {
        let vals = [0.0f32, 2.0];
        let w = Window::from_slice(&vals, 2, 1).unwrap();
        assert_eq!(compute_baseline(&w).data(), &[1.0, 1.0]);
        let c = [3.5f32; 6];
        let w = Window::from_slice(&c, 3, 2).unwrap();
        assert!(compute_baseline(&w).data().iter().all(|&v| v == 3.5));
    }

    proptest! {
        #[test]
        fn csv_round_trip(vals in prop::collection::vec(-1e6f32..1e6, 1..40)) {
            let ts = TimeSeries::from_values(vals, 1, None).unwrap();
            let text = format_csv(&ts, None);
            let back = parse_csv(&text, false).unwrap();
            prop_assert_eq!(back.values(), ts.values());
            prop_assert_eq!(format_csv(&back, None), text);
        }

        #[test]
        fn normalization_statistics(vals in prop::collection::vec(-100f32..100.0, 6..60)) {
            let n = vals.len() / 3 * 3;
            let ts = TimeSeries::from_values(vals[..n].to_vec(), 3, None).unwrap();
            let norm = Normalizer::fit(&ts);
            let z = norm.apply(&ts).unwrap();
            for f in 0..3 {
                let col: Vec<f64> = z.column(f).map(|v| v as f64).collect();
                let m = col.iter().sum::<f64>() / col.len() as f64;
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                prop_assert!(m.abs() < 1e-5);
                if norm.std[f] > 1e-3 {
                    prop_assert!((sd - 1.0).abs() < 1e-5);
                }
            }
            let back = norm.invert(&z).unwrap();
            for (a, b) in back.values().iter().zip(ts.values()) {
                prop_assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
            }
        }

        #[test]
        fn baseline_idempotent_and_matches_loop(vals in prop::collection::vec(-10f32..10.0, 8..64)) {
            let n = vals.len() / 4 * 4;
            let w = Window::from_slice(&vals[..n], n / 4, 4).unwrap();
            let b = compute_baseline(&w);
            for f in 0..4 {
                let mut s = 0.0f64;
                for t in 0..n / 4 { s += vals[t * 4 + f] as f64; }
                let mean = s / (n / 4) as f64;
                for t in 0..n / 4 {
                    prop_assert!((b.at(t, f) as f64 - mean).abs() < 1e-5);
                }
            }
            let bw = Window::from_slice(b.data(), n / 4, 4).unwrap();
            prop_assert_eq!(compute_baseline(&bw), b.clone());
        }

        #[test]
        fn stride_one_windows_cover_all_starts(n in 1usize..200, t in 1usize..50) {
            prop_assume!(t <= n);
            let ts = TimeSeries::from_values(vec![0.0; n], 1, None).unwrap();
            let starts: Vec<usize> = make_windows(&ts, t, 1).unwrap().iter().map(|w| w.start).collect();
            prop_assert_eq!(starts, (0..=n - t).collect::<Vec<_>>());
        }
    }
}

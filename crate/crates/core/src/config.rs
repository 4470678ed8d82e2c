//! Training configuration and its flat `key=value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::detector::Aggregator;
use crate::error::{ArtaError, Result};

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    /// Plain autoencoder: no generator, no masked loss term.
    pub no_generator: bool,
    /// Generator frozen at its initialisation; the detector still sees its masks.
    pub no_adversarial: bool,
    /// Sparsity weight forced to zero.
    pub no_sparsity: bool,
    /// Zero baseline instead of the window mean.
    pub no_baseline: bool,
}

impl Ablation {
    /// Parses one ablation name and switches it on.
    pub fn enable(&mut self, name: &str) -> Result<()> {
        match name {
            "no_generator" => self.no_generator = true,
            "no_adversarial" => self.no_adversarial = true,
            "no_sparsity" => self.no_sparsity = true,
            "no_baseline" => self.no_baseline = true,
            "full" | "none" => {}
            _ => return Err(ArtaError::config(format!("unknown ablation {name:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub window: usize,
    pub hidden: usize,
    pub warmup_epochs: usize,
    pub joint_epochs: usize,
    pub lambda_sp: f64,
    pub gamma_rob: f64,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub aggregator: Aggregator,
    /// Stride between training windows.
    pub train_stride: usize,
    /// Leading fraction of each series used for training.
    pub split_fraction: f64,
    /// Power iterations per spectral-normalisation update.
    pub sn_iters: usize,
    /// Spectral norm every detector matrix is projected to after each update.
    pub sn_scale: f64,
    /// Run a finite-difference spot check at the start of every joint epoch.
    pub grad_check: bool,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 100,
            hidden: 64,
            warmup_epochs: 10,
            joint_epochs: 100,
            lambda_sp: 0.01,
            gamma_rob: 0.1,
            lr: 1e-4,
            batch: 32,
            seed: 0,
            aggregator: Aggregator::Mean,
            train_stride: 1,
            split_fraction: 0.5,
            sn_iters: 1,
            sn_scale: 1.0,
            grad_check: false,
            ablation: Ablation::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ArtaError::config(format!("invalid value {value:?} for key `{key}`")))
}

impl TrainConfig {
    /// Sparsity weight after ablations.
    pub fn effective_lambda(&self) -> f64 {
        if self.ablation.no_sparsity {
            0.0
        } else {
            self.lambda_sp
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ArtaError::config(msg.to_string()));
        if self.window == 0 {
            return bad("window must be ≥ 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be ≥ 1");
        }
        if self.batch == 0 {
            return bad("batch must be ≥ 1");
        }
        if self.train_stride == 0 {
            return bad("train_stride must be ≥ 1");
        }
        if !(self.lambda_sp >= 0.0) || !self.lambda_sp.is_finite() {
            return bad("lambda_sp must be ≥ 0");
        }
        if !(self.gamma_rob >= 0.0) || !self.gamma_rob.is_finite() {
            return bad("gamma_rob must be ≥ 0");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be > 0");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction <= 1.0) {
            return bad("split_fraction must be in (0, 1]");
        }
        if self.sn_iters == 0 {
            return bad("sn_iters must be ≥ 1");
        }
        if !(self.sn_scale > 0.0) || !self.sn_scale.is_finite() {
            return bad("sn_scale must be > 0");
        }
        Ok(())
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let flag = |v: &str| parse_value::<bool>(key, v);
        match key {
            "window" => self.window = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "warmup_epochs" => self.warmup_epochs = parse_value(key, value)?,
            "joint_epochs" => self.joint_epochs = parse_value(key, value)?,
            "lambda_sp" => self.lambda_sp = parse_value(key, value)?,
            "gamma_rob" => self.gamma_rob = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "batch" => self.batch = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "aggregator" => self.aggregator = value.parse()?,
            "train_stride" => self.train_stride = parse_value(key, value)?,
            "split_fraction" => self.split_fraction = parse_value(key, value)?,
            "sn_iters" => self.sn_iters = parse_value(key, value)?,
            "sn_scale" => self.sn_scale = parse_value(key, value)?,
            "grad_check" => self.grad_check = flag(value)?,
            "no_generator" => self.ablation.no_generator = flag(value)?,
            "no_adversarial" => self.ablation.no_adversarial = flag(value)?,
            "no_sparsity" => self.ablation.no_sparsity = flag(value)?,
            "no_baseline" => self.ablation.no_baseline = flag(value)?,
            _ => return Err(ArtaError::config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ArtaError::config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; [`TrainConfig::parse`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let a = &self.ablation;
        let _ = writeln!(s, "window={}", self.window);
        let _ = writeln!(s, "hidden={}", self.hidden);
        let _ = writeln!(s, "warmup_epochs={}", self.warmup_epochs);
        let _ = writeln!(s, "joint_epochs={}", self.joint_epochs);
        let _ = writeln!(s, "lambda_sp={:?}", self.lambda_sp);
        let _ = writeln!(s, "gamma_rob={:?}", self.gamma_rob);
        let _ = writeln!(s, "lr={:?}", self.lr);
        let _ = writeln!(s, "batch={}", self.batch);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "aggregator={}", self.aggregator);
        let _ = writeln!(s, "train_stride={}", self.train_stride);
        let _ = writeln!(s, "split_fraction={:?}", self.split_fraction);
        let _ = writeln!(s, "sn_iters={}", self.sn_iters);
        let _ = writeln!(s, "sn_scale={:?}", self.sn_scale);
        let _ = writeln!(s, "grad_check={}", self.grad_check);
        let _ = writeln!(s, "no_generator={}", a.no_generator);
        let _ = writeln!(s, "no_adversarial={}", a.no_adversarial);
        let _ = writeln!(s, "no_sparsity={}", a.no_sparsity);
        let _ = writeln!(s, "no_baseline={}", a.no_baseline);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.window, c.hidden, c.warmup_epochs, c.joint_epochs, c.batch),
            (100, 64, 10, 100, 32)
        );
        assert_eq!((c.lambda_sp, c.gamma_rob, c.lr), (0.01, 0.1, 1e-4));
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::default();
        c.seed = 99;
        c.lambda_sp = 0.003;
        c.ablation.no_baseline = true;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = TrainConfig::parse("window=10\nbogus=1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(TrainConfig::parse("window=abc").is_err());
        assert!(TrainConfig::parse("lambda_sp=-1").is_err());
    }

    #[test]
    fn ablation_names() {
        let mut a = Ablation::default();
        a.enable("no_sparsity").unwrap();
        assert!(a.no_sparsity);
        assert!(a.enable("no_such").is_err());
        let mut c = TrainConfig::default();
        c.ablation = a;
        assert_eq!(c.effective_lambda(), 0.0);
    }
}

//! A trained model and its binary file format.
//!
//! Layout (all integers `u32` little-endian):
//!
//! ```text
//! "ARTA" | version | tensor count
//! per tensor: name length | UTF-8 name | rank | dims… | f32 LE data (row-major)
//! config length | config text (key=value lines)
//! CRC-32 of every preceding byte
//! ```
//!
//! Optimiser moments are not stored; a loaded model is for inference.

use std::path::Path;

use crate::config::TrainConfig;
use crate::data::{make_windows, write_atomic, Normalizer, TimeSeries};
use crate::detector::{DetectorParams, DetectorWeights};
use crate::error::{ArtaError, Result};
use crate::generator::GeneratorParams;
use crate::numerics::{SpectralState, Tensor};
use crate::training::{joint_train, EpochRecord, Nets, TrainReport};

pub const MAGIC: &[u8; 4] = b"ARTA";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    /// Statistics applied to raw input before scoring.
    pub normalizer: Option<Normalizer>,
    pub detector: DetectorParams,
    pub generator: Option<GeneratorParams>,
}

impl Model {
    /// Normalizer statistics are rounded to `f32`, the precision they are stored at.
    pub fn new(
        config: TrainConfig,
        normalizer: Option<Normalizer>,
        detector: DetectorParams,
        generator: Option<GeneratorParams>,
    ) -> Self {
        Self {
            config,
            normalizer: normalizer.map(round_normalizer),
            detector,
            generator,
        }
    }

    /// Fits a normalizer on the leading `split_fraction` of `ts`, trains on
    /// those rows and packages the result.
    pub fn train(
        config: &TrainConfig,
        ts: &TimeSeries,
        on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<(Self, TrainReport)> {
        config.validate()?;
        let split = ts.split_index(config.split_fraction).max(1);
        if split < config.window {
            return Err(ArtaError::config(format!(
                "training split has {split} rows, fewer than the window {}",
                config.window
            )));
        }
        let train = ts.slice(0, split)?;
        let normalizer = round_normalizer(Normalizer::fit(&train));
        let train = normalizer.apply(&train)?;
        let windows = make_windows(&train, config.window, config.train_stride)?;
        let (nets, report) = joint_train(config, &windows, on_epoch)?;
        Ok((
            Self::from_nets(config.clone(), Some(normalizer), nets),
            report,
        ))
    }

    pub fn from_nets(config: TrainConfig, normalizer: Option<Normalizer>, nets: Nets) -> Self {
        Self::new(config, normalizer, nets.detector, nets.generator)
    }

    pub fn features(&self) -> usize {
        self.detector.features()
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (n, t) in DetectorWeights::NAMES
            .iter()
            .zip(self.detector.weights.tensors())
        {
            out.push((format!("detector.{n}"), t.clone()));
        }
        for (i, s) in self.detector.spectral.iter().enumerate() {
            out.push((format!("spectral.{i}.u"), s.u.clone()));
        }
        if let Some(g) = &self.generator {
            for (n, t) in GeneratorParams::NAMES.iter().zip(g.tensors()) {
                out.push((format!("generator.{n}"), t.clone()));
            }
        }
        if let Some(n) = &self.normalizer {
            let v = |x: &[f64]| Tensor::vector(x.iter().map(|&v| v as f32).collect());
            out.push(("normalizer.mean".into(), v(&n.mean)));
            out.push(("normalizer.std".into(), v(&n.std)));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, FORMAT_VERSION);
        let tensors = self.named_tensors();
        put_u32(&mut buf, tensors.len() as u32);
        for (name, t) in &tensors {
            put_u32(&mut buf, name.len() as u32);
            buf.extend_from_slice(name.as_bytes());
            put_u32(&mut buf, t.shape().len() as u32);
            for &d in t.shape() {
                put_u32(&mut buf, d as u32);
            }
            for &v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let text = self.config.to_text();
        put_u32(&mut buf, text.len() as u32);
        buf.extend_from_slice(text.as_bytes());
        let crc = crc32fast::hash(&buf);
        put_u32(&mut buf, crc);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(ArtaError::Model("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if &body[..4] != MAGIC {
            return Err(ArtaError::Model("bad magic bytes".into()));
        }
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(ArtaError::Model(format!(
                "checksum mismatch (stored {stored:08x}, computed {computed:08x})"
            )));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(ArtaError::Model(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let count = r.u32()? as usize;
        let mut tensors: Vec<(String, Tensor)> = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| ArtaError::Model("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| ArtaError::Model(format!("tensor {name} is too large")))?;
            let raw = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| ArtaError::Model("overflow".into()))?,
            )?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::new(dims, data)
                .map_err(|e| ArtaError::Model(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ArtaError::Model("config block is not UTF-8".into()))?;
        if r.pos != body.len() {
            return Err(ArtaError::Model("trailing bytes before checksum".into()));
        }
        let config = TrainConfig::parse(text)?;
        Self::assemble(config, tensors)
    }

    fn assemble(config: TrainConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut map: std::collections::BTreeMap<String, Tensor> = std::collections::BTreeMap::new();
        for (name, t) in tensors {
            if map.insert(name.clone(), t).is_some() {
                return Err(ArtaError::Model(format!("duplicate tensor {name}")));
            }
        }
        let det = DetectorWeights::NAMES
            .iter()
            .map(|n| take(&mut map, format!("detector.{n}")))
            .collect::<Result<Vec<_>>>()?;
        let weights = DetectorWeights::from_tensors(det)?;
        let spectral = (0..5)
            .map(|i| take(&mut map, format!("spectral.{i}.u")).map(|u| SpectralState { u }))
            .collect::<Result<Vec<_>>>()?;
        let detector = DetectorParams::new(weights, spectral)?;
        let has_gen = map.contains_key("generator.lstm.w_ih");
        let generator = if has_gen {
            let g = GeneratorParams::NAMES
                .iter()
                .map(|n| take(&mut map, format!("generator.{n}")))
                .collect::<Result<Vec<_>>>()?;
            Some(GeneratorParams::from_tensors(g)?)
        } else {
            None
        };
        let normalizer = if map.contains_key("normalizer.mean") {
            let v = |t: Tensor| t.data().iter().map(|&x| x as f64).collect::<Vec<_>>();
            let mean = v(take(&mut map, "normalizer.mean".into())?);
            let std = v(take(&mut map, "normalizer.std".into())?);
            Some(Normalizer { mean, std })
        } else {
            None
        };
        if let Some(name) = map.keys().next() {
            return Err(ArtaError::Model(format!("unexpected tensor {name}")));
        }
        let model = Self {
            config,
            normalizer,
            detector,
            generator,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let f = self.features();
        if self.detector.hidden() != self.config.hidden {
            return Err(ArtaError::Model(
                "detector hidden size disagrees with config".into(),
            ));
        }
        if let Some(g) = &self.generator {
            if g.features() != f
                || g.steps() != self.config.window
                || g.lstm.hidden_size() != self.config.hidden
            {
                return Err(ArtaError::Model(
                    "generator shape disagrees with detector/config".into(),
                ));
            }
        }
        if let Some(n) = &self.normalizer {
            if n.mean.len() != f || n.std.len() != f {
                return Err(ArtaError::Model(
                    "normalizer width disagrees with detector".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn round_normalizer(n: Normalizer) -> Normalizer {
    Normalizer {
        mean: n.mean.iter().map(|&v| v as f32 as f64).collect(),
        std: n.std.iter().map(|&v| v as f32 as f64).collect(),
    }
}

fn take(map: &mut std::collections::BTreeMap<String, Tensor>, name: String) -> Result<Tensor> {
    map.remove(&name)
        .ok_or_else(|| ArtaError::Model(format!("missing tensor {name}")))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ArtaError::Model("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn model(with_gen: bool) -> Model {
        let cfg = TrainConfig {
            window: 6,
            hidden: 3,
            ..TrainConfig::default()
        };
        let mut r = rng::derive(1, 0);
        let det = DetectorParams::with_weights(DetectorWeights::init(2, 3, &mut r), &mut r);
        let gen = with_gen.then(|| GeneratorParams::init(2, 3, 6, &mut r));
        let norm = Normalizer {
            mean: vec![0.1, -2.0],
            std: vec![1.5, 0.3],
        };
        Model::new(cfg, Some(norm), det, gen)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for g in [true, false] {
            let m = model(g);
            let bytes = m.to_bytes();
            let back = Model::from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let b = model(false).to_bytes();
        assert_eq!(&b[..4], b"ARTA");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8 + 5 + 2);
    }

    #[test]
    fn corruption_is_detected() {
        let mut b = model(true).to_bytes();
        let mid = b.len() / 2;
        b[mid] ^= 0x01;
        assert!(matches!(Model::from_bytes(&b), Err(ArtaError::Model(_))));
        assert!(matches!(
            Model::from_bytes(b"ARTA"),
            Err(ArtaError::Model(_))
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut b = model(false).to_bytes();
        b[4] = 2;
        let n = b.len() - 4;
        let crc = crc32fast::hash(&b[..n]);
        b[n..].copy_from_slice(&crc.to_le_bytes());
        match Model::from_bytes(&b) {
            Err(ArtaError::Model(m)) => assert!(m.contains("version"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

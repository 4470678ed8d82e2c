//! Adversarially robust reconstruction-based anomaly detection for
//! multivariate time series.
//!
//! An LSTM encoder–decoder detector is trained jointly with an LSTM mask
//! generator that learns which time steps to hide. The crate also contains
//! the evaluation machinery: stride-1 scoring, range-aware metrics with a
//! volume-under-surface summary, noise injection and empirical stability
//! checks.

pub mod config;
pub mod corruption;
pub mod data;
pub mod detector;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod scoring;
pub mod stability;
pub mod synth;
pub mod training;

pub use config::{Ablation, TrainConfig};
pub use corruption::{NoiseKind, NoiseSpec};
pub use data::{make_windows, Normalizer, TimeSeries, Window};
pub use detector::{Aggregator, DetectorParams, DetectorWeights, PointScores};
pub use error::{ArtaError, Result};
pub use generator::{GeneratorParams, TemporalMask};
pub use metrics::{evaluate, CurveMode, MetricReport, MetricSurface, VusGrid};
pub use model::Model;
pub use numerics::Tensor;
pub use scoring::{score_series, score_window, ScoreSeries, Scorer, Strategy};
pub use training::{joint_train, Batch, EpochRecord, Nets, TrainReport};

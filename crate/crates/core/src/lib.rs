//! Cough-audio screening pipeline.
//!
//! Audio ingestion, log-mel features, a from-scratch convolutional classifier
//! and a logistic baseline, triple-stratified cross-validation, segment/file/
//! individual score aggregation, ROC evaluation, ensembling, and the
//! testing-capacity lift model used to reason about triage operating points.
//!
//! The crate is organised bottom-up:
//!
//! - [`audio_io`]: WAV decoding and band-limited resampling.
//! - [`dsp`]: STFT, mel projection, rescaling and hand-crafted features.
//! - [`augment`]: background-noise mixing and time/frequency masking.
//! - [`models`]: conv net, label-smoothed loss, SGD, logistic regression.
//! - [`dataset`]: manifests, fold construction, segment sampling, synthetic data.
//! - [`inference`]: sliding windows and score aggregation.
//! - [`eval`]: ROC/AUC, operating points, fold statistics, t-test.
//! - [`ensemble`]: rank averaging and stacked meta-classifier.
//! - [`triage`]: capacity lift.
//! - [`experiment`]: run configuration and the train/eval/infer drivers.

pub mod audio_io;
pub mod augment;
pub mod dataset;
pub mod dsp;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod inference;
pub mod io_util;
pub mod models;
pub mod rng;
pub mod triage;

pub use audio_io::AudioClip;
pub use dataset::{FoldSplit, IndividualRecord};
pub use dsp::{DspConfig, LogMelPatch, Spectrogram};
pub use error::{Error, Result};
pub use eval::RocCurve;
pub use inference::Aggregator;
pub use triage::TriageParams;

/// Canonical sample rate of every clip entering the feature front end.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

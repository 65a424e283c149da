//! Source-separated spectrogram features for small-data genre classification.
//!
//! The pipeline turns audio into four-stem decompositions (bass, drums,
//! other, vocals), renders per-stem mel spectrograms, stacks them depthwise
//! into image-like feature tensors, and trains four small CNN variants on
//! them under a seeded repeated-trial protocol:
//!
//! * [`audio_io`] — WAV decode/encode, windowed-sinc resampling, segment
//!   selection, mono downmix.
//! * [`dsp`] — STFT/inverse STFT, mel filterbank, mel spectrograms.
//! * [`separation`] — external stem ingestion and a deterministic built-in
//!   median-filter separator whose stems always sum back to the mix.
//! * [`features`] — per-song featurization into `N x 128 x 458 x C` tensors
//!   and their on-disk container format.
//! * [`nn`] — a from-scratch CNN engine: standard and depthwise separable
//!   convolution, batch norm, pooling, dropout, dense, Adam, full backprop.
//! * [`experiment`] — stratified seeded splits, the repeated-trial protocol,
//!   macro-F1, Welch t-tests, synthetic dataset generation, and reports.

pub mod audio_io;
pub mod dsp;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod seeds;
pub mod separation;

/// Sample rate every clip is resampled to before analysis, in hertz.
pub const CANONICAL_SAMPLE_RATE: u32 = 22_050;

/// Canonical analysis segment length in samples (~10.61 s at 22,050 Hz).
///
/// Chosen so that a centered STFT with hop 512 yields exactly
/// `1 + 233_984 / 512 = 458` frames.
pub const CANONICAL_SEGMENT_LEN: usize = 233_984;

//! Audio decode, encode, resampling, and segment selection.
//!
//! Everything downstream consumes [`AudioClip`]: non-interleaved f64
//! samples (nominally in `[-1, 1]`), one or two channels, all channels the
//! same length. WAV is the only supported container; PCM 16-bit and IEEE
//! float 32-bit decode, float 32-bit encodes.

mod resample;
mod wav;

use std::path::Path;

use thiserror::Error;

pub use resample::resample;

/// Errors from audio I/O and clip operations.
#[derive(Debug, Error)]
pub enum AudioError {
    /// Malformed container or header.
    #[error("invalid WAV: {0}")]
    Format(String),
    /// Well-formed WAV whose encoding we do not handle.
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    /// Header promises more payload than the file holds.
    #[error("truncated WAV: {0}")]
    Truncated(String),
    /// Clip construction violated an invariant.
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    /// Clip shorter than a requested window.
    #[error("clip has {have} samples, need at least {need}")]
    InsufficientLength { have: usize, need: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A sampled waveform: per-channel amplitude sequences plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioClip {
    /// Build a clip, validating channel count, equal lengths, and rate.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self, AudioError> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(AudioError::InvalidClip(format!(
                "{} channels, expected 1 or 2",
                channels.len()
            )));
        }
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(AudioError::InvalidClip("channel lengths differ".into()));
        }
        Ok(Self { channels, sample_rate })
    }

    /// Mono clip from a single sample vector.
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![samples], sample_rate)
    }

    /// Silent mono clip of the given length.
    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self { channels: vec![vec![0.0; len]], sample_rate }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value across all channels.
    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// The sub-clip covered by `segment`.
    pub fn slice(&self, segment: Segment) -> AudioClip {
        let channels = self
            .channels
            .iter()
            .map(|c| c[segment.start_sample..segment.start_sample + segment.length_samples].to_vec())
            .collect();
        AudioClip { channels, sample_rate: self.sample_rate }
    }
}

/// A window into a clip: start offset and length, both in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start_sample: usize,
    pub length_samples: usize,
}

/// Decode a WAV file (PCM 16-bit or IEEE float 32-bit, 1-2 channels).
///
/// 16-bit samples are scaled by 1/32768; float samples pass through.
pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let bytes = std::fs::read(path)?;
    wav::decode(&bytes)
}

/// Encode a clip as an IEEE float 32-bit WAV; [`decode_wav`] inverts it.
pub fn encode_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let bytes = wav::encode(clip);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Downmix to mono by per-sample channel mean; mono clips pass through.
pub fn to_mono(clip: &AudioClip) -> AudioClip {
    if clip.num_channels() == 1 {
        return clip.clone();
    }
    let half: Vec<f64> = clip.channels[0]
        .iter()
        .zip(&clip.channels[1])
        .map(|(&l, &r)| (l + r) / 2.0)
        .collect();
    AudioClip { channels: vec![half], sample_rate: clip.sample_rate }
}

/// Pick the window of `length_samples` with maximal RMS energy among
/// windows starting on 0.5 s boundaries; ties break to the earliest start.
pub fn select_segment(clip: &AudioClip, length_samples: usize) -> Result<Segment, AudioError> {
    if length_samples == 0 {
        return Err(AudioError::InvalidClip("segment length must be positive".into()));
    }
    if clip.len() < length_samples {
        return Err(AudioError::InsufficientLength { have: clip.len(), need: length_samples });
    }
    let step = (clip.sample_rate as usize / 2).max(1);
    let last_start = clip.len() - length_samples;

    let mut best_start = 0usize;
    let mut best_energy = f64::NEG_INFINITY;
    let mut start = 0usize;
    while start <= last_start {
        // Summed in sample order so that windows with identical content
        // produce bitwise-identical energies and the tie-break is exact.
        let mut energy = 0.0f64;
        for ch in &clip.channels {
            for &x in &ch[start..start + length_samples] {
                energy += x * x;
            }
        }
        if energy > best_energy {
            best_energy = energy;
            best_start = start;
        }
        start += step;
    }
    Ok(Segment { start_sample: best_start, length_samples })
}

//! Time-frequency analysis: STFT, inverse STFT, mel filterbank, and the
//! normalized mel spectrogram every classifier input is built from.
//!
//! Canonical analysis settings are Hann-windowed, centered frames with
//! `n_fft = 2048` and `hop = 512` at 22,050 Hz, projected through a
//! 128-band Slaney-style mel filterbank. A canonical 233,984-sample
//! segment therefore yields exactly 128 x 458 values.

mod fft;

use num_complex::Complex64;
use thiserror::Error;

use crate::CANONICAL_SAMPLE_RATE;
pub use fft::Fft;

/// FFT length for canonical analysis.
pub const N_FFT: usize = 2048;
/// Hop length for canonical analysis (n_fft / 4, COLA for Hann).
pub const HOP: usize = 512;
/// Mel band count for canonical analysis.
pub const N_MELS: usize = 128;
/// Frame count of a canonical segment.
pub const CANONICAL_FRAMES: usize = 1 + crate::CANONICAL_SEGMENT_LEN / HOP;

/// Power floor for dB conversion and the silence cutoff.
const POWER_FLOOR: f64 = 1e-10;
/// dB range mapped onto [0, 1].
const DB_RANGE: f64 = 80.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("empty input signal")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Complex STFT of a mono signal, stored bin-major (`bins x frames`).
#[derive(Debug, Clone)]
pub struct StftMatrix {
    data: Vec<Complex64>,
    n_fft: usize,
    hop: usize,
    frames: usize,
    signal_len: usize,
}

impl StftMatrix {
    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Frequency bin count, `1 + n_fft / 2`.
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Length of the analyzed signal; istft trims to this.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[bin * self.frames + frame] = value;
    }

    /// One frequency bin across all frames.
    pub fn row(&self, bin: usize) -> &[Complex64] {
        &self.data[bin * self.frames..(bin + 1) * self.frames]
    }

    /// Magnitudes, bin-major.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    /// Center frequency of a bin in hertz for the given sample rate.
    pub fn bin_frequency(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.n_fft as f64
    }

    /// Same shape and framing, all bins zero.
    pub fn zeros_like(&self) -> StftMatrix {
        StftMatrix {
            data: vec![Complex64::new(0.0, 0.0); self.data.len()],
            ..*self
        }
    }

    /// Elementwise product with a bin-major real mask of identical shape.
    pub fn masked(&self, mask: &[f64]) -> StftMatrix {
        assert_eq!(mask.len(), self.data.len(), "mask shape mismatch");
        StftMatrix {
            data: self.data.iter().zip(mask).map(|(z, &w)| z * w).collect(),
            ..*self
        }
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reflect an out-of-range index back into `[0, len)` (no edge repeat).
fn reflect_index(i: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let mut k = i.rem_euclid(period);
    if k >= len as i64 {
        k = period - k;
    }
    k as usize
}

/// Hann-windowed, reflect-padded (centered) STFT.
///
/// Yields `1 + floor(len / hop)` frames of `1 + n_fft/2` bins.
pub fn stft(signal: &[f64], n_fft: usize, hop: usize) -> Result<StftMatrix, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if !n_fft.is_power_of_two() {
        return Err(DspError::Config(format!("n_fft {n_fft} is not a power of two")));
    }
    if hop == 0 || hop > n_fft {
        return Err(DspError::Config(format!("hop {hop} must be in 1..={n_fft}")));
    }

    let half = n_fft / 2;
    let frames = 1 + signal.len() / hop;
    let bins = half + 1;
    let window = hann(n_fft);
    let fft = Fft::new(n_fft);

    let mut data = vec![Complex64::new(0.0, 0.0); bins * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..frames {
        let offset = t as i64 * hop as i64 - half as i64;
        for (i, (slot, &w)) in buf.iter_mut().zip(&window).enumerate() {
            let x = signal[reflect_index(offset + i as i64, signal.len())];
            *slot = Complex64::new(x * w, 0.0);
        }
        fft.forward(&mut buf);
        for (bin, &v) in buf.iter().take(bins).enumerate() {
            data[bin * frames + t] = v;
        }
    }

    Ok(StftMatrix { data, n_fft, hop, frames, signal_len: signal.len() })
}

/// Inverse STFT by normalized overlap-add with the Hann synthesis window.
///
/// Requires the COLA hop `n_fft / 4`; output is trimmed to the signal
/// length recorded at analysis.
pub fn istft(m: &StftMatrix) -> Result<Vec<f64>, DspError> {
    if m.hop * 4 != m.n_fft {
        return Err(DspError::Config(format!(
            "hop {} violates COLA for Hann, need n_fft/4 = {}",
            m.hop,
            m.n_fft / 4
        )));
    }

    let n_fft = m.n_fft;
    let half = n_fft / 2;
    let window = hann(n_fft);
    let fft = Fft::new(n_fft);
    let padded_len = m.signal_len + n_fft;

    let mut acc = vec![0.0f64; padded_len];
    let mut norm = vec![0.0f64; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..m.frames {
        for bin in 0..=half {
            buf[bin] = m.get(bin, t);
        }
        for bin in 1..half {
            buf[n_fft - bin] = m.get(bin, t).conj();
        }
        fft.inverse(&mut buf);
        let start = t * m.hop;
        for i in 0..n_fft {
            let p = start + i;
            if p < padded_len {
                acc[p] += buf[i].re * window[i];
                norm[p] += window[i] * window[i];
            }
        }
    }

    let out = (0..m.signal_len)
        .map(|n| {
            let p = half + n;
            if norm[p] > 1e-12 {
                acc[p] / norm[p]
            } else {
                0.0
            }
        })
        .collect();
    Ok(out)
}

/// Triangular mel filterbank, rows ordered by center frequency.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
    center_freqs_hz: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Weights of one filter across FFT bins.
    pub fn row(&self, mel: usize) -> &[f64] {
        &self.weights[mel * self.n_bins..(mel + 1) * self.n_bins]
    }

    /// Triangle peak positions in hertz.
    pub fn center_freqs_hz(&self) -> &[f64] {
        &self.center_freqs_hz
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / (6.4f64.ln() / 27.0)
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * ((6.4f64.ln() / 27.0) * (mel - MIN_LOG_MEL)).exp()
    } else {
        F_SP * mel
    }
}

/// Build triangular filters with centers equally spaced on the Slaney mel
/// scale, each triangle area-normalized by `2 / (f_upper - f_lower)`.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank, DspError> {
    if n_mels == 0 {
        return Err(DspError::Config("n_mels must be at least 1".into()));
    }
    if !n_fft.is_power_of_two() {
        return Err(DspError::Config(format!("n_fft {n_fft} is not a power of two")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(DspError::Config(format!(
            "invalid frequency range [{f_min}, {f_max}] for Nyquist {nyquist}"
        )));
    }

    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut weights = vec![0.0f64; n_mels * n_bins];
    for m in 0..n_mels {
        let (lower, center, upper) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let norm = 2.0 / (upper - lower);
        let mut any_positive = false;
        for k in 0..n_bins {
            let f = k as f64 * sample_rate as f64 / n_fft as f64;
            let rising = (f - lower) / (center - lower);
            let falling = (upper - f) / (upper - center);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                any_positive = true;
            }
            weights[m * n_bins + k] = w * norm;
        }
        if !any_positive {
            return Err(DspError::Config(format!(
                "mel band {m} has no FFT bin support; reduce n_mels or raise n_fft"
            )));
        }
    }

    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        center_freqs_hz: edges_hz[1..=n_mels].to_vec(),
        f_min,
        f_max,
    })
}

/// Mel spectrogram in normalized dB units, `n_mels x frames`, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    n_mels: usize,
    frames: usize,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.values[mel * self.frames + frame]
    }

    /// Row-major `n_mels x frames` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Canonical mel spectrogram: power STFT -> 128-band mel projection ->
/// dB relative to the per-segment maximum, floored at -80 dB, rescaled to
/// [0, 1]. Digital silence maps to all zeros (the dB floor).
pub fn mel_spectrogram(signal: &[f64]) -> Result<MelSpectrogram, DspError> {
    let fb = mel_filterbank(N_MELS, N_FFT, CANONICAL_SAMPLE_RATE, 0.0, CANONICAL_SAMPLE_RATE as f64 / 2.0)?;
    mel_spectrogram_with(signal, &fb, N_FFT, HOP)
}

/// Mel spectrogram under explicit analysis settings.
pub fn mel_spectrogram_with(
    signal: &[f64],
    fb: &MelFilterbank,
    n_fft: usize,
    hop: usize,
) -> Result<MelSpectrogram, DspError> {
    let m = stft(signal, n_fft, hop)?;
    debug_assert_eq!(m.bins(), fb.n_bins());
    let frames = m.frames();

    let mut mel_power = vec![0.0f64; fb.n_mels() * frames];
    // power of one bin row at a time, reused across mel rows below it
    let mut bin_power = vec![0.0f64; m.bins() * frames];
    for bin in 0..m.bins() {
        for (t, z) in m.row(bin).iter().enumerate() {
            bin_power[bin * frames + t] = z.re * z.re + z.im * z.im;
        }
    }
    for mel in 0..fb.n_mels() {
        let row = fb.row(mel);
        let out = &mut mel_power[mel * frames..(mel + 1) * frames];
        for (bin, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let src = &bin_power[bin * frames..(bin + 1) * frames];
            for (o, &p) in out.iter_mut().zip(src) {
                *o += w * p;
            }
        }
    }

    let s_max = mel_power.iter().fold(0.0f64, |m, &v| m.max(v));
    let values = if s_max <= POWER_FLOOR {
        // Digital silence: pin to the bottom of the scale.
        vec![0.0; mel_power.len()]
    } else {
        mel_power
            .iter()
            .map(|&s| {
                let db = 10.0 * (s.max(POWER_FLOOR) / s_max).log10();
                (db.clamp(-DB_RANGE, 0.0) + DB_RANGE) / DB_RANGE
            })
            .collect()
    };

    Ok(MelSpectrogram { values, n_mels: fb.n_mels(), frames })
}

#[cfg(test)]
mod tests;

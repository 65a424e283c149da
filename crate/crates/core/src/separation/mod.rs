//! Four-stem decomposition of a mix: bass, drums, other, vocals.
//!
//! Stems come from one of two routes with the same output contract — the
//! stems sum back to the mix:
//!
//! * [`ingest_external_stems`] reads pre-separated stem WAVs laid out next
//!   to `mix.wav` and measures how well they actually sum to the mix.
//! * [`separate_hpss3`] is the built-in deterministic separator: median
//!   filtering splits the spectrogram into harmonic and percussive parts,
//!   percussive energy becomes drums, harmonic energy below 250 Hz becomes
//!   bass and the rest becomes other. Vocals are identically zero here.
//!
//! Both routes reduce to soft time-frequency masks that partition every
//! bin, so additivity holds by construction up to istft round-trip error.

use std::path::Path;

use thiserror::Error;

use crate::audio_io::{decode_wav, resample, AudioClip, AudioError};
use crate::dsp::{istft, stft, DspError, StftMatrix, HOP, N_FFT};

#[cfg(test)]
mod tests;

/// Harmonic mask below this frequency routes to the bass stem.
const BASS_CUTOFF_HZ: f64 = 250.0;
/// Median filter window, in frames (harmonic) and bins (percussive).
const MEDIAN_WINDOW: usize = 17;
/// Denominator guard for the soft masks.
const MASK_EPSILON: f64 = 1e-10;
/// Additivity defect above which ingestion raises a warning.
const DEFECT_WARN_THRESHOLD: f64 = 0.05;
/// Masks are snapped to this grid so each complementary pair sums to
/// exactly 1.0 in f64.
const MASK_GRID: f64 = 1_073_741_824.0; // 2^30

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("missing stem file: {0}")]
    MissingStem(String),
    #[error("incompatible stems: {0}")]
    IncompatibleStems(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid mask set: {0}")]
    InvalidMasks(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// The four instrument sources, in stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stem {
    Bass,
    Drums,
    Other,
    Vocals,
}

impl Stem {
    pub const ALL: [Stem; 4] = [Stem::Bass, Stem::Drums, Stem::Other, Stem::Vocals];

    pub fn name(self) -> &'static str {
        match self {
            Stem::Bass => "bass",
            Stem::Drums => "drums",
            Stem::Other => "other",
            Stem::Vocals => "vocals",
        }
    }

    /// Conventional stem file name next to `mix.wav`.
    pub fn file_name(self) -> String {
        format!("{}.wav", self.name())
    }
}

/// Per-instrument waveforms sharing the source mix's length, rate, and
/// channel count.
#[derive(Debug, Clone)]
pub struct StemSet {
    pub bass: AudioClip,
    pub drums: AudioClip,
    pub other: AudioClip,
    pub vocals: AudioClip,
}

impl StemSet {
    pub fn new(
        bass: AudioClip,
        drums: AudioClip,
        other: AudioClip,
        vocals: AudioClip,
    ) -> Result<Self, SeparationError> {
        let set = Self { bass, drums, other, vocals };
        let (len, rate, ch) =
            (set.bass.len(), set.bass.sample_rate(), set.bass.num_channels());
        for stem in Stem::ALL {
            let clip = set.get(stem);
            if clip.len() != len || clip.sample_rate() != rate || clip.num_channels() != ch {
                return Err(SeparationError::Shape(format!(
                    "stem {} differs in length/rate/channels",
                    stem.name()
                )));
            }
        }
        Ok(set)
    }

    pub fn get(&self, stem: Stem) -> &AudioClip {
        match stem {
            Stem::Bass => &self.bass,
            Stem::Drums => &self.drums,
            Stem::Other => &self.other,
            Stem::Vocals => &self.vocals,
        }
    }

    /// Sample-wise sum bass + drums + other + vocals.
    pub fn sum_clip(&self) -> AudioClip {
        let channels = (0..self.bass.num_channels())
            .map(|ch| {
                let mut acc = self.bass.channel(ch).to_vec();
                for stem in [Stem::Drums, Stem::Other, Stem::Vocals] {
                    for (a, &x) in acc.iter_mut().zip(self.get(stem).channel(ch)) {
                        *a += x;
                    }
                }
                acc
            })
            .collect();
        AudioClip::new(channels, self.bass.sample_rate()).expect("stems validated")
    }
}

/// Maximum absolute deviation between the mix and the stem sum.
pub fn additivity_defect(mix: &AudioClip, stems: &StemSet) -> f64 {
    let sum = stems.sum_clip();
    let mut worst = 0.0f64;
    for ch in 0..mix.num_channels() {
        for (&m, &s) in mix.channel(ch).iter().zip(sum.channel(ch)) {
            worst = worst.max((m - s).abs());
        }
    }
    worst
}

/// Reconstruction quality of the stem sum against the mix, in dB.
pub fn additivity_snr_db(mix: &AudioClip, stems: &StemSet) -> f64 {
    let sum = stems.sum_clip();
    let mut sig = 0.0f64;
    let mut err = 0.0f64;
    for ch in 0..mix.num_channels() {
        for (&m, &s) in mix.channel(ch).iter().zip(sum.channel(ch)) {
            sig += m * m;
            err += (m - s) * (m - s);
        }
    }
    if err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (sig / err).log10()
    }
}

/// Soft masks over time-frequency bins, one plane per stem per channel.
///
/// At every bin the four stem masks sum to exactly 1, so masked stems
/// reconstruct the mix.
#[derive(Debug, Clone)]
pub struct MaskSet {
    bins: usize,
    frames: usize,
    // [stem][channel][bin * frames + frame]
    masks: [Vec<Vec<f64>>; 4],
}

impl MaskSet {
    /// Validates shape agreement, the [0, 1] range, and the exact
    /// partition-of-unity invariant.
    pub fn new(
        bins: usize,
        frames: usize,
        masks: [Vec<Vec<f64>>; 4],
    ) -> Result<Self, SeparationError> {
        let channels = masks[0].len();
        if channels == 0 {
            return Err(SeparationError::InvalidMasks("no channels".into()));
        }
        for (stem, per_channel) in Stem::ALL.iter().zip(&masks) {
            if per_channel.len() != channels {
                return Err(SeparationError::InvalidMasks(format!(
                    "stem {} has {} channels, expected {channels}",
                    stem.name(),
                    per_channel.len()
                )));
            }
            for plane in per_channel {
                if plane.len() != bins * frames {
                    return Err(SeparationError::InvalidMasks(format!(
                        "stem {} plane has {} cells, expected {}",
                        stem.name(),
                        plane.len(),
                        bins * frames
                    )));
                }
                if plane.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                    return Err(SeparationError::InvalidMasks(format!(
                        "stem {} mask outside [0, 1]",
                        stem.name()
                    )));
                }
            }
        }
        for ch in 0..channels {
            for i in 0..bins * frames {
                let sum = masks[0][ch][i] + masks[1][ch][i] + masks[2][ch][i] + masks[3][ch][i];
                if sum != 1.0 {
                    return Err(SeparationError::InvalidMasks(format!(
                        "masks sum to {sum} at cell {i}, channel {ch}"
                    )));
                }
            }
        }
        Ok(Self { bins, frames, masks })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.masks[0].len()
    }

    pub fn plane(&self, stem: Stem, channel: usize) -> &[f64] {
        &self.masks[stem_index(stem)][channel]
    }
}

fn stem_index(stem: Stem) -> usize {
    match stem {
        Stem::Bass => 0,
        Stem::Drums => 1,
        Stem::Other => 2,
        Stem::Vocals => 3,
    }
}

/// Reconstruct stems as `istft(mask ⊙ stft)` per channel, trimmed to the
/// mix length recorded at analysis.
pub fn apply_masks(
    mix_stfts: &[StftMatrix],
    masks: &MaskSet,
    sample_rate: u32,
) -> Result<StemSet, SeparationError> {
    if mix_stfts.is_empty() || mix_stfts.len() != masks.channels() {
        return Err(SeparationError::Shape(format!(
            "{} STFT channels vs {} mask channels",
            mix_stfts.len(),
            masks.channels()
        )));
    }
    for m in mix_stfts {
        if m.bins() != masks.bins() || m.frames() != masks.frames() {
            return Err(SeparationError::Shape(format!(
                "STFT {}x{} vs masks {}x{}",
                m.bins(),
                m.frames(),
                masks.bins(),
                masks.frames()
            )));
        }
    }

    let mut clips = Vec::with_capacity(4);
    for stem in Stem::ALL {
        let channels = mix_stfts
            .iter()
            .enumerate()
            .map(|(ch, m)| istft(&m.masked(masks.plane(stem, ch))))
            .collect::<Result<Vec<_>, _>>()?;
        clips.push(AudioClip::new(channels, sample_rate)?);
    }
    let mut it = clips.into_iter();
    StemSet::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
}

/// Built-in deterministic separator: harmonic/percussive masking with a
/// frequency split of the harmonic part at 250 Hz. Vocals are zero.
pub fn separate_hpss3(mix: &AudioClip) -> Result<StemSet, SeparationError> {
    if mix.is_empty() {
        return Err(SeparationError::Dsp(DspError::EmptyInput));
    }
    let stfts: Vec<StftMatrix> = mix
        .channels()
        .iter()
        .map(|ch| stft(ch, N_FFT, HOP))
        .collect::<Result<_, _>>()?;

    let bins = stfts[0].bins();
    let frames = stfts[0].frames();
    let cutoff_bin = (BASS_CUTOFF_HZ * N_FFT as f64 / mix.sample_rate() as f64).ceil() as usize;

    let mut masks: [Vec<Vec<f64>>; 4] = Default::default();
    for m in &stfts {
        let mag = m.magnitudes();
        let harmonic = median_along_time(&mag, bins, frames);
        let percussive = median_along_frequency(&mag, bins, frames);

        let mut bass = vec![0.0f64; bins * frames];
        let mut drums = vec![0.0f64; bins * frames];
        let mut other = vec![0.0f64; bins * frames];
        let vocals = vec![0.0f64; bins * frames];
        for bin in 0..bins {
            let low = bin < cutoff_bin;
            for t in 0..frames {
                let i = bin * frames + t;
                let h2 = harmonic[i] * harmonic[i];
                let p2 = percussive[i] * percussive[i];
                // Snapping the ratio to a coarse grid makes m_h + m_p == 1 exact.
                let m_h = ((h2 / (h2 + p2 + MASK_EPSILON)) * MASK_GRID).round() / MASK_GRID;
                drums[i] = 1.0 - m_h;
                if low {
                    bass[i] = m_h;
                } else {
                    other[i] = m_h;
                }
            }
        }
        masks[0].push(bass);
        masks[1].push(drums);
        masks[2].push(other);
        masks[3].push(vocals);
    }

    let mask_set = MaskSet::new(bins, frames, masks)?;
    apply_masks(&stfts, &mask_set, mix.sample_rate())
}

/// Median over a centered window of [`MEDIAN_WINDOW`] frames, per bin row;
/// windows shrink at the edges.
fn median_along_time(mag: &[f64], bins: usize, frames: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; bins * frames];
    let mut scratch = Vec::with_capacity(MEDIAN_WINDOW);
    let half = MEDIAN_WINDOW / 2;
    for bin in 0..bins {
        let row = &mag[bin * frames..(bin + 1) * frames];
        for t in 0..frames {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(frames);
            scratch.clear();
            scratch.extend_from_slice(&row[lo..hi]);
            out[bin * frames + t] = median_of(&mut scratch);
        }
    }
    out
}

/// Median over a centered window of [`MEDIAN_WINDOW`] bins, per frame column.
fn median_along_frequency(mag: &[f64], bins: usize, frames: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; bins * frames];
    let mut scratch = Vec::with_capacity(MEDIAN_WINDOW);
    let half = MEDIAN_WINDOW / 2;
    for t in 0..frames {
        for bin in 0..bins {
            let lo = bin.saturating_sub(half);
            let hi = (bin + half + 1).min(bins);
            scratch.clear();
            for b in lo..hi {
                scratch.push(mag[b * frames + t]);
            }
            out[bin * frames + t] = median_of(&mut scratch);
        }
    }
    out
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Externally separated stems plus their measured additivity against the mix.
#[derive(Debug, Clone)]
pub struct IngestedStems {
    pub stems: StemSet,
    /// `max |mix - Σ stems|` over all samples and channels.
    pub additivity_defect: f64,
    /// Set when the defect exceeds 0.05 absolute amplitude.
    pub warning: bool,
}

/// Read `bass/drums/other/vocals.wav` beside `mix.wav` in `song_dir`,
/// reconciling rate (by resampling) and ±1 sample length slack (by zero
/// padding or trimming).
pub fn ingest_external_stems(song_dir: impl AsRef<Path>) -> Result<IngestedStems, SeparationError> {
    let dir = song_dir.as_ref();
    let mix_path = dir.join("mix.wav");
    if !mix_path.is_file() {
        return Err(SeparationError::MissingStem("mix".into()));
    }
    let mix = decode_wav(&mix_path)?;

    let mut clips = Vec::with_capacity(4);
    for stem in Stem::ALL {
        let path = dir.join(stem.file_name());
        if !path.is_file() {
            return Err(SeparationError::MissingStem(stem.name().into()));
        }
        let mut clip = decode_wav(&path)?;
        if clip.sample_rate() != mix.sample_rate() {
            clip = resample(&clip, mix.sample_rate())?;
        }
        if clip.sample_rate() != mix.sample_rate() {
            return Err(SeparationError::IncompatibleStems(format!(
                "stem {} rate {} vs mix {}",
                stem.name(),
                clip.sample_rate(),
                mix.sample_rate()
            )));
        }
        if clip.num_channels() != mix.num_channels() {
            return Err(SeparationError::IncompatibleStems(format!(
                "stem {} has {} channels, mix has {}",
                stem.name(),
                clip.num_channels(),
                mix.num_channels()
            )));
        }
        if clip.len().abs_diff(mix.len()) > 1 {
            return Err(SeparationError::IncompatibleStems(format!(
                "stem {} length {} vs mix {}",
                stem.name(),
                clip.len(),
                mix.len()
            )));
        }
        if clip.len() != mix.len() {
            let channels = clip
                .channels()
                .iter()
                .map(|ch| {
                    let mut v = ch.clone();
                    v.resize(mix.len(), 0.0);
                    v
                })
                .collect();
            clip = AudioClip::new(channels, mix.sample_rate())?;
        }
        clips.push(clip);
    }

    let mut it = clips.into_iter();
    let stems =
        StemSet::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap())?;
    let defect = additivity_defect(&mix, &stems);
    Ok(IngestedStems { stems, additivity_defect: defect, warning: defect > DEFECT_WARN_THRESHOLD })
}

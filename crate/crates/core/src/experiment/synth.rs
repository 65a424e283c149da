//! Synthetic dataset generation with exact ground-truth stems.
//!
//! Every clip is rendered stem-first: bass (sine plus harmonics following a
//! semitone pattern), drums (noise bursts on an onset grid), other
//! (chord textures over a colored-noise bed), vocals (silence). The mix is
//! the sample-wise sum. Stem samples are snapped to a 2^-16 grid before
//! summing, so the float32 files on disk satisfy `mix = Σ stems` bit-exactly
//! after decoding.
//!
//! Drums are deliberately loud and broadband: in the mixed spectrogram they
//! mask the quieter textures that actually distinguish genres, which is the
//! property the stacked per-stem representation is meant to recover.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio_io::{encode_wav, AudioClip};
use crate::features::{DatasetManifest, ManifestEntry};
use crate::seeds;
use crate::{CANONICAL_SAMPLE_RATE, CANONICAL_SEGMENT_LEN};

use super::ExperimentError;

/// Rendered clip length: one canonical segment plus one extra 0.5 s window
/// so segment selection has a real choice to make.
pub const CLIP_LEN: usize = CANONICAL_SEGMENT_LEN + 11_776;

/// Quantization grid that keeps stem sums exactly representable in f32.
const SAMPLE_GRID: f64 = 65_536.0; // 2^16

/// Spectral character of the "other" noise bed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseColor {
    White,
    Pink,
    Band { low_hz: f64, high_hz: f64 },
}

/// Everything that defines one synthetic genre.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGenreSpec {
    pub name: String,
    pub tempo_bpm: f64,
    /// Onset grid over a 2-bar loop, 16 eighth-note steps.
    pub drum_pattern: Vec<bool>,
    pub drum_level: f64,
    /// Continuous hat/ride noise bed inside the drum stem, relative to
    /// `drum_level`. This broadband wash sits over the whole spectrum and
    /// is what buries the quieter textures in the mixed spectrogram.
    pub hat_level: f64,
    pub bass_root_hz: f64,
    /// Semitone offsets from the root per step; `None` is a rest.
    pub bass_pattern: Vec<Option<i32>>,
    pub bass_level: f64,
    /// Chords as absolute frequencies in hertz, cycled bar by bar.
    pub chord_set: Vec<Vec<f64>>,
    pub other_level: f64,
    pub noise_color: NoiseColor,
}

impl SynthGenreSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let nyquist = CANONICAL_SAMPLE_RATE as f64 / 2.0;
        if !(60.0..=200.0).contains(&self.tempo_bpm) {
            return Err(ExperimentError::Config(format!(
                "genre {}: tempo {} outside [60, 200]",
                self.name, self.tempo_bpm
            )));
        }
        // third harmonic of the highest bass note must stay below Nyquist
        let max_semi = self.bass_pattern.iter().flatten().copied().max().unwrap_or(0);
        let top_bass = self.bass_root_hz * 2f64.powf(max_semi as f64 / 12.0) * 3.0;
        let mut freqs: Vec<f64> = self.chord_set.iter().flatten().copied().collect();
        freqs.push(top_bass);
        if let NoiseColor::Band { low_hz, high_hz } = self.noise_color {
            if !(0.0 < low_hz && low_hz < high_hz) {
                return Err(ExperimentError::Config(format!(
                    "genre {}: invalid noise band [{low_hz}, {high_hz}]",
                    self.name
                )));
            }
            freqs.push(high_hz);
        }
        if freqs.iter().any(|&f| !(0.0 < f && f < nyquist)) {
            return Err(ExperimentError::Config(format!(
                "genre {}: frequency outside (0, {nyquist})",
                self.name
            )));
        }
        if self.drum_pattern.len() != 16 || self.bass_pattern.len() != 16 {
            return Err(ExperimentError::Config(format!(
                "genre {}: patterns must have 16 steps",
                self.name
            )));
        }
        if self.chord_set.is_empty() {
            return Err(ExperimentError::Config(format!("genre {}: empty chord set", self.name)));
        }
        Ok(())
    }
}

/// The six-genre palette.
///
/// The genres share similar tempos and all carry a loud kick-plus-hats
/// rhythm section, so the mixed spectrogram is dominated by drums; genre
/// identity lives mostly in the bass line and the chord texture. Genres 0
/// and 1 share their entire rhythm section and differ only in the "other"
/// texture (the built-in similar pair); genres 3 and 4 are disjoint in
/// every field, including rhythm (the built-in different pair).
pub fn default_genre_specs() -> Vec<SynthGenreSpec> {
    let fourfloor_drums = pattern16(&[0, 4, 8, 12]);
    let fourfloor_bass = bass16(&[(0, 0), (3, 0), (6, 7), (8, 0), (11, 0), (14, 5)]);
    vec![
        SynthGenreSpec {
            name: "fourfloor".into(),
            tempo_bpm: 124.0,
            drum_pattern: fourfloor_drums.clone(),
            drum_level: 0.42,
            hat_level: 0.4,
            bass_root_hz: 55.0,
            bass_pattern: fourfloor_bass.clone(),
            bass_level: 0.2,
            chord_set: vec![vec![440.0, 523.25, 659.26], vec![349.23, 440.0, 523.25]],
            other_level: 0.11,
            noise_color: NoiseColor::White,
        },
        SynthGenreSpec {
            name: "warmfloor".into(),
            tempo_bpm: 124.0,
            drum_pattern: fourfloor_drums,
            drum_level: 0.42,
            hat_level: 0.4,
            bass_root_hz: 55.0,
            bass_pattern: fourfloor_bass,
            bass_level: 0.2,
            chord_set: vec![vec![587.33, 739.99, 880.0], vec![523.25, 622.25, 783.99]],
            other_level: 0.11,
            noise_color: NoiseColor::Pink,
        },
        SynthGenreSpec {
            name: "breakstep".into(),
            tempo_bpm: 127.0,
            drum_pattern: pattern16(&[0, 3, 6, 10, 12, 14]),
            drum_level: 0.42,
            hat_level: 0.35,
            bass_root_hz: 65.41,
            bass_pattern: bass16(&[(0, 0), (2, 0), (5, 3), (8, 5), (10, 3), (13, 0)]),
            bass_level: 0.2,
            chord_set: vec![vec![392.0, 466.16, 587.33], vec![415.3, 493.88, 622.25]],
            other_level: 0.11,
            noise_color: NoiseColor::Band { low_hz: 2000.0, high_hz: 4000.0 },
        },
        SynthGenreSpec {
            name: "halfstep".into(),
            tempo_bpm: 121.0,
            drum_pattern: pattern16(&[0, 8, 11]),
            drum_level: 0.4,
            hat_level: 0.25,
            bass_root_hz: 43.65,
            bass_pattern: bass16(&[(0, 0), (8, -2), (11, 0)]),
            bass_level: 0.22,
            chord_set: vec![vec![311.13, 369.99, 415.3]],
            other_level: 0.11,
            noise_color: NoiseColor::Pink,
        },
        SynthGenreSpec {
            name: "sprint".into(),
            tempo_bpm: 129.0,
            drum_pattern: pattern16(&[0, 2, 4, 6, 8, 10, 12, 14]),
            drum_level: 0.42,
            hat_level: 0.5,
            bass_root_hz: 87.31,
            bass_pattern: bass16(&[(0, 0), (2, 12), (4, 0), (6, 12), (8, 0), (10, 12), (12, 0), (14, 12)]),
            bass_level: 0.18,
            chord_set: vec![vec![1046.5, 1318.5, 1568.0]],
            other_level: 0.11,
            noise_color: NoiseColor::White,
        },
        SynthGenreSpec {
            name: "offbeat".into(),
            tempo_bpm: 118.0,
            drum_pattern: pattern16(&[2, 6, 10, 14]),
            drum_level: 0.42,
            hat_level: 0.35,
            bass_root_hz: 49.0,
            bass_pattern: bass16(&[(0, 0), (4, 5), (8, 7), (12, 5)]),
            bass_level: 0.2,
            chord_set: vec![vec![466.16, 554.37, 698.46], vec![440.0, 554.37, 659.26]],
            other_level: 0.11,
            noise_color: NoiseColor::Band { low_hz: 900.0, high_hz: 1800.0 },
        },
    ]
}

/// Default similar pair (same rhythm section, different texture).
pub const DEFAULT_SIMILAR_PAIR: (usize, usize) = (0, 1);
/// Default different pair (disjoint in every field).
pub const DEFAULT_DIFFERENT_PAIR: (usize, usize) = (3, 4);

fn pattern16(onsets: &[usize]) -> Vec<bool> {
    let mut p = vec![false; 16];
    for &i in onsets {
        p[i] = true;
    }
    p
}

fn bass16(notes: &[(usize, i32)]) -> Vec<Option<i32>> {
    let mut p = vec![None; 16];
    for &(i, semi) in notes {
        p[i] = Some(semi);
    }
    p
}

/// Ground-truth stems of one rendered clip.
pub struct RenderedClip {
    pub bass: Vec<f64>,
    pub drums: Vec<f64>,
    pub other: Vec<f64>,
    pub vocals: Vec<f64>,
    pub mix: Vec<f64>,
}

/// Render one clip deterministically from the genre spec and an RNG.
pub fn render_clip(spec: &SynthGenreSpec, rng: &mut ChaCha8Rng) -> RenderedClip {
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let len = CLIP_LEN;

    // Per-clip jitter keeps clips distinct without moving genre identity.
    // The stem gains vary widely: absolute mixing level is a nuisance
    // variable that per-stem spectrogram normalization cancels but the
    // mixed spectrogram has to absorb.
    let tempo = spec.tempo_bpm * rng.gen_range(0.98..1.02);
    let drum_gain = spec.drum_level * rng.gen_range(0.75..1.3);
    let bass_gain = spec.bass_level * rng.gen_range(0.55..1.4);
    let other_gain = spec.other_level * rng.gen_range(0.55..1.4);
    let rotation = rng.gen_range(0..16usize);
    let chord_offset = rng.gen_range(0..spec.chord_set.len());

    let step_len = ((60.0 / tempo) / 2.0 * sr) as usize;
    let steps_total = len / step_len + 2;

    let mut bass = vec![0.0f64; len];
    let mut drums = vec![0.0f64; len];
    let mut other = vec![0.0f64; len];

    // drums: exponentially decaying noise bursts on the onset grid
    let burst_len = (0.06 * sr) as usize;
    for step in 0..steps_total {
        if !spec.drum_pattern[(step + rotation) % 16] {
            continue;
        }
        let start = step * step_len;
        let amp = drum_gain * rng.gen_range(0.85..1.0);
        for i in 0..burst_len {
            let idx = start + i;
            if idx >= len {
                break;
            }
            let env = (-(i as f64) / (0.025 * sr)).exp();
            drums[idx] += amp * env * rng.gen_range(-1.0..1.0);
        }
    }
    // continuous hat/ride wash, amplitude-pulsed at sixteenth notes
    if spec.hat_level > 0.0 {
        let hat_gain = drum_gain * spec.hat_level;
        let sixteenth = (step_len / 2).max(1);
        for (i, d) in drums.iter_mut().enumerate() {
            let pos = (i % sixteenth) as f64 / sixteenth as f64;
            let pulse = 0.45 + 0.55 * (1.0 - pos) * (1.0 - pos);
            *d += hat_gain * pulse * rng.gen_range(-1.0..1.0);
        }
    }

    // bass: root-relative notes, three harmonics, per-note envelope
    for step in 0..steps_total {
        let Some(semi) = spec.bass_pattern[(step + rotation) % 16] else {
            continue;
        };
        let freq = spec.bass_root_hz * 2f64.powf(semi as f64 / 12.0);
        let start = step * step_len;
        let phase = rng.gen_range(0.0..2.0 * PI);
        let note_len = step_len.min(len.saturating_sub(start));
        for i in 0..note_len {
            let t = i as f64 / sr;
            let attack = (i as f64 / (0.005 * sr)).min(1.0);
            let decay = (-(i as f64) / (0.6 * step_len as f64)).exp();
            let env = attack * decay;
            let s = (2.0 * PI * freq * t + phase).sin()
                + 0.45 * (2.0 * PI * 2.0 * freq * t + 1.7 * phase).sin()
                + 0.2 * (2.0 * PI * 3.0 * freq * t + 2.3 * phase).sin();
            bass[start + i] += bass_gain * env * s;
        }
    }

    // other: one chord per bar plus a colored noise bed
    let bar_len = step_len * 8;
    let bars_total = len / bar_len + 1;
    for bar in 0..bars_total {
        let chord = &spec.chord_set[(bar + chord_offset) % spec.chord_set.len()];
        let start = bar * bar_len;
        let span = bar_len.min(len.saturating_sub(start));
        let phases: Vec<f64> = chord.iter().map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        for i in 0..span {
            let t = i as f64 / sr;
            let attack = (i as f64 / (0.05 * sr)).min(1.0);
            let release = ((span - i) as f64 / (0.05 * sr)).min(1.0);
            let mut s = 0.0;
            for (&f, &ph) in chord.iter().zip(&phases) {
                s += (2.0 * PI * f * t + ph).sin();
            }
            other[start + i] += other_gain * attack * release * s / chord.len() as f64;
        }
    }
    add_noise_bed(&mut other, spec.noise_color, other_gain * 0.3, rng);

    // headroom check before quantization so the grid stays exact
    let mut peak = 0.0f64;
    for i in 0..len {
        peak = peak.max((bass[i] + drums[i] + other[i]).abs());
    }
    if peak > 0.98 {
        let scale = 0.98 / peak;
        for v in bass.iter_mut().chain(drums.iter_mut()).chain(other.iter_mut()) {
            *v *= scale;
        }
    }
    for v in bass.iter_mut().chain(drums.iter_mut()).chain(other.iter_mut()) {
        *v = (*v * SAMPLE_GRID).round() / SAMPLE_GRID;
    }

    let vocals = vec![0.0f64; len];
    let mix: Vec<f64> = (0..len).map(|i| bass[i] + drums[i] + other[i] + vocals[i]).collect();
    RenderedClip { bass, drums, other, vocals, mix }
}

fn add_noise_bed(target: &mut [f64], color: NoiseColor, level: f64, rng: &mut ChaCha8Rng) {
    match color {
        NoiseColor::White => {
            for v in target.iter_mut() {
                *v += level * rng.gen_range(-1.0..1.0);
            }
        }
        NoiseColor::Pink => {
            // Paul Kellet's three-pole pink noise approximation
            let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
            for v in target.iter_mut() {
                let w: f64 = rng.gen_range(-1.0..1.0);
                b0 = 0.99765 * b0 + w * 0.0990460;
                b1 = 0.96300 * b1 + w * 0.2965164;
                b2 = 0.57000 * b2 + w * 1.0526913;
                *v += level * 0.2 * (b0 + b1 + b2 + w * 0.1848);
            }
        }
        NoiseColor::Band { low_hz, high_hz } => {
            // RBJ constant-skirt bandpass biquad
            let sr = CANONICAL_SAMPLE_RATE as f64;
            let f0 = (low_hz * high_hz).sqrt();
            let q = f0 / (high_hz - low_hz);
            let w0 = 2.0 * PI * f0 / sr;
            let alpha = w0.sin() / (2.0 * q);
            let (b0, b1, b2) = (alpha, 0.0, -alpha);
            let (a0, a1, a2) = (1.0 + alpha, -2.0 * w0.cos(), 1.0 - alpha);
            let (mut x1, mut x2, mut y1, mut y2) = (0.0f64, 0.0, 0.0, 0.0);
            for v in target.iter_mut() {
                let x = rng.gen_range(-1.0..1.0);
                let y = (b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2) / a0;
                x2 = x1;
                x1 = x;
                y2 = y1;
                y1 = y;
                *v += level * 2.0 * y;
            }
        }
    }
}

/// Render a dataset to `out_dir` (`<genre>/<song_id>/{mix,stems}.wav` plus
/// `manifest.csv`) and return its manifest. Deterministic in `seed`.
pub fn synth_dataset(
    specs: &[SynthGenreSpec],
    clips_per_genre: &[usize],
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, ExperimentError> {
    if specs.len() < 2 {
        return Err(ExperimentError::Config("need at least 2 genres".into()));
    }
    if specs.len() != clips_per_genre.len() {
        return Err(ExperimentError::Config(format!(
            "{} genres but {} clip counts",
            specs.len(),
            clips_per_genre.len()
        )));
    }
    for spec in specs {
        spec.validate()?;
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    let mut entries = Vec::new();
    for (spec, &count) in specs.iter().zip(clips_per_genre) {
        for j in 0..count {
            let song_id = format!("{}_{j:03}", spec.name);
            let dir = out_dir.join(&spec.name).join(&song_id);
            std::fs::create_dir_all(&dir)?;
            let mut rng = seeds::substream_rng(seed, &format!("clip:{}:{j}", spec.name));
            let clip = render_clip(spec, &mut rng);
            let write = |samples: &[f64], name: &str| -> Result<(), ExperimentError> {
                let clip = AudioClip::mono(samples.to_vec(), CANONICAL_SAMPLE_RATE)?;
                encode_wav(&clip, dir.join(name))?;
                Ok(())
            };
            write(&clip.mix, "mix.wav")?;
            write(&clip.bass, "bass.wav")?;
            write(&clip.drums, "drums.wav")?;
            write(&clip.other, "other.wav")?;
            write(&clip.vocals, "vocals.wav")?;
            entries.push(ManifestEntry {
                song_id,
                genre: spec.name.clone(),
                mix_path: dir.join("mix.wav"),
                stems_dir: Some(dir),
            });
        }
    }

    let manifest = DatasetManifest::new(entries)?;
    manifest.write_csv(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

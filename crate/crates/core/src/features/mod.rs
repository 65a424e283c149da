//! Feature assembly: per-song spectrograms stacked into the model-input
//! tensor variants, plus the on-disk tensor container and dataset manifest.
//!
//! Three variants are produced from the same canonical segment of a song:
//!
//! * `stems3` — bass, drums, and other stem spectrograms stacked depthwise
//!   (vocals excluded), shape `N x 128 x 458 x 3`;
//! * `mix_full` — one spectrogram of the mix, `N x 128 x 458 x 1`;
//! * `mix_novox` — one spectrogram of the mix minus the vocals stem.
//!
//! The segment window is always chosen on the mix and reused for every
//! stem, so the stacked channels stay time-aligned.

mod tensor_io;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio_io::{decode_wav, resample, select_segment, to_mono, AudioClip, AudioError};
use crate::dsp::{mel_spectrogram, DspError, MelSpectrogram, CANONICAL_FRAMES, N_MELS};
use crate::nn::FeatureMap;
use crate::separation::{ingest_external_stems, separate_hpss3, SeparationError, Stem, StemSet};
use crate::{CANONICAL_SAMPLE_RATE, CANONICAL_SEGMENT_LEN};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("song {0}: {1}")]
    Audio(String, #[source] AudioError),
    #[error("song {0}: {1}")]
    Separation(String, #[source] SeparationError),
    #[error("song {0}: {1}")]
    Dsp(String, #[source] DspError),
    #[error("tensor format error: {0}")]
    Format(String),
    #[error("truncated tensor file: {0}")]
    Truncated(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("unknown variant '{0}'; valid: stems3, mix_full, mix_novox")]
    UnknownVariant(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which tensor layout to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Stems3,
    MixFull,
    MixNovox,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Stems3, Variant::MixFull, Variant::MixNovox];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Stems3 => "stems3",
            Variant::MixFull => "mix_full",
            Variant::MixNovox => "mix_novox",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, FeatureError> {
        Self::ALL
            .into_iter()
            .find(|v| v.id() == id)
            .ok_or_else(|| FeatureError::UnknownVariant(id.to_string()))
    }

    pub fn channels(self) -> usize {
        match self {
            Variant::Stems3 => 3,
            _ => 1,
        }
    }

    fn channel_names(self) -> Vec<String> {
        match self {
            Variant::Stems3 => vec!["bass".into(), "drums".into(), "other".into()],
            Variant::MixFull => vec!["mix".into()],
            Variant::MixNovox => vec!["mix_novox".into()],
        }
    }
}

/// Where stems come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatorKind {
    /// Built-in median-filter separator.
    Builtin,
    /// Pre-separated stem files beside the mix.
    External,
}

impl SeparatorKind {
    pub fn id(self) -> &'static str {
        match self {
            SeparatorKind::Builtin => "builtin",
            SeparatorKind::External => "external",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, FeatureError> {
        match id {
            "builtin" => Ok(SeparatorKind::Builtin),
            "external" => Ok(SeparatorKind::External),
            other => Err(FeatureError::Manifest(format!(
                "unknown separator '{other}'; valid: builtin, external"
            ))),
        }
    }
}

/// One dataset row.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub song_id: String,
    pub genre: String,
    pub mix_path: PathBuf,
    pub stems_dir: Option<PathBuf>,
}

/// The dataset: entries plus the ordered genre list (order of first
/// appearance fixes the class ids).
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    genres: Vec<String>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, FeatureError> {
        if entries.is_empty() {
            return Err(FeatureError::Manifest("empty manifest".into()));
        }
        let mut genres: Vec<String> = Vec::new();
        let mut seen_ids = std::collections::HashSet::new();
        for e in &entries {
            if !seen_ids.insert(e.song_id.clone()) {
                return Err(FeatureError::Manifest(format!("duplicate song_id {}", e.song_id)));
            }
            if !genres.contains(&e.genre) {
                genres.push(e.genre.clone());
            }
        }
        Ok(Self { entries, genres })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn class_of(&self, genre: &str) -> Option<u32> {
        self.genres.iter().position(|g| g == genre).map(|i| i as u32)
    }

    pub fn labels(&self) -> Vec<u32> {
        self.entries.iter().map(|e| self.class_of(&e.genre).expect("genre indexed")).collect()
    }

    /// Read `song_id,genre,mix_path,stems_dir` CSV; relative paths resolve
    /// against the manifest's directory.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| FeatureError::Manifest(format!("cannot read {}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| FeatureError::Manifest(e.to_string()))?
            .clone();
        let expected = ["song_id", "genre", "mix_path", "stems_dir"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(FeatureError::Manifest(format!(
                "header {:?}, expected {expected:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let resolve = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| FeatureError::Manifest(e.to_string()))?;
            if record.len() != 4 {
                return Err(FeatureError::Manifest(format!("row with {} fields", record.len())));
            }
            entries.push(ManifestEntry {
                song_id: record[0].to_string(),
                genre: record[1].to_string(),
                mix_path: resolve(&record[2]),
                stems_dir: if record[3].is_empty() { None } else { Some(resolve(&record[3])) },
            });
        }
        Self::new(entries)
    }

    /// Write the manifest with paths relative to `base` where possible.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let rel = |p: &Path| {
            p.strip_prefix(&base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
        };
        let mut out = String::from("song_id,genre,mix_path,stems_dir\n");
        for e in &self.entries {
            let stems = e.stems_dir.as_deref().map(rel).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.song_id,
                e.genre,
                rel(&e.mix_path).display(),
                stems.display()
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// The stacked spectrogram tensor: `N x height x width x channels` float32
/// values in [0, 1] plus labels and names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    data: Vec<f32>,
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub labels: Vec<u32>,
    pub class_names: Vec<String>,
    pub channel_names: Vec<String>,
}

impl FeatureTensor {
    pub fn new(
        data: Vec<f32>,
        n: usize,
        height: usize,
        width: usize,
        channels: usize,
        labels: Vec<u32>,
        class_names: Vec<String>,
        channel_names: Vec<String>,
    ) -> Result<Self, FeatureError> {
        if data.len() != n * height * width * channels {
            return Err(FeatureError::Format(format!(
                "{} values for shape ({n}, {height}, {width}, {channels})",
                data.len()
            )));
        }
        if labels.len() != n {
            return Err(FeatureError::Format(format!("{} labels for {n} samples", labels.len())));
        }
        let k = class_names.len();
        if labels.iter().any(|&l| l as usize >= k) {
            return Err(FeatureError::Format(format!("label out of range for {k} classes")));
        }
        if channel_names.len() != channels {
            return Err(FeatureError::Format(format!(
                "{} channel names for {channels} channels",
                channel_names.len()
            )));
        }
        if channels == 3 && channel_names != ["bass", "drums", "other"] {
            return Err(FeatureError::Format(format!(
                "3-channel tensors must be [bass, drums, other], got {channel_names:?}"
            )));
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FeatureError::Format("tensor values outside [0, 1]".into()));
        }
        Ok(Self { data, n, height, width, channels, labels, class_names, channel_names })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.height, self.width, self.channels)
    }

    /// One sample's `height x width x channels` block.
    pub fn sample(&self, i: usize) -> &[f32] {
        let stride = self.height * self.width * self.channels;
        &self.data[i * stride..(i + 1) * stride]
    }

    /// Gather samples into an f64 batch for the model, with their labels.
    pub fn batch(&self, indices: &[usize]) -> (FeatureMap, Vec<u32>) {
        let stride = self.height * self.width * self.channels;
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend(self.sample(i).iter().map(|&v| v as f64));
            labels.push(self.labels[i]);
        }
        (
            FeatureMap::from_vec(data, indices.len(), self.height, self.width, self.channels),
            labels,
        )
    }

    /// Write the tensor container (magic `SSGT`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        tensor_io::save(self, path)
    }

    /// Read a tensor container written by [`FeatureTensor::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        tensor_io::load(path)
    }
}

/// See [`FeatureTensor::save`]; free-function form.
pub fn save_tensor(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    tensor.save(path)
}

/// See [`FeatureTensor::load`]; free-function form.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor, FeatureError> {
    FeatureTensor::load(path)
}

/// A featurized dataset plus any per-song warnings (external stems whose
/// additivity defect exceeded the threshold).
#[derive(Debug, Clone)]
pub struct Featurized {
    pub tensor: FeatureTensor,
    pub warnings: Vec<String>,
}

/// Featurize every manifest entry under the given variant and stem source.
pub fn featurize(
    manifest: &DatasetManifest,
    variant: Variant,
    separator: SeparatorKind,
) -> Result<Featurized, FeatureError> {
    let n = manifest.entries().len();
    let c = variant.channels();
    let plane = N_MELS * CANONICAL_FRAMES;
    let mut data = vec![0.0f32; n * plane * c];
    let mut warnings = Vec::new();

    for (i, entry) in manifest.entries().iter().enumerate() {
        let mels = featurize_song(entry, variant, separator, &mut warnings)?;
        debug_assert_eq!(mels.len(), c);
        let base = i * plane * c;
        for (ch, mel) in mels.iter().enumerate() {
            debug_assert_eq!((mel.n_mels(), mel.frames()), (N_MELS, CANONICAL_FRAMES));
            for (j, &v) in mel.values().iter().enumerate() {
                data[base + j * c + ch] = v as f32;
            }
        }
    }

    let tensor = FeatureTensor::new(
        data,
        n,
        N_MELS,
        CANONICAL_FRAMES,
        c,
        manifest.labels(),
        manifest.genres().to_vec(),
        variant.channel_names(),
    )?;
    Ok(Featurized { tensor, warnings })
}

fn featurize_song(
    entry: &ManifestEntry,
    variant: Variant,
    separator: SeparatorKind,
    warnings: &mut Vec<String>,
) -> Result<Vec<MelSpectrogram>, FeatureError> {
    let song = entry.song_id.clone();
    let audio_err = |e: AudioError| FeatureError::Audio(song.clone(), e);
    let sep_err = |e: SeparationError| FeatureError::Separation(song.clone(), e);
    let dsp_err = |e: DspError| FeatureError::Dsp(song.clone(), e);

    let mix_raw = decode_wav(&entry.mix_path).map_err(audio_err)?;
    let mix = resample(&mix_raw, CANONICAL_SAMPLE_RATE).map_err(audio_err)?;
    let segment = select_segment(&mix, CANONICAL_SEGMENT_LEN).map_err(audio_err)?;

    let stems: Option<StemSet> = match (variant, separator) {
        (Variant::MixFull, _) => None,
        // the built-in separator's vocals stem is identically zero, so
        // mix - vocals reduces to the mix itself
        (Variant::MixNovox, SeparatorKind::Builtin) => None,
        (_, SeparatorKind::Builtin) => Some(separate_hpss3(&mix).map_err(sep_err)?),
        (_, SeparatorKind::External) => {
            let dir = entry.stems_dir.as_ref().ok_or_else(|| {
                FeatureError::Separation(song.clone(), SeparationError::MissingStem("mix".into()))
            })?;
            let ingested = ingest_external_stems(dir).map_err(sep_err)?;
            if ingested.warning {
                warnings.push(format!(
                    "song {song}: stems deviate from mix by {:.4} (additivity defect)",
                    ingested.additivity_defect
                ));
            }
            let resample_stem = |clip: &AudioClip| resample(clip, CANONICAL_SAMPLE_RATE);
            Some(
                StemSet::new(
                    resample_stem(&ingested.stems.bass).map_err(audio_err)?,
                    resample_stem(&ingested.stems.drums).map_err(audio_err)?,
                    resample_stem(&ingested.stems.other).map_err(audio_err)?,
                    resample_stem(&ingested.stems.vocals).map_err(audio_err)?,
                )
                .map_err(sep_err)?,
            )
        }
    };

    let mel_of = |clip: &AudioClip| -> Result<MelSpectrogram, FeatureError> {
        let mono = to_mono(&clip.slice(segment));
        mel_spectrogram(mono.channel(0)).map_err(dsp_err)
    };

    match variant {
        Variant::MixFull => Ok(vec![mel_of(&mix)?]),
        Variant::MixNovox => match stems {
            None => Ok(vec![mel_of(&mix)?]),
            Some(stems) => {
                let vocals = &stems.vocals;
                if vocals.len() != mix.len() || vocals.num_channels() != mix.num_channels() {
                    return Err(FeatureError::Separation(
                        song,
                        SeparationError::Shape("vocals stem does not match mix".into()),
                    ));
                }
                let channels = mix
                    .channels()
                    .iter()
                    .enumerate()
                    .map(|(ch, samples)| {
                        samples.iter().zip(vocals.channel(ch)).map(|(&m, &v)| m - v).collect()
                    })
                    .collect();
                let novox = AudioClip::new(channels, mix.sample_rate()).map_err(audio_err)?;
                Ok(vec![mel_of(&novox)?])
            }
        },
        Variant::Stems3 => {
            let stems = stems.expect("stems3 always separates");
            if stems.bass.len() != mix.len() {
                return Err(FeatureError::Separation(
                    song,
                    SeparationError::Shape("stems do not match mix length".into()),
                ));
            }
            Ok(vec![
                mel_of(stems.get(Stem::Bass))?,
                mel_of(stems.get(Stem::Drums))?,
                mel_of(stems.get(Stem::Other))?,
            ])
        }
    }
}

#[cfg(test)]
mod tests;

use std::f64::consts::PI;
use std::path::Path;

use super::*;
use crate::audio_io::encode_wav;
use crate::separation::SeparationError;
use crate::CANONICAL_SEGMENT_LEN;

const SONG_LEN: usize = 256_000;

/// Deterministic little "song": low sine bass, click drums, mid-tone other.
/// `loud_late` shifts the energy peak into the second half so the selected
/// segment is not the first window.
fn render_song(len: usize, seed: u64, loud_late: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut bass = vec![0.0f64; len];
    let mut drums = vec![0.0f64; len];
    let mut other = vec![0.0f64; len];
    let f_bass = 55.0 + (seed % 5) as f64 * 11.0;
    let f_other = 660.0 + (seed % 7) as f64 * 55.0;
    for i in 0..len {
        let t = i as f64 / 22_050.0;
        let gain = if loud_late && i < len / 2 { 0.05 } else { 1.0 };
        bass[i] = 0.3 * gain * (2.0 * PI * f_bass * t).sin();
        other[i] = 0.2 * gain * (2.0 * PI * f_other * t).sin();
        if i % 5512 < 80 {
            drums[i] = 0.4 * gain * (1.0 - (i % 5512) as f64 / 80.0);
        }
    }
    let mix: Vec<f64> =
        (0..len).map(|i| bass[i] + drums[i] + other[i]).collect();
    (mix, bass, drums, other)
}

fn write_song_dir(dir: &Path, seed: u64, loud_late: bool) {
    let (mix, bass, drums, other) = render_song(SONG_LEN, seed, loud_late);
    let clip = |v: Vec<f64>| AudioClip::mono(v, 22_050).unwrap();
    encode_wav(&clip(mix), dir.join("mix.wav")).unwrap();
    encode_wav(&clip(bass), dir.join("bass.wav")).unwrap();
    encode_wav(&clip(drums), dir.join("drums.wav")).unwrap();
    encode_wav(&clip(other), dir.join("other.wav")).unwrap();
    encode_wav(&AudioClip::silence(SONG_LEN, 22_050), dir.join("vocals.wav")).unwrap();
}

fn two_song_manifest(root: &Path) -> DatasetManifest {
    let mut entries = Vec::new();
    for (i, genre) in [(0usize, "alpha"), (1, "beta")] {
        let dir = root.join(format!("song{i}"));
        std::fs::create_dir_all(&dir).unwrap();
        write_song_dir(&dir, i as u64, false);
        entries.push(ManifestEntry {
            song_id: format!("song{i}"),
            genre: genre.to_string(),
            mix_path: dir.join("mix.wav"),
            stems_dir: Some(dir),
        });
    }
    DatasetManifest::new(entries).unwrap()
}

#[test]
fn featurize_shapes_for_all_variants() {
    let root = tempfile::tempdir().unwrap();
    let manifest = two_song_manifest(root.path());

    let stems3 = featurize(&manifest, Variant::Stems3, SeparatorKind::External).unwrap();
    assert_eq!(stems3.tensor.shape(), (2, 128, 458, 3));
    assert_eq!(stems3.tensor.channel_names, ["bass", "drums", "other"]);
    assert_eq!(stems3.tensor.class_names, ["alpha", "beta"]);
    assert_eq!(stems3.tensor.labels, [0, 1]);
    assert!(stems3.warnings.is_empty());

    let full = featurize(&manifest, Variant::MixFull, SeparatorKind::External).unwrap();
    assert_eq!(full.tensor.shape(), (2, 128, 458, 1));

    let builtin = featurize(&manifest, Variant::Stems3, SeparatorKind::Builtin).unwrap();
    assert_eq!(builtin.tensor.shape(), (2, 128, 458, 3));
}

#[test]
fn silent_vocals_make_novox_equal_full() {
    let root = tempfile::tempdir().unwrap();
    let manifest = two_song_manifest(root.path());
    let full = featurize(&manifest, Variant::MixFull, SeparatorKind::External).unwrap();
    let novox = featurize(&manifest, Variant::MixNovox, SeparatorKind::External).unwrap();
    for (a, b) in full.tensor.data().iter().zip(novox.tensor.data()) {
        assert!((a - b).abs() <= 1e-6);
    }
    assert_eq!(novox.tensor.channel_names, ["mix_novox"]);
}

#[test]
fn stems3_channels_use_the_mix_window() {
    use crate::audio_io::{decode_wav, resample, select_segment, to_mono};
    use crate::dsp::mel_spectrogram;

    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("late");
    std::fs::create_dir_all(&dir).unwrap();
    write_song_dir(&dir, 3, true);
    let manifest = DatasetManifest::new(vec![ManifestEntry {
        song_id: "late".into(),
        genre: "alpha".into(),
        mix_path: dir.join("mix.wav"),
        stems_dir: Some(dir.clone()),
    }])
    .unwrap();

    let got = featurize(&manifest, Variant::Stems3, SeparatorKind::External).unwrap();

    // recompute per-stem spectrograms with the window chosen on the mix
    let mix = resample(&decode_wav(dir.join("mix.wav")).unwrap(), 22_050).unwrap();
    let segment = select_segment(&mix, CANONICAL_SEGMENT_LEN).unwrap();
    assert!(segment.start_sample > 0, "energy peak should move the window");
    for (ch, stem) in ["bass.wav", "drums.wav", "other.wav"].iter().enumerate() {
        let clip = resample(&decode_wav(dir.join(stem)).unwrap(), 22_050).unwrap();
        let mono = to_mono(&clip.slice(segment));
        let mel = mel_spectrogram(mono.channel(0)).unwrap();
        for (j, &want) in mel.values().iter().enumerate() {
            let have = got.tensor.sample(0)[j * 3 + ch] as f64;
            assert!(
                (have - want as f64).abs() <= 1e-6,
                "channel {ch} cell {j}: {have} vs {want}"
            );
        }
    }
}

#[test]
fn permuting_stems_changes_the_tensor() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("orig");
    std::fs::create_dir_all(&dir).unwrap();
    write_song_dir(&dir, 5, false);

    let swapped = root.path().join("swapped");
    std::fs::create_dir_all(&swapped).unwrap();
    for name in ["mix.wav", "other.wav", "vocals.wav"] {
        std::fs::copy(dir.join(name), swapped.join(name)).unwrap();
    }
    std::fs::copy(dir.join("bass.wav"), swapped.join("drums.wav")).unwrap();
    std::fs::copy(dir.join("drums.wav"), swapped.join("bass.wav")).unwrap();

    let make = |d: &Path| {
        let manifest = DatasetManifest::new(vec![ManifestEntry {
            song_id: "x".into(),
            genre: "alpha".into(),
            mix_path: d.join("mix.wav"),
            stems_dir: Some(d.to_path_buf()),
        }])
        .unwrap();
        featurize(&manifest, Variant::Stems3, SeparatorKind::External).unwrap().tensor
    };
    let a = make(&dir);
    let b = make(&swapped);
    assert_ne!(a.data(), b.data());
}

#[test]
fn featurize_is_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let manifest = two_song_manifest(root.path());
    let a = featurize(&manifest, Variant::Stems3, SeparatorKind::Builtin).unwrap();
    let b = featurize(&manifest, Variant::Stems3, SeparatorKind::Builtin).unwrap();
    assert_eq!(a.tensor, b.tensor);
}

#[test]
fn featurize_external_requires_stems() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("nostems");
    std::fs::create_dir_all(&dir).unwrap();
    write_song_dir(&dir, 7, false);
    std::fs::remove_file(dir.join("drums.wav")).unwrap();
    let manifest = DatasetManifest::new(vec![ManifestEntry {
        song_id: "nostems".into(),
        genre: "alpha".into(),
        mix_path: dir.join("mix.wav"),
        stems_dir: Some(dir),
    }])
    .unwrap();
    match featurize(&manifest, Variant::Stems3, SeparatorKind::External) {
        Err(FeatureError::Separation(song, SeparationError::MissingStem(stem))) => {
            assert_eq!(song, "nostems");
            assert_eq!(stem, "drums");
        }
        other => panic!("expected missing stem, got {other:?}"),
    }
}

#[test]
fn featurize_rejects_short_songs() {
    let root = tempfile::tempdir().unwrap();
    let path = root.path().join("short.wav");
    encode_wav(&AudioClip::mono(vec![0.5; 10_000], 22_050).unwrap(), &path).unwrap();
    let manifest = DatasetManifest::new(vec![ManifestEntry {
        song_id: "short".into(),
        genre: "alpha".into(),
        mix_path: path,
        stems_dir: None,
    }])
    .unwrap();
    match featurize(&manifest, Variant::MixFull, SeparatorKind::Builtin) {
        Err(FeatureError::Audio(_, crate::audio_io::AudioError::InsufficientLength { .. })) => {}
        other => panic!("expected insufficient length, got {other:?}"),
    }
}

#[test]
fn tensor_save_load_round_trip() {
    let tensor = FeatureTensor::new(
        (0..2 * 4 * 5 * 3).map(|i| (i % 7) as f32 / 7.0).collect(),
        2,
        4,
        5,
        3,
        vec![1, 0],
        vec!["a".into(), "b".into()],
        vec!["bass".into(), "drums".into(), "other".into()],
    )
    .unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    tensor.save(file.path()).unwrap();
    let back = FeatureTensor::load(file.path()).unwrap();
    assert_eq!(tensor, back);
}

#[test]
fn tensor_load_rejects_bad_magic() {
    let file = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(file.path(), b"NOPE the rest does not matter").unwrap();
    assert!(matches!(FeatureTensor::load(file.path()), Err(FeatureError::Format(_))));
}

#[test]
fn tensor_load_rejects_truncation() {
    let tensor = FeatureTensor::new(
        vec![0.5; 1 * 4 * 4 * 1],
        1,
        4,
        4,
        1,
        vec![0],
        vec!["a".into()],
        vec!["mix".into()],
    )
    .unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    tensor.save(file.path()).unwrap();
    let bytes = std::fs::read(file.path()).unwrap();
    std::fs::write(file.path(), &bytes[..bytes.len() - 10]).unwrap();
    assert!(matches!(FeatureTensor::load(file.path()), Err(FeatureError::Truncated(_))));
}

#[test]
fn tensor_batch_converts_to_f64() {
    let tensor = FeatureTensor::new(
        (0..2 * 2 * 2 * 1).map(|i| i as f32 / 8.0).collect(),
        2,
        2,
        2,
        1,
        vec![0, 1],
        vec!["a".into(), "b".into()],
        vec!["mix".into()],
    )
    .unwrap();
    let (batch, labels) = tensor.batch(&[1, 0]);
    assert_eq!(batch.shape(), (2, 2, 2, 1));
    assert_eq!(labels, [1, 0]);
    assert_eq!(batch.get(0, 0, 0, 0), 4.0 / 8.0);
    assert_eq!(batch.get(1, 0, 0, 0), 0.0);
}

#[test]
fn manifest_csv_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::new(vec![
        ManifestEntry {
            song_id: "s1".into(),
            genre: "g1".into(),
            mix_path: root.path().join("g1/s1/mix.wav"),
            stems_dir: Some(root.path().join("g1/s1")),
        },
        ManifestEntry {
            song_id: "s2".into(),
            genre: "g2".into(),
            mix_path: root.path().join("g2/s2/mix.wav"),
            stems_dir: None,
        },
    ])
    .unwrap();
    let csv_path = root.path().join("manifest.csv");
    manifest.write_csv(&csv_path).unwrap();

    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("song_id,genre,mix_path,stems_dir\n"));
    // paths are written relative to the manifest
    assert!(text.contains("g1/s1/mix.wav"));

    let back = DatasetManifest::from_csv(&csv_path).unwrap();
    assert_eq!(back.genres(), ["g1", "g2"]);
    assert_eq!(back.labels(), [0, 1]);
    assert_eq!(back.entries()[0].mix_path, root.path().join("g1/s1/mix.wav"));
    assert_eq!(back.entries()[1].stems_dir, None);
}

#[test]
fn manifest_rejects_duplicates_and_bad_headers() {
    let dup = DatasetManifest::new(vec![
        ManifestEntry {
            song_id: "s".into(),
            genre: "g".into(),
            mix_path: "a.wav".into(),
            stems_dir: None,
        },
        ManifestEntry {
            song_id: "s".into(),
            genre: "g".into(),
            mix_path: "b.wav".into(),
            stems_dir: None,
        },
    ]);
    assert!(matches!(dup, Err(FeatureError::Manifest(_))));

    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.csv");
    std::fs::write(&bad, "id,genre\nx,y\n").unwrap();
    assert!(matches!(DatasetManifest::from_csv(&bad), Err(FeatureError::Manifest(_))));
}

#[test]
fn three_channel_tensors_must_be_stem_ordered() {
    let res = FeatureTensor::new(
        vec![0.0; 1 * 2 * 2 * 3],
        1,
        2,
        2,
        3,
        vec![0],
        vec!["a".into()],
        vec!["drums".into(), "bass".into(), "other".into()],
    );
    assert!(matches!(res, Err(FeatureError::Format(_))));
}

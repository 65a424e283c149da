use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::audio_io::encode_wav;

fn random_clip(len: usize, channels: usize, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chans = (0..channels)
        .map(|_| (0..len).map(|_| rng.gen_range(-0.8..0.8)).collect())
        .collect();
    AudioClip::new(chans, 22_050).unwrap()
}

fn energy(clip: &AudioClip) -> f64 {
    clip.channels().iter().flat_map(|c| c.iter()).map(|x| x * x).sum()
}

/// Random masks on the 2^-30 grid: three small quantized values, the
/// fourth takes the exact remainder.
fn random_mask_set(bins: usize, frames: usize, channels: usize, seed: u64) -> MaskSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = 1_073_741_824.0f64;
    let mut masks: [Vec<Vec<f64>>; 4] = Default::default();
    for _ in 0..channels {
        let mut planes = [
            Vec::with_capacity(bins * frames),
            Vec::with_capacity(bins * frames),
            Vec::with_capacity(bins * frames),
            Vec::with_capacity(bins * frames),
        ];
        for _ in 0..bins * frames {
            let a = (rng.gen_range(0.0..0.25) * grid).round() / grid;
            let b = (rng.gen_range(0.0..0.25) * grid).round() / grid;
            let c = (rng.gen_range(0.0..0.25) * grid).round() / grid;
            planes[0].push(a);
            planes[1].push(b);
            planes[2].push(c);
            planes[3].push(1.0 - a - b - c);
        }
        for (slot, plane) in masks.iter_mut().zip(planes) {
            slot.push(plane);
        }
    }
    MaskSet::new(bins, frames, masks).unwrap()
}

fn stfts_of(clip: &AudioClip) -> Vec<StftMatrix> {
    clip.channels().iter().map(|ch| stft(ch, N_FFT, HOP).unwrap()).collect()
}

#[test]
fn splitting_with_any_mask_set_is_additive() {
    let mix = random_clip(20_000, 1, 1);
    let stfts = stfts_of(&mix);
    let masks = random_mask_set(stfts[0].bins(), stfts[0].frames(), 1, 2);
    let stems = apply_masks(&stfts, &masks, mix.sample_rate()).unwrap();
    let defect = additivity_defect(&mix, &stems);
    assert!(defect <= 1e-6, "defect {defect}");
}

#[test]
fn degenerate_mask_routes_everything_to_bass() {
    let mix = random_clip(16_000, 1, 3);
    let stfts = stfts_of(&mix);
    let cells = stfts[0].bins() * stfts[0].frames();
    let masks = MaskSet::new(
        stfts[0].bins(),
        stfts[0].frames(),
        [vec![vec![1.0; cells]], vec![vec![0.0; cells]], vec![vec![0.0; cells]], vec![vec![0.0; cells]]],
    )
    .unwrap();
    let stems = apply_masks(&stfts, &masks, mix.sample_rate()).unwrap();
    for (a, b) in mix.channel(0).iter().zip(stems.bass.channel(0)) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(energy(&stems.drums) < 1e-18);
    assert!(energy(&stems.other) < 1e-18);
    assert!(energy(&stems.vocals) < 1e-18);
}

#[test]
fn uniform_masks_split_evenly() {
    let mix = random_clip(16_000, 1, 4);
    let stfts = stfts_of(&mix);
    let cells = stfts[0].bins() * stfts[0].frames();
    let quarter = vec![vec![0.25; cells]];
    let masks = MaskSet::new(
        stfts[0].bins(),
        stfts[0].frames(),
        [quarter.clone(), quarter.clone(), quarter.clone(), quarter],
    )
    .unwrap();
    let stems = apply_masks(&stfts, &masks, mix.sample_rate()).unwrap();
    for stem in Stem::ALL {
        for (a, b) in mix.channel(0).iter().zip(stems.get(stem).channel(0)) {
            assert!((a / 4.0 - b).abs() < 1e-9);
        }
    }
}

#[test]
fn random_masks_stay_within_round_trip_error() {
    for seed in 0..5u64 {
        let mix = random_clip(12_000, 1, 100 + seed);
        let stfts = stfts_of(&mix);
        let masks = random_mask_set(stfts[0].bins(), stfts[0].frames(), 1, 200 + seed);
        let stems = apply_masks(&stfts, &masks, mix.sample_rate()).unwrap();
        let snr = additivity_snr_db(&mix, &stems);
        assert!(snr >= 60.0, "seed {seed}: SNR {snr:.1}");
    }
}

#[test]
fn mask_set_rejects_bad_partitions() {
    let cells = 6;
    let ok = MaskSet::new(
        2,
        3,
        [vec![vec![0.5; cells]], vec![vec![0.5; cells]], vec![vec![0.0; cells]], vec![vec![0.0; cells]]],
    );
    assert!(ok.is_ok());
    let bad_sum = MaskSet::new(
        2,
        3,
        [vec![vec![0.5; cells]], vec![vec![0.6; cells]], vec![vec![0.0; cells]], vec![vec![0.0; cells]]],
    );
    assert!(matches!(bad_sum, Err(SeparationError::InvalidMasks(_))));
    let out_of_range = MaskSet::new(
        2,
        3,
        [vec![vec![1.5; cells]], vec![vec![-0.5; cells]], vec![vec![0.0; cells]], vec![vec![0.0; cells]]],
    );
    assert!(matches!(out_of_range, Err(SeparationError::InvalidMasks(_))));
}

#[test]
fn apply_masks_rejects_shape_mismatch() {
    let mix = random_clip(8000, 1, 5);
    let stfts = stfts_of(&mix);
    let masks = random_mask_set(stfts[0].bins(), stfts[0].frames() + 1, 1, 6);
    assert!(matches!(
        apply_masks(&stfts, &masks, mix.sample_rate()),
        Err(SeparationError::Shape(_))
    ));
}

#[test]
fn steady_low_sine_is_mostly_bass() {
    let samples: Vec<f64> =
        (0..44_100).map(|n| 0.7 * (2.0 * PI * 100.0 * n as f64 / 22_050.0).sin()).collect();
    let mix = AudioClip::mono(samples, 22_050).unwrap();
    let stems = separate_hpss3(&mix).unwrap();
    let total: f64 = Stem::ALL.iter().map(|&s| energy(stems.get(s))).sum();
    let ratio = energy(&stems.bass) / total;
    assert!(ratio >= 0.9, "bass fraction {ratio:.3}");
}

#[test]
fn click_train_is_mostly_drums() {
    let len = 44_100;
    let mut samples = vec![0.0f64; len];
    let period = 22_050 / 4;
    let mut i = 0;
    while i < len {
        samples[i] = 1.0;
        i += period;
    }
    let mix = AudioClip::mono(samples, 22_050).unwrap();
    let stems = separate_hpss3(&mix).unwrap();
    let total: f64 = Stem::ALL.iter().map(|&s| energy(stems.get(s))).sum();
    let ratio = energy(&stems.drums) / total;
    assert!(ratio >= 0.8, "drums fraction {ratio:.3}");
}

#[test]
fn hpss_reconstruction_snr() {
    let mix = random_clip(30_000, 2, 8);
    let stems = separate_hpss3(&mix).unwrap();
    let snr = additivity_snr_db(&mix, &stems);
    assert!(snr >= 40.0, "SNR {snr:.1}");
    assert_eq!(stems.bass.num_channels(), 2);
    assert_eq!(stems.bass.len(), mix.len());
    // built-in vocals stem is identically zero
    assert!(energy(&stems.vocals) == 0.0);
}

#[test]
fn hpss_is_deterministic() {
    let mix = random_clip(15_000, 1, 9);
    let a = separate_hpss3(&mix).unwrap();
    let b = separate_hpss3(&mix).unwrap();
    for stem in Stem::ALL {
        assert_eq!(a.get(stem).channel(0), b.get(stem).channel(0));
    }
}

#[test]
fn soft_masks_do_not_create_energy() {
    let mix = random_clip(20_000, 1, 10);
    let stems = separate_hpss3(&mix).unwrap();
    let total: f64 = Stem::ALL.iter().map(|&s| energy(stems.get(s))).sum();
    assert!(total <= energy(&mix) * 1.001, "stems {total} vs mix {}", energy(&mix));
}

#[test]
fn ingest_reads_consistent_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mix = random_clip(10_000, 1, 11);
    let half: Vec<f64> = mix.channel(0).iter().map(|x| x / 2.0).collect();
    let half_clip = AudioClip::mono(half, 22_050).unwrap();
    let zero = AudioClip::silence(10_000, 22_050);
    encode_wav(&mix, dir.path().join("mix.wav")).unwrap();
    encode_wav(&half_clip, dir.path().join("bass.wav")).unwrap();
    encode_wav(&half_clip, dir.path().join("drums.wav")).unwrap();
    encode_wav(&zero, dir.path().join("other.wav")).unwrap();
    encode_wav(&zero, dir.path().join("vocals.wav")).unwrap();

    let ingested = ingest_external_stems(dir.path()).unwrap();
    assert!(ingested.additivity_defect <= 1e-6, "defect {}", ingested.additivity_defect);
    assert!(!ingested.warning);
}

#[test]
fn ingest_missing_vocals_names_the_stem() {
    let dir = tempfile::tempdir().unwrap();
    let clip = random_clip(5000, 1, 12);
    encode_wav(&clip, dir.path().join("mix.wav")).unwrap();
    for name in ["bass.wav", "drums.wav", "other.wav"] {
        encode_wav(&clip, dir.path().join(name)).unwrap();
    }
    match ingest_external_stems(dir.path()) {
        Err(SeparationError::MissingStem(name)) => assert_eq!(name, "vocals"),
        other => panic!("expected missing vocals, got {other:?}"),
    }
}

#[test]
fn ingest_flags_large_defect() {
    let dir = tempfile::tempdir().unwrap();
    let mix = random_clip(8000, 1, 13);
    let ninety: Vec<f64> = mix.channel(0).iter().map(|x| 0.9 * x).collect();
    let zero = AudioClip::silence(8000, 22_050);
    encode_wav(&mix, dir.path().join("mix.wav")).unwrap();
    encode_wav(&AudioClip::mono(ninety, 22_050).unwrap(), dir.path().join("bass.wav")).unwrap();
    encode_wav(&zero, dir.path().join("drums.wav")).unwrap();
    encode_wav(&zero, dir.path().join("other.wav")).unwrap();
    encode_wav(&zero, dir.path().join("vocals.wav")).unwrap();

    let ingested = ingest_external_stems(dir.path()).unwrap();
    let expected = 0.1 * mix.peak();
    assert!(
        (ingested.additivity_defect - expected).abs() < 1e-6,
        "defect {} vs expected {expected}",
        ingested.additivity_defect
    );
    assert!(ingested.warning);
}

#[test]
fn ingest_pads_one_sample_slack_and_rejects_more() {
    let dir = tempfile::tempdir().unwrap();
    let mix = random_clip(6000, 1, 14);
    let short = AudioClip::mono(mix.channel(0)[..5999].to_vec(), 22_050).unwrap();
    let zero = AudioClip::silence(6000, 22_050);
    encode_wav(&mix, dir.path().join("mix.wav")).unwrap();
    encode_wav(&short, dir.path().join("bass.wav")).unwrap();
    encode_wav(&zero, dir.path().join("drums.wav")).unwrap();
    encode_wav(&zero, dir.path().join("other.wav")).unwrap();
    encode_wav(&zero, dir.path().join("vocals.wav")).unwrap();
    let ingested = ingest_external_stems(dir.path()).unwrap();
    assert_eq!(ingested.stems.bass.len(), 6000);

    let too_short = AudioClip::mono(mix.channel(0)[..5990].to_vec(), 22_050).unwrap();
    encode_wav(&too_short, dir.path().join("bass.wav")).unwrap();
    assert!(matches!(
        ingest_external_stems(dir.path()),
        Err(SeparationError::IncompatibleStems(_))
    ));
}

//! Band-limited sample rate conversion: 64-tap windowed sinc, Kaiser β = 8.

use super::{AudioClip, AudioError};

const TAPS: usize = 64;
const HALF: usize = TAPS / 2;
const KAISER_BETA: f64 = 8.0;

/// Resample to `target_rate`. Output length is
/// `round(len * target / source)`; equal rates return the clip unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target rate must be positive".into()));
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }

    let in_len = clip.len() as u64;
    let out_len =
        ((in_len as u128 * target_rate as u128 + source_rate as u128 / 2) / source_rate as u128) as usize;

    // Cut off below the narrower Nyquist when downsampling.
    let cutoff = (target_rate as f64 / source_rate as f64).min(1.0);
    let step = source_rate as f64 / target_rate as f64;
    let i0_beta = bessel_i0(KAISER_BETA);

    let channels = clip
        .channels()
        .iter()
        .map(|ch| {
            let mut out = Vec::with_capacity(out_len);
            for n in 0..out_len {
                let pos = n as f64 * step;
                let center = pos.floor() as i64;
                let mut acc = 0.0f64;
                for j in (center - (HALF as i64 - 1))..=(center + HALF as i64) {
                    if j < 0 || j as usize >= ch.len() {
                        continue;
                    }
                    let dt = j as f64 - pos;
                    acc += ch[j as usize] * cutoff * sinc(cutoff * dt) * kaiser(dt / HALF as f64, i0_beta);
                }
                out.push(acc);
            }
            out
        })
        .collect();

    AudioClip::new(channels, target_rate)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn kaiser(u: f64, i0_beta: f64) -> f64 {
    let t = 1.0 - u * u;
    if t <= 0.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * t.sqrt()) / i0_beta
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..64 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

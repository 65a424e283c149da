//! Minimal RIFF/WAVE codec: reads PCM16 and float32, writes float32.

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
// WAVE_FORMAT_EXTENSIBLE carries the real format in a sub-GUID we don't parse.
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], AudioError> {
        if self.pos + n > self.bytes.len() {
            return Err(AudioError::Truncated(format!(
                "expected {n} bytes for {what}, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16, AudioError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, AudioError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Fmt {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

pub fn decode(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "RIFF magic")? != b"RIFF" {
        return Err(AudioError::Format("missing RIFF magic".into()));
    }
    let _riff_size = r.u32("RIFF size")?;
    if r.take(4, "WAVE magic")? != b"WAVE" {
        return Err(AudioError::Format("missing WAVE form type".into()));
    }

    let mut fmt: Option<Fmt> = None;
    loop {
        if r.pos >= bytes.len() {
            return Err(AudioError::Format("no data chunk".into()));
        }
        let id: [u8; 4] = r.take(4, "chunk id")?.try_into().unwrap();
        let size = r.u32("chunk size")? as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::Format(format!("fmt chunk of {size} bytes")));
                }
                let format = r.u16("format tag")?;
                let channels = r.u16("channel count")?;
                let sample_rate = r.u32("sample rate")?;
                let _byte_rate = r.u32("byte rate")?;
                let _block_align = r.u16("block align")?;
                let bits_per_sample = r.u16("bits per sample")?;
                r.take(size - 16, "fmt extension")?;
                fmt = Some(Fmt { format, channels, sample_rate, bits_per_sample });
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| AudioError::Format("data chunk before fmt".into()))?;
                let data = r.take(size, "data payload").map_err(|_| {
                    AudioError::Truncated(format!(
                        "data chunk declares {size} bytes, {} remain",
                        bytes.len() - r.pos
                    ))
                })?;
                return decode_samples(&fmt, data);
            }
            _ => {
                // Skip unknown chunks; chunk payloads are word-aligned.
                r.take(size + (size & 1), "chunk payload")?;
            }
        }
    }
}

fn decode_samples(fmt: &Fmt, data: &[u8]) -> Result<AudioClip, AudioError> {
    if !(1..=2).contains(&fmt.channels) {
        return Err(AudioError::Unsupported(format!("{} channels", fmt.channels)));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::Format("zero sample rate".into()));
    }
    let n_ch = fmt.channels as usize;

    let interleaved: Vec<f64> = match (fmt.format, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(AudioError::Truncated("odd PCM16 payload".into()));
            }
            data.chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                .collect()
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(AudioError::Truncated("float32 payload not a multiple of 4".into()));
            }
            data.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()
        }
        (FORMAT_EXTENSIBLE, _) => {
            return Err(AudioError::Unsupported("WAVE_FORMAT_EXTENSIBLE".into()))
        }
        (tag, bits) => {
            return Err(AudioError::Unsupported(format!("format tag {tag}, {bits}-bit")))
        }
    };

    if interleaved.len() % n_ch != 0 {
        return Err(AudioError::Truncated("payload ends mid-frame".into()));
    }
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &x) in channels.iter_mut().zip(frame) {
            ch.push(x);
        }
    }
    AudioClip::new(channels, fmt.sample_rate)
}

pub fn encode(clip: &AudioClip) -> Vec<u8> {
    let n_ch = clip.num_channels() as u32;
    let frames = clip.len() as u32;
    let data_len = frames * n_ch * 4;
    let byte_rate = clip.sample_rate() * n_ch * 4;
    let block_align = (n_ch * 4) as u16;

    // RIFF size: WAVE + fmt(8+16) + fact(8+4) + data(8+payload).
    let riff_size = 4 + 24 + 12 + 8 + data_len;
    let mut out = Vec::with_capacity(riff_size as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());

    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..clip.len() {
        for ch in clip.channels() {
            out.extend_from_slice(&(ch[i] as f32).to_le_bytes());
        }
    }
    out
}

//! The tensor container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "SSGT" | version u16 = 1 | dtype u8 = 1 (float32) | rank u8 = 4
//! dims 4 x u32 (N, height, width, C)
//! K u16, then K class names (u16 length + UTF-8)
//! C u8, then C channel names (u16 length + UTF-8)
//! N labels, u32 each
//! N * height * width * C float32 values, row-major
//! ```

use std::io::Write;
use std::path::Path;

use super::{FeatureError, FeatureTensor};

const MAGIC: &[u8; 4] = b"SSGT";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 1;
const RANK: u8 = 4;

pub fn save(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let mut out: Vec<u8> = Vec::with_capacity(tensor.data().len() * 4 + 256);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(RANK);
    for dim in [tensor.n, tensor.height, tensor.width, tensor.channels] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&(tensor.class_names.len() as u16).to_le_bytes());
    for name in &tensor.class_names {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.push(tensor.channels as u8);
    for name in &tensor.channel_names {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for &label in &tensor.labels {
        out.extend_from_slice(&label.to_le_bytes());
    }
    for &v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FeatureError> {
        if self.pos + n > self.bytes.len() {
            return Err(FeatureError::Truncated(format!(
                "need {n} bytes for {what}, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8, FeatureError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, FeatureError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, FeatureError> {
        let len = self.u16(what)? as usize;
        String::from_utf8(self.take(len, what)?.to_vec())
            .map_err(|_| FeatureError::Format(format!("invalid UTF-8 in {what}")))
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureTensor, FeatureError> {
    let bytes = std::fs::read(path)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };

    if c.take(4, "magic")? != MAGIC {
        return Err(FeatureError::Format("bad magic, not an SSGT tensor".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(FeatureError::Format(format!("unsupported version {version}")));
    }
    let dtype = c.u8("dtype")?;
    if dtype != DTYPE_F32 {
        return Err(FeatureError::Format(format!("unsupported dtype {dtype}")));
    }
    let rank = c.u8("rank")?;
    if rank != RANK {
        return Err(FeatureError::Format(format!("rank {rank}, expected 4")));
    }
    let n = c.u32("dims[0]")? as usize;
    let height = c.u32("dims[1]")? as usize;
    let width = c.u32("dims[2]")? as usize;
    let channels = c.u32("dims[3]")? as usize;

    let k = c.u16("class count")? as usize;
    let mut class_names = Vec::with_capacity(k);
    for i in 0..k {
        class_names.push(c.string(&format!("class name {i}"))?);
    }
    let c_named = c.u8("channel count")? as usize;
    if c_named != channels {
        return Err(FeatureError::Format(format!(
            "channel count {c_named} disagrees with dims[3] = {channels}"
        )));
    }
    let mut channel_names = Vec::with_capacity(channels);
    for i in 0..channels {
        channel_names.push(c.string(&format!("channel name {i}"))?);
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        labels.push(c.u32(&format!("label {i}"))?);
    }

    let count = n * height * width * channels;
    let payload = c.take(count * 4, "tensor values")?;
    let data: Vec<f32> =
        payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();

    FeatureTensor::new(data, n, height, width, channels, labels, class_names, channel_names)
}

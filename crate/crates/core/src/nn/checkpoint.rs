//! Model checkpoints.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic "SSGM" | version u16 = 1
//! variant id (u16 len + UTF-8) | classes u16 | in_channels u8
//! shared_depthwise u8 | conv_filters 2 x u32 | kernel u8 | pool u8
//! dropout f64 | l1 f64 | l2 f64 | input_h u32 | input_w u32
//! blob count u16, then per blob:
//!   name (u16 len + UTF-8) | element count u32 | f64 x count
//! ```
//!
//! Blobs hold every trainable block plus batch-norm running statistics, in
//! the model's fixed visit order, each tagged `<layer index>.<block name>`.
//! Optimizer moments and dropout RNG state are not persisted.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{build_model, Model, ModelConfig, ModelVariant};
use super::NnError;

const MAGIC: &[u8; 4] = b"SSGM";
const VERSION: u16 = 1;

fn collect_blobs(model: &mut Model) -> Vec<(String, Vec<f64>)> {
    let mut blobs = Vec::new();
    let mut idx = 0usize;
    model.visit_params(&mut |block| {
        blobs.push((format!("{idx}.{}", block.name), block.values.to_vec()));
        idx += 1;
    });
    model.visit_state(&mut |name, values| {
        blobs.push((format!("{idx}.{name}"), values.to_vec()));
        idx += 1;
    });
    blobs
}

pub fn save_model(model: &mut Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());

    let cfg = &model.config;
    let id = cfg.variant.id().as_bytes();
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(cfg.classes as u16).to_le_bytes());
    out.push(cfg.in_channels as u8);
    out.push(cfg.shared_depthwise as u8);
    out.extend_from_slice(&(cfg.conv_filters[0] as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.conv_filters[1] as u32).to_le_bytes());
    out.push(cfg.kernel_size as u8);
    out.push(cfg.pool_size as u8);
    out.extend_from_slice(&cfg.dropout_p.to_le_bytes());
    out.extend_from_slice(&cfg.l1.to_le_bytes());
    out.extend_from_slice(&cfg.l2.to_le_bytes());
    out.extend_from_slice(&(model.input_h as u32).to_le_bytes());
    out.extend_from_slice(&(model.input_w as u32).to_le_bytes());

    let blobs = collect_blobs(model);
    out.extend_from_slice(&(blobs.len() as u16).to_le_bytes());
    for (name, values) in &blobs {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
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
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::Checkpoint(format!("truncated reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8, NnError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, NnError> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| NnError::Checkpoint(format!("invalid UTF-8 in {what}")))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, NnError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };

    if c.take(4, "magic")? != MAGIC {
        return Err(NnError::Checkpoint("bad magic, not an SSGM checkpoint".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }

    let variant_id = c.string("variant id")?;
    let variant = ModelVariant::from_id(&variant_id)
        .ok_or_else(|| NnError::Checkpoint(format!("unknown variant {variant_id}")))?;
    let classes = c.u16("classes")? as usize;
    let in_channels = c.u8("in_channels")? as usize;
    let shared_depthwise = c.u8("shared_depthwise")? != 0;
    let conv_filters = [c.u32("filters[0]")? as usize, c.u32("filters[1]")? as usize];
    let kernel_size = c.u8("kernel")? as usize;
    let pool_size = c.u8("pool")? as usize;
    let dropout_p = c.f64("dropout")?;
    let l1 = c.f64("l1")?;
    let l2 = c.f64("l2")?;
    let input_h = c.u32("input_h")? as usize;
    let input_w = c.u32("input_w")? as usize;

    let config = ModelConfig {
        variant,
        conv_filters,
        kernel_size,
        pool_size,
        dropout_p,
        l1,
        l2,
        classes,
        in_channels,
        shared_depthwise,
    };
    let mut model = build_model(config, input_h, input_w, 0)
        .map_err(|e| NnError::Checkpoint(format!("cannot rebuild model: {e}")))?;

    let blob_count = c.u16("blob count")? as usize;
    let mut blobs = Vec::with_capacity(blob_count);
    for _ in 0..blob_count {
        let name = c.string("blob name")?;
        let count = c.u32("blob length")? as usize;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(c.f64("blob values")?);
        }
        blobs.push((name, values));
    }

    let expected = collect_blobs(&mut model);
    if expected.len() != blobs.len() {
        return Err(NnError::Checkpoint(format!(
            "{} blobs in file, model has {}",
            blobs.len(),
            expected.len()
        )));
    }
    for ((want_name, want_vals), (got_name, _)) in expected.iter().zip(&blobs) {
        if want_name != got_name {
            return Err(NnError::Checkpoint(format!("blob {got_name}, expected {want_name}")));
        }
        let got_len = blobs.iter().find(|(n, _)| n == got_name).unwrap().1.len();
        if got_len != want_vals.len() {
            return Err(NnError::Checkpoint(format!(
                "blob {got_name} has {got_len} values, expected {}",
                want_vals.len()
            )));
        }
    }

    let mut iter = blobs.into_iter();
    model.visit_params(&mut |block| {
        let (_, values) = iter.next().expect("blob count verified");
        block.values.copy_from_slice(&values);
    });
    model.visit_state(&mut |_, values| {
        let (_, vals) = iter.next().expect("blob count verified");
        values.copy_from_slice(&vals);
    });
    Ok(model)
}

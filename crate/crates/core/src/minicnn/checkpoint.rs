//! Binary checkpoint, all integers and floats little-endian:
//!
//! ```text
//! "FGL1"
//! u32 layer count
//! per layer: u32 kind tag, kh, kw, c_in, c_out
//! f32 parameters (count implied by the descriptors)
//! u64 adam step, f32 first moments, f32 second moments
//! f64 lr, beta1, beta2, eps
//! ```
//!
//! The input side is not stored: the network is fully convolutional, so a
//! loaded model is sized for the pipeline and can be resized with
//! [`ModelParams::with_side`].

use std::path::Path;

use crate::error::{Error, Result};

use super::adam::{AdamConfig, AdamState};
use super::model::{LayerDesc, LayerKind, ModelParams, PIPELINE_SIDE};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FGL1";

/// Serializes a model and its optimizer state.
pub fn write_checkpoint(params: &ModelParams<f32>, adam: &AdamState<f32>) -> Result<Vec<u8>> {
    let n = params.len();
    if adam.m.len() != n || adam.v.len() != n {
        return Err(Error::Shape(format!(
            "optimizer holds {} moments for {n} parameters",
            adam.m.len()
        )));
    }
    let mut out = Vec::with_capacity(16 + params.layers().len() * 20 + 12 * n + 40);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for l in params.layers() {
        for field in [l.kind.tag(), l.kh as u32, l.kw as u32, l.c_in as u32, l.c_out as u32] {
            out.extend_from_slice(&field.to_le_bytes());
        }
    }
    let floats = |out: &mut Vec<u8>, vals: &[f32]| vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    floats(&mut out, params.values());
    out.extend_from_slice(&adam.t.to_le_bytes());
    floats(&mut out, &adam.m);
    floats(&mut out, &adam.v);
    let c = adam.config;
    for v in [c.lr, c.beta1, c.beta2, c.eps] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("{what} needs {len} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Truncated(format!("{what}: absurd length {count}")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

/// Parses bytes produced by [`write_checkpoint`].
pub fn read_checkpoint(bytes: &[u8]) -> Result<(ModelParams<f32>, AdamState<f32>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::VersionMismatch { found: magic });
    }
    let count = r.u32("layer count")? as usize;
    if count > 64 {
        return Err(Error::Shape(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let tag = r.u32("layer kind")?;
        let kind = LayerKind::from_tag(tag).ok_or_else(|| Error::Shape(format!("layer {i}: unknown kind {tag}")))?;
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32("layer dims")? as usize;
        }
        layers.push(LayerDesc {
            kind,
            kh: dims[0],
            kw: dims[1],
            c_in: dims[2],
            c_out: dims[3],
        });
    }
    let total: usize = layers.iter().map(LayerDesc::param_count).sum();
    let values = r.f32s(total, "parameters")?;
    let params = ModelParams::from_parts(PIPELINE_SIDE, layers, values)?;
    let t = r.u64("adam step")?;
    let m = r.f32s(total, "first moments")?;
    let v = r.f32s(total, "second moments")?;
    let config = AdamConfig {
        lr: r.f64("learning rate")?,
        beta1: r.f64("beta1")?,
        beta2: r.f64("beta2")?,
        eps: r.f64("epsilon")?,
    };
    if r.pos != bytes.len() {
        return Err(Error::Shape(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
    }
    Ok((params, AdamState { t, m, v, config }))
}

pub fn save_checkpoint(path: &Path, params: &ModelParams<f32>, adam: &AdamState<f32>) -> Result<()> {
    let bytes = write_checkpoint(params, adam)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams<f32>, AdamState<f32>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::RngSeed;

    fn sample() -> (ModelParams<f32>, AdamState<f32>) {
        let params = ModelParams::init(PIPELINE_SIDE, 2, RngSeed::new(5, 1)).unwrap();
        let mut adam = AdamState::new(params.len(), AdamConfig::default());
        adam.t = 17;
        adam.m.iter_mut().enumerate().for_each(|(i, m)| *m = i as f32 * 0.25);
        adam.v.iter_mut().enumerate().for_each(|(i, v)| *v = 1.0 / (1.0 + i as f32));
        (params, adam)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (params, adam) = sample();
        let bytes = write_checkpoint(&params, &adam).unwrap();
        let (p2, a2) = read_checkpoint(&bytes).unwrap();
        assert_eq!(p2, params);
        assert_eq!(a2, adam);
        assert_eq!(write_checkpoint(&p2, &a2).unwrap(), bytes);
    }

    #[test]
    fn wrong_magic() {
        let (params, adam) = sample();
        let mut bytes = write_checkpoint(&params, &adam).unwrap();
        bytes[..4].copy_from_slice(b"FGL2");
        assert!(matches!(read_checkpoint(&bytes), Err(Error::VersionMismatch { found }) if &found == b"FGL2"));
    }

    #[test]
    fn every_truncation_is_rejected() {
        let (params, adam) = sample();
        let bytes = write_checkpoint(&params, &adam).unwrap();
        for cut in [0, 3, 4, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(read_checkpoint(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        assert!(matches!(read_checkpoint(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
    }

    #[test]
    fn descriptor_mismatch() {
        let (params, adam) = sample();
        let mut bytes = write_checkpoint(&params, &adam).unwrap();
        // c_out of the first layer lives at 8 + 4*4.
        bytes[24..28].copy_from_slice(&3u32.to_le_bytes());
        assert!(read_checkpoint(&bytes).is_err());
    }
}

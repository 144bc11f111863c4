//! Binary field checkpoint, little-endian:
//!
//! ```text
//! "N2RF" | version u32 | resolution 3×u32 | bounds 6×f64 (min xyz, max xyz)
//! | background 3×f64 | sigma N×f32 (x fastest) | color 3N×f32 (RGB interleaved)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{FieldError, RadianceField};
use crate::geometry::Aabb;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"N2RF";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(field: &RadianceField, path: &Path) -> Result<(), FieldError> {
    let io = |source| FieldError::Io { path: path.display().to_string(), source };
    let mut buf = Vec::with_capacity(64 + 16 * field.node_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for &n in &field.resolution {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in field.bounds.min.iter().chain(&field.bounds.max).chain(&field.background) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.sigma.iter().chain(&field.color) {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)?;
    f.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<RadianceField, FieldError> {
    let io = |source| FieldError::Io { path: path.display().to_string(), source };
    let mut data = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut data).map_err(io)?;
    parse(&data)
}

fn parse(data: &[u8]) -> Result<RadianceField, FieldError> {
    let bad = |m: &str| FieldError::Checkpoint(m.to_string());
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8], FieldError> {
        let s = data.get(at..at + n).ok_or_else(|| bad("truncated file"))?;
        at += n;
        Ok(s)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != CHECKPOINT_VERSION {
        return Err(FieldError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut resolution = [0usize; 3];
    for r in resolution.iter_mut() {
        *r = u32_at(take(4)?) as usize;
    }
    let mut f64s = [0f64; 9];
    for v in f64s.iter_mut() {
        *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
    }
    let n: usize = resolution.iter().product();
    let mut floats = |count: usize| -> Result<Vec<f64>, FieldError> {
        let bytes = take(4 * count)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    };
    let sigma = floats(n)?;
    let color = floats(3 * n)?;
    if at != data.len() {
        return Err(bad("trailing bytes"));
    }
    let field = RadianceField {
        resolution,
        bounds: Aabb::new([f64s[0], f64s[1], f64s[2]], [f64s[3], f64s[4], f64s[5]]),
        sigma,
        color,
        background: [f64s[6], f64s[7], f64s[8]],
    };
    field.validate()?;
    Ok(field)
}

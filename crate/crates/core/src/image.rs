//! RGB float images and binary PPM I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel buffer has {got} values, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("pixel value {0} outside [0, 1]")]
    OutOfRange(f32),
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Nerf,
    Transformed,
    Mutated,
}

/// Row-major RGB image with channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f32>,
    pub provenance: Provenance,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<f32>, provenance: Provenance) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ImageError::BadLength { expected, got: pixels.len() });
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange(*v));
        }
        Ok(Self { width, height, pixels, provenance })
    }

    pub fn filled(width: u32, height: u32, rgb: [f32; 3], provenance: Provenance) -> Self {
        let n = width as usize * height as usize;
        let pixels = (0..n).flat_map(|_| rgb).collect();
        Self { width, height, pixels, provenance }
    }

    pub fn len_pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Single-channel luma `(r + g + b) / 3`, row-major.
    pub fn luma(&self) -> Vec<f64> {
        self.pixels.chunks_exact(3).map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0).collect()
    }

    /// Snap every channel to the nearest 8-bit level, as if written to disk.
    pub fn quantized(&self) -> Self {
        let pixels = self.pixels.iter().map(|&v| to_u8(v) as f32 / 255.0).collect();
        Self { pixels, ..self.clone() }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| to_u8(v)).collect()
    }

    pub fn from_rgb8(width: u32, height: u32, data: &[u8], provenance: Provenance) -> Result<Self, ImageError> {
        let pixels = data.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(width, height, pixels, provenance)
    }

    /// Bilinear resample to a new size (pixel centers aligned).
    pub fn resized(&self, width: u32, height: u32) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as u32;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = (fy - y0 as f64) as f32;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as u32;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = (fx - x0 as f64) as f32;
                let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
                for ch in 0..3 {
                    let top = a[ch] * (1.0 - tx) + b[ch] * tx;
                    let bot = c[ch] * (1.0 - tx) + d[ch] * tx;
                    out.push((top * (1.0 - ty) + bot * ty).clamp(0.0, 1.0));
                }
            }
        }
        Self { width, height, pixels: out, provenance: self.provenance }
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), ImageError> {
        let io = |source| ImageError::Io { path: path.display().to_string(), source };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        write!(f, "P6\n{} {}\n255\n", self.width, self.height).map_err(io)?;
        f.write_all(&self.to_rgb8()).map_err(io)?;
        f.flush().map_err(io)
    }

    pub fn read_ppm(path: &Path, provenance: Provenance) -> Result<Self, ImageError> {
        let io = |source| ImageError::Io { path: path.display().to_string(), source };
        let mut r = BufReader::new(std::fs::File::open(path).map_err(io)?);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(io)? == 0 {
                return Err(ImageError::Ppm("truncated header".into()));
            }
            let content = line.split('#').next().unwrap_or("");
            header.extend(content.split_whitespace().map(str::to_owned));
        }
        if header[0] != "P6" {
            return Err(ImageError::Ppm(format!("unsupported magic {}", header[0])));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| ImageError::Ppm(format!("bad header field {s}")));
        let (w, h, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
        if maxval != 255 {
            return Err(ImageError::Ppm(format!("unsupported maxval {maxval}")));
        }
        let mut data = vec![0u8; w as usize * h as usize * 3];
        r.read_exact(&mut data).map_err(io)?;
        Self::from_rgb8(w, h, &data, provenance)
    }
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(ImageBuffer::new(1, 1, vec![0.0, 1.5, 0.0], Provenance::Real).is_err());
        assert!(ImageBuffer::new(1, 1, vec![0.0, 0.5], Provenance::Real).is_err());
    }

    #[test]
    fn ppm_round_trip_is_exact_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let pixels: Vec<f32> = (0..4 * 3 * 3).map(|i| (i as f32 * 0.037) % 1.0).collect();
        let img = ImageBuffer::new(4, 3, pixels, Provenance::Real).unwrap().quantized();
        img.write_ppm(&path).unwrap();
        let back = ImageBuffer::read_ppm(&path, Provenance::Real).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = ImageBuffer::filled(8, 6, [0.2, 0.4, 0.6], Provenance::Real);
        assert_eq!(img.resized(8, 6), img);
        let big = img.resized(16, 12);
        assert!(big.pixels.chunks(3).all(|p| (p[0] - 0.2).abs() < 1e-6 && (p[2] - 0.6).abs() < 1e-6));
    }
}

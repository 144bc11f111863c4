//! Image-space baseline mutations: brightness gain, one noise patch, and
//! several small black squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{ImageBuffer, Provenance};

/// Attempts per square before giving up on a non-overlapping layout.
const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum MutationError {
    #[error("invalid mutation: {0}")]
    Invalid(String),
    #[error("patch does not fit: {0}")]
    PatchTooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    M1Brightness,
    M2NoisePatch,
    M3BlackPatches,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationSpec {
    pub kind: MutationKind,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_patch_frac")]
    pub patch_frac: f64,
    #[serde(default = "default_n_patches")]
    pub n_patches: usize,
    /// Side of each black square; 5% of the image width when absent.
    #[serde(default)]
    pub patch_px: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

fn default_gain() -> f64 {
    1.0
}
fn default_patch_frac() -> f64 {
    0.25
}
fn default_n_patches() -> usize {
    6
}

impl MutationSpec {
    pub fn brightness(gain: f64) -> Self {
        Self {
            kind: MutationKind::M1Brightness,
            gain,
            patch_frac: default_patch_frac(),
            n_patches: default_n_patches(),
            patch_px: None,
            seed: 0,
        }
    }

    pub fn noise_patch(patch_frac: f64, seed: u64) -> Self {
        Self { kind: MutationKind::M2NoisePatch, patch_frac, seed, ..Self::brightness(1.0) }
    }

    pub fn black_patches(n_patches: usize, patch_px: Option<u32>, seed: u64) -> Self {
        Self { kind: MutationKind::M3BlackPatches, n_patches, patch_px, seed, ..Self::brightness(1.0) }
    }

    /// The default baseline set: m1 at gains 0.6 and 1.4, m2, m3.
    pub fn defaults(seed: u64) -> Vec<Self> {
        vec![Self::brightness(0.6), Self::brightness(1.4), Self::noise_patch(0.25, seed), Self::black_patches(6, None, seed)]
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self.kind {
            MutationKind::M1Brightness => format!("m1_gain{}", self.gain),
            MutationKind::M2NoisePatch => "m2".to_string(),
            MutationKind::M3BlackPatches => "m3".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), MutationError> {
        match self.kind {
            MutationKind::M1Brightness if !(self.gain > 0.0 && self.gain.is_finite()) => {
                Err(MutationError::Invalid(format!("gain must be positive, got {}", self.gain)))
            }
            MutationKind::M2NoisePatch if !(self.patch_frac > 0.0 && self.patch_frac <= 1.0) => {
                Err(MutationError::Invalid(format!("patch_frac must lie in (0, 1], got {}", self.patch_frac)))
            }
            MutationKind::M3BlackPatches if self.n_patches == 0 || self.patch_px == Some(0) => {
                Err(MutationError::Invalid("m3 needs at least one patch of positive size".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Apply a mutation. Pixels outside the mutated region are copied unchanged.
pub fn mutate(image: &ImageBuffer, spec: &MutationSpec) -> Result<ImageBuffer, MutationError> {
    spec.validate()?;
    let mut out = image.clone().with_provenance(Provenance::Mutated);
    let (w, h) = (image.width, image.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        MutationKind::M1Brightness => {
            let g = spec.gain as f32;
            out.pixels.iter_mut().for_each(|v| *v = (*v * g).clamp(0.0, 1.0));
        }
        MutationKind::M2NoisePatch => {
            let pw = ((spec.patch_frac * w as f64).round() as u32).clamp(1, w);
            let ph = ((spec.patch_frac * h as f64).round() as u32).clamp(1, h);
            let x0 = rng.gen_range(0..=w - pw);
            let y0 = rng.gen_range(0..=h - ph);
            for y in y0..y0 + ph {
                for x in x0..x0 + pw {
                    let c: [f32; 3] = [rng.gen(), rng.gen(), rng.gen()];
                    out.set(x, y, c);
                }
            }
        }
        MutationKind::M3BlackPatches => {
            let side = spec.patch_px.unwrap_or_else(|| ((0.05 * w as f64).round() as u32).max(1));
            if side > w || side > h {
                return Err(MutationError::PatchTooLarge(format!("{side}px square in a {w}x{h} image")));
            }
            let mut placed: Vec<(u32, u32)> = Vec::with_capacity(spec.n_patches);
            for _ in 0..spec.n_patches {
                let spot = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
                    let x = rng.gen_range(0..=w - side);
                    let y = rng.gen_range(0..=h - side);
                    let clear = placed.iter().all(|&(px, py)| x + side <= px || px + side <= x || y + side <= py || py + side <= y);
                    clear.then_some((x, y))
                });
                let Some(spot) = spot else {
                    return Err(MutationError::PatchTooLarge(format!(
                        "cannot place {} disjoint {side}px squares in a {w}x{h} image",
                        spec.n_patches
                    )));
                };
                placed.push(spot);
            }
            for (x0, y0) in placed {
                for y in y0..y0 + side {
                    for x in x0..x0 + side {
                        out.set(x, y, [0.0; 3]);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32) -> ImageBuffer {
        let mut img = ImageBuffer::filled(w, h, [0.0; 3], Provenance::Real);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, [x as f32 / w as f32, y as f32 / h as f32, 0.5]);
            }
        }
        img
    }

    #[test]
    fn unit_gain_is_identity() {
        let img = ramp(20, 10);
        let out = mutate(&img, &MutationSpec::brightness(1.0)).unwrap();
        assert_eq!(out.pixels, img.pixels);
        assert_eq!(out.provenance, Provenance::Mutated);
    }

    #[test]
    fn gain_clamps() {
        let img = ImageBuffer::filled(4, 4, [0.8, 0.5, 0.1], Provenance::Real);
        let out = mutate(&img, &MutationSpec::brightness(1.4)).unwrap();
        assert_eq!(out.get(0, 0), [1.0, 0.7, 0.14]);
    }

    #[test]
    fn six_black_patches_exact_count() {
        let img = ImageBuffer::filled(100, 60, [1.0; 3], Provenance::Real);
        let out = mutate(&img, &MutationSpec::black_patches(6, None, 7)).unwrap();
        let black = out.pixels.chunks(3).filter(|p| *p == [0.0; 3]).count();
        assert_eq!(black, 6 * 5 * 5);
        assert!(out.pixels.chunks(3).all(|p| p == [0.0; 3] || p == [1.0; 3]));
    }

    #[test]
    fn full_noise_patch() {
        let img = ImageBuffer::filled(16, 8, [0.5; 3], Provenance::Real);
        let a = mutate(&img, &MutationSpec::noise_patch(1.0, 3)).unwrap();
        let b = mutate(&img, &MutationSpec::noise_patch(1.0, 3)).unwrap();
        let c = mutate(&img, &MutationSpec::noise_patch(1.0, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.pixels.iter().filter(|v| **v == 0.5).count() < 4);
    }

    #[test]
    fn outside_patch_untouched() {
        let img = ramp(40, 30);
        let out = mutate(&img, &MutationSpec::noise_patch(0.25, 11)).unwrap();
        let changed = img.pixels.chunks(3).zip(out.pixels.chunks(3)).filter(|(a, b)| a != b).count();
        assert!(changed <= 10 * 8);
    }

    #[test]
    fn patch_too_large() {
        let img = ImageBuffer::filled(10, 10, [1.0; 3], Provenance::Real);
        assert!(matches!(mutate(&img, &MutationSpec::black_patches(1, Some(11), 0)), Err(MutationError::PatchTooLarge(_))));
        assert!(matches!(mutate(&img, &MutationSpec::black_patches(5, Some(6), 0)), Err(MutationError::PatchTooLarge(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(MutationSpec::brightness(0.0).validate().is_err());
        assert!(MutationSpec::noise_patch(1.5, 0).validate().is_err());
        assert!(MutationSpec::black_patches(0, None, 0).validate().is_err());
    }
}

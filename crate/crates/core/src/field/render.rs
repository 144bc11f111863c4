use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FieldError, RadianceField, Stencil};
use crate::geometry::{pixel_ray, CameraIntrinsics, CameraPose, Ray};
use crate::image::{ImageBuffer, Provenance};
use crate::rng::{hash_words, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub samples_per_ray: usize,
    /// Uniform jitter inside each depth bin instead of the bin midpoint.
    pub jitter: bool,
    pub seed: u64,
    /// Optional clamp of the near bound after ray/box clipping.
    pub t_near: Option<f64>,
    /// Optional clamp of the far bound after ray/box clipping.
    pub t_far: Option<f64>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { samples_per_ray: 64, jitter: false, seed: 0, t_near: None, t_far: None }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.samples_per_ray < 2 {
            return Err(FieldError::InvalidConfig(format!(
                "samples_per_ray must be at least 2, got {}",
                self.samples_per_ray
            )));
        }
        Ok(())
    }

    /// Apply the optional near/far overrides; `None` if nothing is left.
    pub fn clip(&self, mut ray: Ray) -> Option<Ray> {
        if let Some(n) = self.t_near {
            ray.t_near = ray.t_near.max(n);
        }
        if let Some(f) = self.t_far {
            ray.t_far = ray.t_far.min(f);
        }
        (ray.t_far > ray.t_near).then_some(ray)
    }
}

/// Result of rendering one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayRender {
    pub color: [f64; 3],
    /// Transmittance left after the last sample (weight of the background).
    pub transmittance_residual: f64,
    pub weights: Vec<f64>,
}

/// Per-sample quantities kept for the backward pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SampleRec {
    pub stencil: Option<Stencil>,
    pub color: [f64; 3],
    pub delta: f64,
    /// Transmittance before this sample.
    pub trans: f64,
    pub alpha: f64,
}

/// Quadrature of the volume rendering integral.
///
/// Bin `i` covers `[t_near + iΔ, t_near + (i+1)Δ]`; the sample sits at the
/// midpoint or at a uniform position inside the bin. `δ_i = t_{i+1} - t_i`
/// with the sentinel `t_N = t_0 + (t_far - t_near)`, so the deltas always sum
/// to the clipped ray length.
pub(crate) fn composite(
    field: &RadianceField,
    ray: &Ray,
    cfg: &RenderConfig,
    key: u64,
    mut records: Option<&mut Vec<SampleRec>>,
) -> ([f64; 3], f64) {
    let n = cfg.samples_per_ray;
    let span = ray.t_far - ray.t_near;
    let bin = span / n as f64;
    let mut jitter = SplitMix64::new(key);
    let mut offset = || if cfg.jitter { jitter.next_f64() } else { 0.5 };

    let mut color = [0.0; 3];
    let mut trans = 1.0;
    let t_first = ray.t_near + offset() * bin;
    let mut t = t_first;
    for i in 0..n {
        let t_next = if i + 1 < n { ray.t_near + (i as f64 + 1.0 + offset()) * bin } else { t_first + span };
        let delta = t_next - t;
        let stencil = field.stencil(&ray.at(t));
        let (sigma, c) = match &stencil {
            Some(s) => field.eval_stencil(s),
            None => (0.0, field.background),
        };
        let alpha = 1.0 - (-sigma * delta).exp();
        let w = trans * alpha;
        for ch in 0..3 {
            color[ch] += w * c[ch];
        }
        if let Some(rec) = records.as_deref_mut() {
            rec.push(SampleRec { stencil, color: c, delta, trans, alpha });
        }
        trans *= 1.0 - alpha;
        t = t_next;
    }
    for ch in 0..3 {
        color[ch] += trans * field.background[ch];
    }
    (color, trans)
}

/// Render one ray with the jitter stream selected by `key`.
pub fn render_ray_keyed(field: &RadianceField, ray: &Ray, cfg: &RenderConfig, key: u64) -> RayRender {
    let mut recs = Vec::with_capacity(cfg.samples_per_ray);
    let (color, transmittance_residual) = composite(field, ray, cfg, key, Some(&mut recs));
    let weights = recs.iter().map(|r| r.trans * r.alpha).collect();
    RayRender { color, transmittance_residual, weights }
}

/// Render one ray; jitter (if enabled) is drawn from `cfg.seed`.
pub fn render_ray(field: &RadianceField, ray: &Ray, cfg: &RenderConfig) -> RayRender {
    render_ray_keyed(field, ray, cfg, hash_words(&[cfg.seed]))
}

/// Render a full image. Pixel `p` (row-major index) uses jitter stream
/// `hash(seed, p)`, so the output only depends on the inputs.
pub fn render_image(
    field: &RadianceField,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> ImageBuffer {
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut pixels = vec![0f32; w * h * 3];
    pixels.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let px = ((x as f64) + 0.5, (y as f64) + 0.5);
            let color = match pixel_ray(intr, pose, px, &field.bounds).ok().and_then(|r| cfg.clip(r)) {
                Some(ray) => composite(field, &ray, cfg, hash_words(&[cfg.seed, (y * w + x) as u64]), None).0,
                None => field.background,
            };
            for ch in 0..3 {
                row[3 * x + ch] = (color[ch] as f32).clamp(0.0, 1.0);
            }
        }
    });
    ImageBuffer { width: intr.width, height: intr.height, pixels, provenance: Provenance::Nerf }
}

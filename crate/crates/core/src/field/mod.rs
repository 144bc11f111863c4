//! Voxel radiance field: density and diffuse color on a regular grid of
//! nodes, trilinearly interpolated, rendered by volumetric quadrature and
//! fitted to posed images by projected adaptive gradient descent.

mod backprop;
mod checkpoint;
mod fit;
mod render;

pub use backprop::{loss_and_gradients, Gradients, RaySample};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fit::{fit, FitResult, TrainConfig, TrainView, Trainer};
pub use render::{render_image, render_ray, render_ray_keyed, RayRender, RenderConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// The radiance field parameters.
///
/// Node `(i, j, k)` sits at `min + (i, j, k) * (max - min) / (N - 1)` and is
/// stored at flat index `i + Nx * (j + Ny * k)` (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceField {
    pub resolution: [usize; 3],
    pub bounds: Aabb,
    pub sigma: Vec<f64>,
    /// RGB interleaved, same node order as `sigma`.
    pub color: Vec<f64>,
    pub background: [f64; 3],
}

/// Initial values for a fresh field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldInit {
    pub resolution: [usize; 3],
    /// Fraction by which the scene box is grown to obtain the field bounds.
    pub inflate: f64,
    /// Initial density; when unset it follows from `initial_opacity`.
    pub sigma: Option<f64>,
    /// Opacity of a ray crossing the bounds along their thinnest axis at the
    /// initial density. Too dense a start hides everything behind the first
    /// layer of voxels from the gradient; too thin a start lets the
    /// background explain the images.
    pub initial_opacity: f64,
    pub color: f64,
    pub background: f64,
}

impl Default for FieldInit {
    fn default() -> Self {
        Self { resolution: [64, 64, 64], inflate: 0.05, sigma: None, initial_opacity: 0.65, color: 0.5, background: 0.5 }
    }
}

impl FieldInit {
    /// Initial density for a field with the given bounds.
    pub fn initial_sigma(&self, bounds: &Aabb) -> Result<f64, FieldError> {
        if let Some(s) = self.sigma {
            return Ok(s);
        }
        if !(self.initial_opacity > 0.0 && self.initial_opacity < 1.0) {
            return Err(FieldError::InvalidConfig("initial_opacity must lie in (0, 1)".into()));
        }
        let e = bounds.extent();
        let thin = e.x.min(e.y).min(e.z);
        if !(thin > 0.0) {
            return Err(FieldError::InvalidConfig("field bounds are degenerate".into()));
        }
        Ok(-(1.0 - self.initial_opacity).ln() / thin)
    }
}

/// Eight grid nodes around a point with their interpolation weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub idx: [u32; 8],
    pub w: [f64; 8],
}

impl RadianceField {
    pub fn new(
        resolution: [usize; 3],
        bounds: Aabb,
        sigma: f64,
        color: f64,
        background: [f64; 3],
    ) -> Result<Self, FieldError> {
        let n = resolution.iter().product::<usize>();
        let field = Self {
            resolution,
            bounds,
            sigma: vec![sigma; n],
            color: vec![color; 3 * n],
            background,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn from_init(init: &FieldInit, scene_box: &Aabb) -> Result<Self, FieldError> {
        let bounds = scene_box.inflated(init.inflate);
        Self::new(
            init.resolution,
            bounds,
            init.initial_sigma(&bounds)?,
            init.color,
            [init.background; 3],
        )
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: String| Err(FieldError::Invalid(m));
        if self.resolution.iter().any(|&n| n < 2) {
            return bad(format!("resolution {:?} must be at least 2 per axis", self.resolution));
        }
        if self.resolution.iter().product::<usize>() > u32::MAX as usize {
            return bad("grid too large".into());
        }
        if self.bounds.is_degenerate() {
            return bad("degenerate bounds".into());
        }
        let n = self.node_count();
        if self.sigma.len() != n || self.color.len() != 3 * n {
            return bad("parameter arrays do not match the resolution".into());
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("negative or non-finite density".into());
        }
        if self.color.iter().chain(self.background.iter()).any(|c| !(0.0..=1.0).contains(c)) {
            return bad("color outside [0, 1]".into());
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let b = &self.bounds;
        let at = |a: usize, n: usize| {
            b.min[a] + (b.max[a] - b.min[a]) * n as f64 / (self.resolution[a] - 1) as f64
        };
        Vec3::new(at(0, i), at(1, j), at(2, k))
    }

    #[inline]
    pub(crate) fn stencil(&self, p: &Vec3) -> Option<Stencil> {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let lo = self.bounds.min[a];
            let hi = self.bounds.max[a];
            let v = p[a];
            if !(v >= lo && v <= hi) {
                return None;
            }
            let cells = (self.resolution[a] - 1) as f64;
            let g = (v - lo) / (hi - lo) * cells;
            let c = (g.floor() as usize).min(self.resolution[a] - 2);
            base[a] = c;
            frac[a] = g - c as f64;
        }
        let (nx, nxy) = (self.resolution[0], self.resolution[0] * self.resolution[1]);
        let i0 = base[0] + nx * base[1] + nxy * base[2];
        let [fx, fy, fz] = frac;
        let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
        let idx = [
            i0,
            i0 + 1,
            i0 + nx,
            i0 + nx + 1,
            i0 + nxy,
            i0 + nxy + 1,
            i0 + nxy + nx,
            i0 + nxy + nx + 1,
        ]
        .map(|i| i as u32);
        let w = [
            gx * gy * gz,
            fx * gy * gz,
            gx * fy * gz,
            fx * fy * gz,
            gx * gy * fz,
            fx * gy * fz,
            gx * fy * fz,
            fx * fy * fz,
        ];
        Some(Stencil { idx, w })
    }

    #[inline]
    pub(crate) fn eval_stencil(&self, s: &Stencil) -> (f64, [f64; 3]) {
        let mut sigma = 0.0;
        let mut c = [0.0; 3];
        for (&i, &w) in s.idx.iter().zip(&s.w) {
            let i = i as usize;
            sigma += w * self.sigma[i];
            c[0] += w * self.color[3 * i];
            c[1] += w * self.color[3 * i + 1];
            c[2] += w * self.color[3 * i + 2];
        }
        (sigma, c)
    }

    /// Density and color at a world point; `(0, background)` outside bounds.
    pub fn sample(&self, p: &Vec3) -> (f64, [f64; 3]) {
        match self.stencil(p) {
            Some(s) => self.eval_stencil(&s),
            None => (0.0, self.background),
        }
    }
}

/// Free-function form of [`RadianceField::sample`].
pub fn sample_field(field: &RadianceField, point: &Vec3) -> (f64, [f64; 3]) {
    field.sample(point)
}

//! Analytic gradients of the photometric loss with respect to the grid.
//!
//! For one ray with samples `i = 0..N`:
//!
//! ```text
//! C       = Σ T_i α_i c_i + T_N b
//! ∂C/∂c_i = w_i
//! ∂C/∂b   = T_N
//! ∂C/∂σ_k = δ_k (T_{k+1} c_k − S_{k+1}),  S_{k+1} = Σ_{i>k} w_i c_i + T_N b
//! ```
//!
//! Sample values are trilinear in the node parameters, so each sample
//! gradient is scattered to its eight nodes with the interpolation weights.

use super::render::{composite, SampleRec};
use super::{FieldError, RadianceField, RenderConfig};
use crate::geometry::Ray;
use crate::rng::hash_words;

/// A training ray and its target color. `ray` is `None` for pixels whose ray
/// misses the field bounds; those see only the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub ray: Option<Ray>,
    pub target: [f64; 3],
}

/// Dense gradient with the same layout as the field parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub sigma: Vec<f64>,
    pub color: Vec<f64>,
    pub background: [f64; 3],
}

impl Gradients {
    pub fn zeros_like(field: &RadianceField) -> Self {
        Self { sigma: vec![0.0; field.sigma.len()], color: vec![0.0; field.color.len()], background: [0.0; 3] }
    }
}

/// Jitter stream for ray `index` of a batch rendered with `cfg`.
pub(crate) fn batch_key(cfg: &RenderConfig, index: u64) -> u64 {
    hash_words(&[cfg.seed, 0xBA7C, index])
}

/// Gradient sink that remembers which nodes it touched, so it can be
/// reduced and cleared without sweeping the whole grid.
pub(crate) struct GradAccum {
    pub sigma: Vec<f64>,
    pub color: Vec<f64>,
    pub background: [f64; 3],
    pub touched: Vec<u32>,
    mark: Vec<bool>,
    pub loss: f64,
    scratch: Vec<SampleRec>,
}

impl GradAccum {
    pub fn new(nodes: usize) -> Self {
        Self {
            sigma: vec![0.0; nodes],
            color: vec![0.0; 3 * nodes],
            background: [0.0; 3],
            touched: Vec::new(),
            mark: vec![false; nodes],
            loss: 0.0,
            scratch: Vec::new(),
        }
    }

    #[inline]
    fn touch(&mut self, i: usize) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.touched.push(i as u32);
        }
    }

    /// Add `self` into `into` in touched order and reset `self`.
    pub fn drain_into(&mut self, into: &mut GradAccum) {
        for &i in &self.touched {
            let i = i as usize;
            into.touch(i);
            into.sigma[i] += self.sigma[i];
            for c in 0..3 {
                into.color[3 * i + c] += self.color[3 * i + c];
            }
            self.sigma[i] = 0.0;
            self.color[3 * i..3 * i + 3].fill(0.0);
            self.mark[i] = false;
        }
        self.touched.clear();
        for c in 0..3 {
            into.background[c] += self.background[c];
        }
        self.background = [0.0; 3];
        into.loss += self.loss;
        self.loss = 0.0;
    }

    /// Zero all touched entries.
    pub fn clear(&mut self) {
        for &i in &self.touched {
            let i = i as usize;
            self.sigma[i] = 0.0;
            self.color[3 * i..3 * i + 3].fill(0.0);
            self.mark[i] = false;
        }
        self.touched.clear();
        self.background = [0.0; 3];
        self.loss = 0.0;
    }

    /// Forward and backward for one ray. `scale` multiplies both the loss and
    /// its gradient (1 / (3·batch) for the mean squared error).
    pub fn accumulate_ray(&mut self, field: &RadianceField, sample: &RaySample, cfg: &RenderConfig, key: u64, scale: f64) {
        let mut recs = std::mem::take(&mut self.scratch);
        recs.clear();
        let (color, trans_n) = match &sample.ray {
            Some(ray) => composite(field, ray, cfg, key, Some(&mut recs)),
            None => (field.background, 1.0),
        };
        let mut g = [0.0; 3];
        for c in 0..3 {
            let r = color[c] - sample.target[c];
            self.loss += scale * r * r;
            g[c] = 2.0 * scale * r;
        }
        let gb = g[0] * field.background[0] + g[1] * field.background[1] + g[2] * field.background[2];
        for c in 0..3 {
            self.background[c] += trans_n * g[c];
        }
        // S_{k+1}·g accumulated from the back
        let mut tail = trans_n * gb;
        for rec in recs.iter().rev() {
            let w = rec.trans * rec.alpha;
            let cg = rec.color[0] * g[0] + rec.color[1] * g[1] + rec.color[2] * g[2];
            let trans_after = rec.trans * (1.0 - rec.alpha);
            let d_sigma = rec.delta * (trans_after * cg - tail);
            tail += w * cg;
            if let Some(st) = &rec.stencil {
                for (&i, &wt) in st.idx.iter().zip(&st.w) {
                    let i = i as usize;
                    self.touch(i);
                    self.sigma[i] += wt * d_sigma;
                    let wc = wt * w;
                    self.color[3 * i] += wc * g[0];
                    self.color[3 * i + 1] += wc * g[1];
                    self.color[3 * i + 2] += wc * g[2];
                }
            }
        }
        self.scratch = recs;
    }
}

/// Mean squared RGB error over the batch (averaged over rays and channels)
/// and its exact gradient with respect to every field parameter.
///
/// Ray `k` of the batch uses jitter stream `hash(cfg.seed, k)`.
pub fn loss_and_gradients(
    field: &RadianceField,
    batch: &[RaySample],
    cfg: &RenderConfig,
) -> Result<(f64, Gradients), FieldError> {
    if batch.is_empty() {
        return Err(FieldError::EmptyBatch);
    }
    cfg.validate()?;
    let scale = 1.0 / (3.0 * batch.len() as f64);
    let mut acc = GradAccum::new(field.node_count());
    for (k, s) in batch.iter().enumerate() {
        acc.accumulate_ray(field, s, cfg, batch_key(cfg, k as u64), scale);
    }
    let grads = Gradients { sigma: acc.sigma, color: acc.color, background: acc.background };
    Ok((acc.loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::render_ray_keyed;
    use crate::geometry::{Aabb, Vec3};
    use approx::assert_relative_eq;

    fn x_ray(t_near: f64, t_far: f64) -> Ray {
        Ray { origin: Vec3::new(-1.0, 0.5, 0.5), direction: Vec3::x(), t_near, t_far }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut f = RadianceField::new([3, 3, 3], Aabb::new([0.0; 3], [1.0; 3]), 2.0, 0.4, [0.1, 0.2, 0.3]).unwrap();
        f.sigma[13] = 5.0;
        f.color[40] = 0.9;
        let cfg = RenderConfig { samples_per_ray: 8, ..Default::default() };
        let rays = [x_ray(1.0, 2.0), x_ray(1.1, 1.9)];
        let batch: Vec<RaySample> = rays
            .iter()
            .enumerate()
            .map(|(k, r)| RaySample { ray: Some(*r), target: render_ray_keyed(&f, r, &cfg, batch_key(&cfg, k as u64)).color })
            .collect();
        let (loss, g) = loss_and_gradients(&f, &batch, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.sigma.iter().chain(&g.color).chain(&g.background).all(|v| *v == 0.0));
    }

    #[test]
    fn single_sample_color_gradient_by_hand() {
        // one occupied sample exactly on the x = 0.5 node plane; the second
        // sample lies outside the box
        let f = RadianceField::new([3, 3, 3], Aabb::new([0.0; 3], [1.0; 3]), 1.5, 0.6, [0.2, 0.2, 0.2]).unwrap();
        let ray = Ray { origin: Vec3::new(0.0, 0.5, 0.5), direction: Vec3::x(), t_near: 0.2, t_far: 1.4 };
        let cfg = RenderConfig { samples_per_ray: 2, ..Default::default() };
        let target = [0.0, 0.5, 1.0];
        let (_, g) = loss_and_gradients(&f, &[RaySample { ray: Some(ray), target }], &cfg).unwrap();
        let w = 1.0 - (-1.5f64 * 0.6).exp();
        let render = w * 0.6 + (1.0 - w) * 0.2;
        // the sample sits on node (1, 1, 1) with interpolation weight 1
        let node = f.node_index(1, 1, 1);
        for c in 0..3 {
            let expected = 2.0 * w * (render - target[c]) / 3.0;
            assert_relative_eq!(g.color[3 * node + c], expected, epsilon = 1e-12);
        }
        // background receives the residual transmittance
        for c in 0..3 {
            assert_relative_eq!(g.background[c], 2.0 * (1.0 - w) * (render - target[c]) / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_ray_only_touches_background() {
        let f = RadianceField::new([2, 2, 2], Aabb::new([0.0; 3], [1.0; 3]), 1.0, 0.5, [0.3, 0.3, 0.3]).unwrap();
        let (loss, g) =
            loss_and_gradients(&f, &[RaySample { ray: None, target: [0.0, 0.3, 0.6] }], &RenderConfig::default()).unwrap();
        assert_relative_eq!(loss, (0.09 + 0.0 + 0.09) / 3.0, epsilon = 1e-12);
        assert!(g.sigma.iter().all(|v| *v == 0.0));
        assert_relative_eq!(g.background[0], 2.0 * 0.3 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_batch_rejected() {
        let f = RadianceField::new([2, 2, 2], Aabb::new([0.0; 3], [1.0; 3]), 1.0, 0.5, [0.3; 3]).unwrap();
        assert!(matches!(loss_and_gradients(&f, &[], &RenderConfig::default()), Err(FieldError::EmptyBatch)));
    }
}

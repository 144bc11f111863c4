use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backprop::{batch_key, GradAccum, RaySample};
use super::{FieldError, RadianceField, RenderConfig};
use crate::geometry::{pixel_ray, CameraIntrinsics, CameraPose};
use crate::image::ImageBuffer;
use crate::rng::hash_words;

/// Fixed number of gradient partial sums per step. Independent of the thread
/// count so the reduction order, and therefore the result, never changes.
const GRAD_CHUNKS: usize = 8;
const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub rays_per_step: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Density parameters live on a larger scale than colors; their step
    /// size is `learning_rate * density_lr_scale`.
    pub density_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 3000, rays_per_step: 4096, learning_rate: 0.2, seed: 0, density_lr_scale: 40.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.rays_per_step == 0 {
            return Err(FieldError::InvalidConfig("rays_per_step must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.density_lr_scale > 0.0) {
            return Err(FieldError::InvalidConfig("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// One posed training image.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub intr: CameraIntrinsics,
    pub pose: CameraPose,
    pub image: ImageBuffer,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub field: RadianceField,
    pub loss_history: Vec<f64>,
}

/// Stateful optimizer; `fit` drives it for a fixed number of steps.
pub struct Trainer<'a> {
    pub field: RadianceField,
    views: &'a [TrainView],
    tcfg: TrainConfig,
    rcfg: RenderConfig,
    rng: ChaCha8Rng,
    step: usize,
    sq_sigma: Vec<f64>,
    sq_color: Vec<f64>,
    sq_background: [f64; 3],
    partials: Vec<GradAccum>,
    total: GradAccum,
    batch: Vec<RaySample>,
    pub loss_history: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        field: RadianceField,
        views: &'a [TrainView],
        tcfg: TrainConfig,
        rcfg: RenderConfig,
    ) -> Result<Self, FieldError> {
        if views.is_empty() {
            return Err(FieldError::EmptyDataset);
        }
        tcfg.validate()?;
        rcfg.validate()?;
        field.validate()?;
        let n = field.node_count();
        Ok(Self {
            views,
            tcfg,
            rcfg,
            rng: ChaCha8Rng::seed_from_u64(tcfg.seed),
            step: 0,
            sq_sigma: vec![0.0; n],
            sq_color: vec![0.0; 3 * n],
            sq_background: [0.0; 3],
            partials: (0..rayon::current_num_threads().clamp(1, GRAD_CHUNKS)).map(|_| GradAccum::new(n)).collect(),
            total: GradAccum::new(n),
            batch: Vec::with_capacity(tcfg.rays_per_step),
            loss_history: Vec::new(),
            field,
        })
    }

    fn sample_batch(&mut self) {
        self.batch.clear();
        for _ in 0..self.tcfg.rays_per_step {
            let view = &self.views[self.rng.gen_range(0..self.views.len())];
            let x = self.rng.gen_range(0..view.image.width);
            let y = self.rng.gen_range(0..view.image.height);
            let px = (x as f64 + 0.5, y as f64 + 0.5);
            let ray = pixel_ray(&view.intr, &view.pose, px, &self.field.bounds).ok().and_then(|r| self.rcfg.clip(r));
            let [r, g, b] = view.image.get(x, y);
            self.batch.push(RaySample { ray, target: [r as f64, g as f64, b as f64] });
        }
    }

    /// One optimization step; returns the batch loss before the update.
    pub fn step(&mut self) -> f64 {
        self.sample_batch();
        let step_cfg = RenderConfig { seed: hash_words(&[self.rcfg.seed, self.step as u64]), ..self.rcfg };
        let scale = 1.0 / (3.0 * self.batch.len() as f64);
        let chunk = self.batch.len().div_ceil(GRAD_CHUNKS);
        let field = &self.field;
        let batch = &self.batch;
        self.total.clear();
        // chunks are processed in rounds of `partials.len()` but always drained
        // in chunk order, so the sum does not depend on the thread count
        let width = self.partials.len();
        for round in (0..GRAD_CHUNKS).step_by(width) {
            self.partials.par_iter_mut().enumerate().for_each(|(p, acc)| {
                let c = round + p;
                if c >= GRAD_CHUNKS {
                    return;
                }
                let lo = (c * chunk).min(batch.len());
                let hi = ((c + 1) * chunk).min(batch.len());
                for (k, s) in batch[lo..hi].iter().enumerate() {
                    acc.accumulate_ray(field, s, &step_cfg, batch_key(&step_cfg, (lo + k) as u64), scale);
                }
            });
            for acc in self.partials.iter_mut() {
                acc.drain_into(&mut self.total);
            }
        }
        let loss = self.total.loss;
        self.apply_update();
        self.step += 1;
        self.loss_history.push(loss);
        loss
    }

    /// Adagrad step followed by projection onto the feasible set.
    fn apply_update(&mut self) {
        let lr = self.tcfg.learning_rate;
        let lr_sigma = lr * self.tcfg.density_lr_scale;
        let g = &self.total;
        for &i in &g.touched {
            let i = i as usize;
            let gs = g.sigma[i];
            self.sq_sigma[i] += gs * gs;
            let s = self.field.sigma[i] - lr_sigma * gs / (self.sq_sigma[i] + ADAGRAD_EPS).sqrt();
            self.field.sigma[i] = s.max(0.0);
            for c in 3 * i..3 * i + 3 {
                let gc = g.color[c];
                self.sq_color[c] += gc * gc;
                let v = self.field.color[c] - lr * gc / (self.sq_color[c] + ADAGRAD_EPS).sqrt();
                self.field.color[c] = v.clamp(0.0, 1.0);
            }
        }
        for c in 0..3 {
            let gb = g.background[c];
            self.sq_background[c] += gb * gb;
            let v = self.field.background[c] - lr * gb / (self.sq_background[c] + ADAGRAD_EPS).sqrt();
            self.field.background[c] = v.clamp(0.0, 1.0);
        }
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn finish(self) -> FitResult {
        FitResult { field: self.field, loss_history: self.loss_history }
    }
}

/// Fit `field` to the posed views for `tcfg.steps` iterations.
pub fn fit(
    field: RadianceField,
    views: &[TrainView],
    tcfg: &TrainConfig,
    rcfg: &RenderConfig,
) -> Result<FitResult, FieldError> {
    let mut trainer = Trainer::new(field, views, *tcfg, *rcfg)?;
    for _ in 0..tcfg.steps {
        trainer.step();
    }
    Ok(trainer.finish())
}

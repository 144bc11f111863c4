//! Checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use nerfmt::field::{loss_and_gradients, render_ray, RadianceField, RaySample, RenderConfig};
use nerfmt::geometry::{Aabb, Ray, Vec3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_field(rng: &mut ChaCha8Rng, res: usize) -> RadianceField {
    let mut f = RadianceField::new([res; 3], Aabb::new([0.0; 3], [1.0; 3]), 0.0, 0.0, [0.0; 3]).unwrap();
    f.sigma.iter_mut().for_each(|s| *s = rng.gen_range(0.2..4.0));
    f.color.iter_mut().for_each(|c| *c = rng.gen_range(0.0..1.0));
    f.background = [rng.gen(), rng.gen(), rng.gen()];
    f
}

/// A ray from outside the unit box through a random interior point, clipped
/// to the box.
pub fn random_ray(rng: &mut ChaCha8Rng, bounds: &Aabb) -> Ray {
    loop {
        let target = Vec3::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
        let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if dir.norm() < 0.1 {
            continue;
        }
        let dir = dir.normalize();
        let origin = target - 2.0 * dir;
        if let Some((t0, t1)) = bounds.intersect(&origin, &dir) {
            if t1 > t0 {
                return Ray { origin, direction: dir, t_near: t0, t_far: t1 };
            }
        }
    }
}

#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

/// Analytic gradient against central differences with step `h` on `n`
/// randomly chosen parameters that the batch actually depends on.
pub fn gradient_check(seed: u64, n: usize, h: f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = random_field(&mut rng, 6);
    let cfg = RenderConfig { samples_per_ray: 24, ..Default::default() };
    let batch: Vec<RaySample> = (0..24)
        .map(|_| RaySample {
            ray: Some(random_ray(&mut rng, &field.bounds)),
            target: [rng.gen(), rng.gen(), rng.gen()],
        })
        .collect();
    let (_, grads) = loss_and_gradients(&field, &batch, &cfg).unwrap();

    // (kind, index): 0 = sigma, 1 = color, 2 = background
    let mut candidates: Vec<(u8, usize)> = Vec::new();
    candidates.extend((0..field.sigma.len()).filter(|&i| grads.sigma[i] != 0.0).map(|i| (0, i)));
    candidates.extend((0..field.color.len()).filter(|&i| grads.color[i] != 0.0).map(|i| (1, i)));
    candidates.extend((0..3).map(|i| (2, i)));
    candidates.shuffle(&mut rng);
    candidates.truncate(n);

    let loss_with = |kind: u8, i: usize, v: f64| {
        let mut f = field.clone();
        match kind {
            0 => f.sigma[i] = v,
            1 => f.color[i] = v,
            _ => f.background[i] = v,
        }
        loss_and_gradients(&f, &batch, &cfg).unwrap().0
    };
    let mut out = GradCheck { checked: 0, max_rel_err: 0.0, worst: String::new() };
    for (kind, i) in candidates {
        let (x, analytic) = match kind {
            0 => (field.sigma[i], grads.sigma[i]),
            1 => (field.color[i], grads.color[i]),
            _ => (field.background[i], grads.background[i]),
        };
        let numeric = (loss_with(kind, i, x + h) - loss_with(kind, i, x - h)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        out.checked += 1;
        if rel > out.max_rel_err {
            out.max_rel_err = rel;
            out.worst = format!("{}[{i}]: analytic {analytic:e}, numeric {numeric:e}", ["sigma", "color", "bg"][kind as usize]);
        }
    }
    out
}

/// Compositing invariants on `n` random rays. Returns the first violation.
pub fn compositing_check(seed: u64, n: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = random_field(&mut rng, 8);
    for k in 0..n {
        let ray = random_ray(&mut rng, &field.bounds);
        let cfg = RenderConfig {
            samples_per_ray: rng.gen_range(2..96),
            jitter: rng.gen_bool(0.5),
            seed: rng.gen(),
            ..Default::default()
        };
        let r = render_ray(&field, &ray, &cfg);
        let total: f64 = r.weights.iter().sum::<f64>() + r.transmittance_residual;
        if (total - 1.0).abs() > 1e-6 {
            return Err(format!("ray {k}: sum of weights + T_N = {total}"));
        }
        // T_{i+1} = T_i - w_i, so T is non-increasing iff every weight is >= 0
        let mut t = 1.0f64;
        for (i, w) in r.weights.iter().enumerate() {
            let next = t - w;
            if *w < 0.0 || next > t {
                return Err(format!("ray {k}: transmittance increases at sample {i}"));
            }
            t = next;
        }
    }
    let mut empty = random_field(&mut rng, 4);
    empty.sigma.iter_mut().for_each(|s| *s = 0.0);
    for k in 0..n.min(100) {
        let ray = random_ray(&mut rng, &empty.bounds);
        let r = render_ray(&empty, &ray, &RenderConfig::default());
        if r.color != empty.background || r.transmittance_residual != 1.0 {
            return Err(format!("empty field, ray {k}: got {:?}, background {:?}", r.color, empty.background));
        }
    }
    Ok(())
}

/// Rank of each value by brute force: 1 + #smaller + (#equal - 1) / 2.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn stub_exe() -> &'static str {
    env!("CARGO_BIN_EXE_sut-stub")
}

//! Nearest-prototype color-histogram classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SutError, SutOutput};
use crate::image::ImageBuffer;

pub const HIST_BINS: usize = 8;
pub const FEATURE_DIM: usize = 3 * HIST_BINS;
pub const DEFAULT_TEMPERATURE: f64 = 0.05;

/// Class prototypes, ordered lexicographically by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistModel {
    pub labels: Vec<String>,
    pub prototypes: Vec<Vec<f64>>,
    pub temperature: f64,
}

/// Per-channel 8-bin histograms, each normalized to sum to 1.
pub fn hist_feature(image: &ImageBuffer) -> Vec<f64> {
    let mut f = vec![0.0; FEATURE_DIM];
    for px in image.pixels.chunks_exact(3) {
        for (c, v) in px.iter().enumerate() {
            let bin = ((*v as f64 * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
            f[c * HIST_BINS + bin] += 1.0;
        }
    }
    let n = image.len_pixels().max(1) as f64;
    f.iter_mut().for_each(|v| *v /= n);
    f
}

/// Prototype = mean feature of each class.
pub fn train_hist_classifier(classes: &BTreeMap<String, Vec<ImageBuffer>>) -> Result<HistModel, SutError> {
    if classes.is_empty() {
        return Err(SutError::EmptyModel);
    }
    let mut labels = Vec::new();
    let mut prototypes = Vec::new();
    for (label, images) in classes {
        if images.is_empty() {
            return Err(SutError::EmptyClass(label.clone()));
        }
        let mut mean = vec![0.0; FEATURE_DIM];
        for img in images {
            for (m, v) in mean.iter_mut().zip(hist_feature(img)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= images.len() as f64);
        labels.push(label.clone());
        prototypes.push(mean);
    }
    Ok(HistModel { labels, prototypes, temperature: DEFAULT_TEMPERATURE })
}

/// Softmax over negative prototype distances divided by the temperature.
pub fn hist_classify(image: &ImageBuffer, model: &HistModel) -> Result<SutOutput, SutError> {
    if model.prototypes.is_empty() {
        return Err(SutError::EmptyModel);
    }
    let f = hist_feature(image);
    let dists: Vec<f64> = model
        .prototypes
        .iter()
        .map(|p| p.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    Ok(SutOutput::Classification { probs: softmax_neg(&dists, model.temperature) })
}

fn softmax_neg(dists: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = dists.iter().map(|d| -d / temperature).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

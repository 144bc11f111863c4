//! Systems under test: a common output type, two in-process reference
//! implementations and a line-oriented JSON protocol for external programs.

mod external;
mod harris;
mod hist;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ExternalSut, DEFAULT_TIMEOUT};
pub use harris::{harris_detect, harris_response, HARRIS_K};
pub use hist::{hist_classify, hist_feature, train_hist_classifier, HistModel, DEFAULT_TEMPERATURE, FEATURE_DIM};

use crate::image::ImageBuffer;

pub const DEFAULT_MAX_POINTS: usize = 100;

#[derive(Debug, Error)]
pub enum SutError {
    #[error("SUT crashed: {0}")]
    SutCrashed(String),
    #[error("SUT did not answer within {0:?}")]
    Timeout(Duration),
    #[error("image {width}x{height} is too small (minimum side {min})")]
    TooSmall { width: u32, height: u32, min: u32 },
    #[error("classifier has no classes")]
    EmptyModel,
    #[error("class {0:?} has no images")]
    EmptyClass(String),
    #[error("invalid SUT configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SutTask {
    Classify,
    Detect,
}

impl SutTask {
    pub fn as_str(&self) -> &'static str {
        match self {
            SutTask::Classify => "classify",
            SutTask::Detect => "detect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SutOutput {
    Classification { probs: Vec<f64> },
    InterestPoints { points: Vec<InterestPoint> },
}

impl SutOutput {
    pub fn task(&self) -> SutTask {
        match self {
            SutOutput::Classification { .. } => SutTask::Classify,
            SutOutput::InterestPoints { .. } => SutTask::Detect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SutDescriptor {
    pub name: String,
    pub task: SutTask,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS
}

/// What actually computes the output.
#[derive(Debug)]
pub enum SutBackend {
    Harris,
    Hist(HistModel),
    External(ExternalSut),
}

#[derive(Debug)]
pub struct Sut {
    pub descriptor: SutDescriptor,
    pub backend: SutBackend,
}

impl Sut {
    pub fn new(descriptor: SutDescriptor, backend: SutBackend) -> Result<Self, SutError> {
        if descriptor.max_points == 0 {
            return Err(SutError::Config("max_points must be at least 1".into()));
        }
        let expected = match &backend {
            SutBackend::Harris => Some(SutTask::Detect),
            SutBackend::Hist(_) => Some(SutTask::Classify),
            SutBackend::External(_) => None,
        };
        if let Some(t) = expected {
            if t != descriptor.task {
                return Err(SutError::Config(format!(
                    "SUT {} is declared as {} but its backend only does {}",
                    descriptor.name,
                    descriptor.task.as_str(),
                    t.as_str()
                )));
            }
        }
        Ok(Self { descriptor, backend })
    }
}

/// Confidence descending; ties go to the lower `(y, x)`.
pub(crate) fn sort_points(points: &mut [InterestPoint]) {
    points.sort_by(|a, b| {
        b.confidence.total_cmp(&a.confidence).then(a.y.total_cmp(&b.y)).then(a.x.total_cmp(&b.x))
    });
}

/// Check and normalize an output against the SUT contract.
pub(crate) fn validate_output(
    out: SutOutput,
    desc: &SutDescriptor,
    width: u32,
    height: u32,
) -> Result<SutOutput, String> {
    if out.task() != desc.task {
        return Err(format!("expected a {} answer", desc.task.as_str()));
    }
    match out {
        SutOutput::Classification { probs } => {
            if probs.is_empty() {
                return Err("empty probability vector".into());
            }
            if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err("probabilities must be finite and non-negative".into());
            }
            let s: f64 = probs.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(format!("probabilities sum to {s}"));
            }
            Ok(SutOutput::Classification { probs })
        }
        SutOutput::InterestPoints { mut points } => {
            for p in &points {
                let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64;
                if !inside || !p.confidence.is_finite() {
                    return Err(format!("point ({}, {}) outside the image or with bad confidence", p.x, p.y));
                }
            }
            sort_points(&mut points);
            points.truncate(desc.max_points);
            Ok(SutOutput::InterestPoints { points })
        }
    }
}

/// Run a SUT on one image.
pub fn run_sut(sut: &Sut, image: &ImageBuffer) -> Result<SutOutput, SutError> {
    match &sut.backend {
        SutBackend::Harris => harris_detect(image, sut.descriptor.max_points),
        SutBackend::Hist(model) => hist_classify(image, model),
        SutBackend::External(ext) => {
            let out = ext.request(sut.descriptor.task, image)?;
            validate_output(out, &sut.descriptor, image.width, image.height).map_err(SutError::SutCrashed)
        }
    }
}

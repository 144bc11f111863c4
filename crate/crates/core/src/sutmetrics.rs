//! Output-side consistency metrics and their mapping to deviations in
//! [0, 1], where 0 means the two outputs agree perfectly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{transfer, Mat3};
use crate::suts::{InterestPoint, SutOutput, SutTask};

pub const MATCH_RADIUS: f64 = 2.0;
pub const COVERAGE_RADIUS: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("singular homography")]
    SingularHomography,
    #[error("metric {metric} does not apply to {task} outputs")]
    TaskMismatch { metric: &'static str, task: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Cosine,
    L2,
    ClassInvariance,
    Repeatability,
    IpSpread,
}

impl MetricKind {
    pub fn id(&self) -> &'static str {
        match self {
            MetricKind::Cosine => "cosine",
            MetricKind::L2 => "l2",
            MetricKind::ClassInvariance => "class_invariance",
            MetricKind::Repeatability => "repeatability",
            MetricKind::IpSpread => "ip_spread",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.id() == s)
    }

    pub const ALL: [MetricKind; 5] =
        [MetricKind::Cosine, MetricKind::L2, MetricKind::ClassInvariance, MetricKind::Repeatability, MetricKind::IpSpread];

    pub fn task(&self) -> SutTask {
        match self {
            MetricKind::Cosine | MetricKind::L2 | MetricKind::ClassInvariance => SutTask::Classify,
            MetricKind::Repeatability | MetricKind::IpSpread => SutTask::Detect,
        }
    }

    pub fn for_task(task: SutTask) -> Vec<MetricKind> {
        Self::ALL.into_iter().filter(|m| m.task() == task).collect()
    }

    /// Raw value → deviation.
    pub fn deviation(&self, raw: f64) -> f64 {
        let d = match self {
            MetricKind::L2 => raw / std::f64::consts::SQRT_2,
            _ => 1.0 - raw,
        };
        d.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricKind,
    pub raw: f64,
    pub deviation: f64,
}

impl MetricValue {
    pub fn new(metric: MetricKind, raw: f64) -> Self {
        Self { metric, raw, deviation: metric.deviation(raw) }
    }
}

fn same_len(p: &[f64], q: &[f64]) -> Result<(), MetricError> {
    if p.len() != q.len() {
        return Err(MetricError::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

pub fn cosine_similarity(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    same_len(p, q)?;
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    Ok((dot / (np * nq)).clamp(-1.0, 1.0))
}

/// Euclidean (not squared) distance.
pub fn l2_distance(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    same_len(p, q)?;
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// First index of the maximum.
pub fn argmax(p: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in p.iter().enumerate() {
        if best.is_none_or(|b| *v > p[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn class_invariance(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    same_len(p, q)?;
    if p.is_empty() {
        return Err(MetricError::ZeroVector);
    }
    Ok(if argmax(p) == argmax(q) { 1.0 } else { 0.0 })
}

/// Fraction of A's points (projected through `h` into B) that find a partner
/// in B within [`MATCH_RADIUS`]. A's points are matched greedily in the order
/// given (confidence order), each to its nearest still-unmatched B point.
pub fn repeatability(
    pts_a: &[InterestPoint],
    pts_b: &[InterestPoint],
    h: &Mat3,
    width_b: u32,
    height_b: u32,
) -> Result<f64, MetricError> {
    if !(h.determinant().abs() > 1e-12) {
        return Err(MetricError::SingularHomography);
    }
    let inside = |x: f64, y: f64| x >= -0.5 && y >= -0.5 && x < width_b as f64 - 0.5 && y < height_b as f64 - 0.5;
    let shared: Vec<(f64, f64)> =
        pts_a.iter().filter_map(|p| transfer(h, p.x, p.y)).filter(|(x, y)| inside(*x, *y)).collect();
    if shared.is_empty() {
        return Ok(0.0);
    }
    let mut used = vec![false; pts_b.len()];
    let mut matches = 0usize;
    for (x, y) in &shared {
        let mut best: Option<(usize, f64)> = None;
        for (j, q) in pts_b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((q.x - x).powi(2) + (q.y - y).powi(2)).sqrt();
            if d <= MATCH_RADIUS && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            matches += 1;
        }
    }
    Ok(matches as f64 / shared.len().min(pts_b.len()).max(1) as f64)
}

fn coverage(points: &[InterestPoint], width: u32, height: u32) -> Vec<bool> {
    let (w, h) = (width as usize, height as usize);
    let mut mask = vec![false; w * h];
    let r = COVERAGE_RADIUS;
    for p in points {
        let y0 = (p.y - r).floor().max(0.0) as usize;
        let y1 = ((p.y + r).ceil().max(0.0) as usize).min(h.saturating_sub(1));
        let x0 = (p.x - r).floor().max(0.0) as usize;
        let x1 = ((p.x + r).ceil().max(0.0) as usize).min(w.saturating_sub(1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                if (x as f64 - p.x).powi(2) + (y as f64 - p.y).powi(2) <= r * r {
                    mask[y * w + x] = true;
                }
            }
        }
    }
    mask
}

/// IoU of the rasterized disk coverage of two point sets; 1 when both are
/// empty.
pub fn ip_spread(pts_a: &[InterestPoint], pts_b: &[InterestPoint], width: u32, height: u32) -> f64 {
    let a = coverage(pts_a, width, height);
    let b = coverage(pts_b, width, height);
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.iter().zip(&b) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Evaluate `metric` on a pair of outputs. `h` maps A's pixel coordinates
/// into B's (repeatability only).
pub fn evaluate(
    metric: MetricKind,
    a: &SutOutput,
    b: &SutOutput,
    h: &Mat3,
    width: u32,
    height: u32,
) -> Result<MetricValue, MetricError> {
    let raw = match (a, b) {
        (SutOutput::Classification { probs: p }, SutOutput::Classification { probs: q }) => match metric {
            MetricKind::Cosine => cosine_similarity(p, q)?,
            MetricKind::L2 => l2_distance(p, q)?,
            MetricKind::ClassInvariance => class_invariance(p, q)?,
            _ => return Err(MetricError::TaskMismatch { metric: metric.id(), task: "classify" }),
        },
        (SutOutput::InterestPoints { points: p }, SutOutput::InterestPoints { points: q }) => match metric {
            MetricKind::Repeatability => repeatability(p, q, h, width, height)?,
            MetricKind::IpSpread => ip_spread(p, q, width, height),
            _ => return Err(MetricError::TaskMismatch { metric: metric.id(), task: "detect" }),
        },
        _ => return Err(MetricError::TaskMismatch { metric: metric.id(), task: "mixed" }),
    };
    Ok(MetricValue::new(metric, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> InterestPoint {
        InterestPoint { x, y, confidence: 1.0 }
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricError::ZeroVector));
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(l2_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt());
        assert!((l2_distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(l2_distance(&[1.0], &[0.5, 0.5]), Err(MetricError::LengthMismatch(1, 2)));
        assert_eq!(MetricKind::L2.deviation(2f64.sqrt()), 1.0);
    }

    #[test]
    fn class_invariance_tie_rule() {
        assert_eq!(class_invariance(&[0.5, 0.5, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let mut p = vec![0.0; 10];
        let mut q = vec![0.0; 10];
        p[3] = 1.0;
        q[7] = 1.0;
        assert_eq!(class_invariance(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn repeatability_examples() {
        let i = Mat3::identity();
        let a = [pt(10.0, 10.0), pt(30.0, 5.0)];
        assert_eq!(repeatability(&a, &a, &i, 64, 64).unwrap(), 1.0);
        assert_eq!(repeatability(&[pt(10.0, 10.0)], &[pt(11.0, 11.0)], &i, 64, 64).unwrap(), 1.0);
        let mut shift = Mat3::identity();
        shift[(0, 2)] = 500.0;
        assert_eq!(repeatability(&a, &a, &shift, 64, 64).unwrap(), 0.0);
        assert_eq!(repeatability(&a, &a, &Mat3::zeros(), 64, 64), Err(MetricError::SingularHomography));
    }

    #[test]
    fn repeatability_is_one_to_one() {
        let i = Mat3::identity();
        let a = [pt(10.0, 10.0), pt(10.5, 10.0)];
        let b = [pt(10.0, 10.0)];
        // two A points compete for one B point; min(|V|, |B|) = 1
        assert_eq!(repeatability(&a, &b, &i, 64, 64).unwrap(), 1.0);
        let b2 = [pt(10.0, 10.0), pt(40.0, 40.0)];
        assert_eq!(repeatability(&a, &b2, &i, 64, 64).unwrap(), 0.5);
    }

    #[test]
    fn ip_spread_examples() {
        let a = [pt(20.0, 20.0), pt(40.0, 30.0)];
        assert_eq!(ip_spread(&a, &a, 64, 64), 1.0);
        assert_eq!(ip_spread(&[pt(20.0, 20.0)], &[pt(45.0, 20.0)], 64, 64), 0.0);
        assert_eq!(ip_spread(&[], &[], 64, 64), 1.0);
        assert_eq!(ip_spread(&a, &[], 64, 64), 0.0);
    }

    #[test]
    fn deviations_in_range() {
        for m in MetricKind::ALL {
            for raw in [-0.5, 0.0, 0.3, 1.0, 2.0] {
                let d = m.deviation(raw);
                assert!((0.0..=1.0).contains(&d));
            }
        }
    }
}

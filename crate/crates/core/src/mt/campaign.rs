use serde::{Deserialize, Serialize};

use super::report::{correlation_table, count_inconsistencies, eps_label, Arm, CampaignReport, IncRecord, QualityRow};
use super::suite::aim_point;
use super::{MtError, DEFAULT_EPSILONS};
use crate::dataset::Dataset;
use crate::field::{render_image, RadianceField, RenderConfig};
use crate::geometry::{apply_transform, plane_homography, Mat3, PoseTransform, TauKind};
use crate::image::ImageBuffer;
use crate::imqual::{psnr, ssim};
use crate::mutate::{mutate, MutationSpec};
use crate::rng::hash_words;
use crate::sutmetrics::{evaluate, MetricKind};
use crate::suts::{run_sut, Sut, SutError, SutOutput};
use crate::synthscene::raytrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    /// Test resolution; every image of the campaign is produced at this size.
    pub width: u32,
    pub height: u32,
    pub render: RenderConfig,
    pub epsilons: Vec<f64>,
    /// Use only the first `max_frames` eval frames.
    pub max_frames: Option<usize>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { width: 480, height: 270, render: RenderConfig::default(), epsilons: DEFAULT_EPSILONS.to_vec(), max_frames: None }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), MtError> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !e.is_finite()) {
            return Err(MtError::InvalidConfig("epsilons must be a non-empty list of finite numbers".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(MtError::InvalidConfig("test resolution must be positive".into()));
        }
        self.render.validate()?;
        Ok(())
    }
}

/// Convert a homography between continuous pixel coordinates (pixel centers
/// at +0.5) into one between integer pixel indices.
pub fn index_homography(h: &Mat3) -> Mat3 {
    let to_cont = Mat3::new(1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 0.0, 0.0, 1.0);
    let to_index = Mat3::new(1.0, 0.0, -0.5, 0.0, 1.0, -0.5, 0.0, 0.0, 1.0);
    let m = to_index * h * to_cont;
    let s = m[(2, 2)];
    if s.abs() > 1e-15 {
        m / s
    } else {
        m
    }
}

/// Homography for repeatability, or the reason it is unavailable.
type HomographyOr = Result<Mat3, String>;

struct Comparison<'a> {
    frame: &'a str,
    sut: &'a Sut,
    arm: Arm,
    case: String,
    a: &'a Result<SutOutput, SutError>,
    b: &'a Result<SutOutput, SutError>,
    h: HomographyOr,
}

fn compare(c: Comparison<'_>, epsilons: &[f64], width: u32, height: u32, out: &mut Vec<IncRecord>) {
    let base = IncRecord {
        frame: c.frame.to_string(),
        sut: c.sut.descriptor.name.clone(),
        arm: c.arm,
        case: c.case.clone(),
        metric: None,
        raw: None,
        deviation: None,
        inc: Default::default(),
        failed: false,
        error: None,
        skipped: None,
    };
    let (a, b) = match (c.a, c.b) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            out.push(IncRecord { failed: true, error: Some(e.to_string()), ..base });
            return;
        }
    };
    for metric in MetricKind::for_task(c.sut.descriptor.task) {
        let h = match (&c.h, metric) {
            (Err(reason), MetricKind::Repeatability) => {
                out.push(IncRecord { metric: Some(metric), skipped: Some(reason.clone()), ..base.clone() });
                continue;
            }
            (Ok(h), _) => *h,
            (Err(_), _) => Mat3::identity(),
        };
        match evaluate(metric, a, b, &h, width, height) {
            Ok(v) => out.push(IncRecord {
                metric: Some(metric),
                raw: Some(v.raw),
                deviation: Some(v.deviation),
                inc: epsilons.iter().map(|e| (eps_label(*e), v.deviation > *e)).collect(),
                ..base.clone()
            }),
            Err(e) => out.push(IncRecord { metric: Some(metric), failed: true, error: Some(e.to_string()), ..base.clone() }),
        }
    }
}

fn quality_row(frame: &str, case: &str, reference: &str, a: &ImageBuffer, b: &ImageBuffer) -> Result<QualityRow, MtError> {
    let p = psnr(a, b)?;
    Ok(QualityRow {
        frame: frame.to_string(),
        case: case.to_string(),
        reference: reference.to_string(),
        psnr: p.is_finite().then_some(p),
        psnr_infinite: p.is_infinite(),
        ssim: Some(ssim(a, b)?),
        lpips: None,
        lpips_available: false,
    })
}

/// Run every SUT over every eval frame under every transform and mutation.
///
/// Transform arm: τ0 compares the SUT on the real image against the rendered
/// one (the reality-to-render shift); τ1–τ6 compare the render at the
/// original pose against the render at the transformed pose. Mutation arm:
/// real image against its mutated copy. SUT failures become failed records.
pub fn run_campaign(
    field: &RadianceField,
    dataset: &Dataset,
    suts: &[Sut],
    suite: &[PoseTransform],
    mutations: &[MutationSpec],
    cfg: &CampaignConfig,
) -> Result<CampaignReport, MtError> {
    cfg.validate()?;
    let sidecar = dataset.sidecar.as_ref().ok_or(MtError::MissingSidecar)?;
    for m in mutations {
        m.validate()?;
    }
    let intr = dataset.intrinsics.scaled_to(cfg.width, cfg.height)?;
    let frames: Vec<(usize, &crate::dataset::Frame)> = dataset
        .frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.eval)
        .take(cfg.max_frames.unwrap_or(usize::MAX))
        .collect();
    if frames.is_empty() {
        return Err(MtError::NoFrames);
    }
    let (w, h) = (cfg.width, cfg.height);
    let mut records = Vec::new();
    let mut quality = Vec::new();
    for (index, frame) in &frames {
        let fid = frame.id.as_str();
        let real = match &sidecar.scene {
            Some(scene) => raytrace(scene, &intr, &frame.pose).quantized(),
            None if (frame.image.width, frame.image.height) == (w, h) => frame.image.clone(),
            None => frame.image.resized(w, h),
        };
        let nerf = render_image(field, &intr, &frame.pose, &cfg.render);
        quality.push(quality_row(fid, TauKind::Tau0.id(), "real", &real, &nerf)?);

        // transformed views; τ0 reuses the render at the original pose
        let aim = aim_point(sidecar, &frame.pose);
        let mut views: Vec<(PoseTransform, Option<ImageBuffer>, HomographyOr)> = Vec::new();
        for tau in suite {
            if tau.kind == TauKind::Tau0 {
                views.push((*tau, None, Ok(Mat3::identity())));
                continue;
            }
            let pose = apply_transform(&frame.pose, tau, &aim)?;
            let img = render_image(field, &intr, &pose, &cfg.render);
            if let Some(scene) = &sidecar.scene {
                let gt = raytrace(scene, &intr, &pose).quantized();
                quality.push(quality_row(fid, tau.kind.id(), "raytrace", &gt, &img)?);
            }
            let hom = match &sidecar.plane {
                Some(plane) => plane_homography(&intr, &frame.pose, &pose, plane)
                    .map(|m| index_homography(&m))
                    .map_err(|e| e.to_string()),
                None => Err("no planar model".to_string()),
            };
            views.push((*tau, Some(img), hom));
        }
        let mutated: Vec<(String, ImageBuffer)> = mutations
            .iter()
            .map(|m| {
                let spec = MutationSpec { seed: hash_words(&[m.seed, *index as u64]), ..*m };
                Ok((m.id(), mutate(&real, &spec)?))
            })
            .collect::<Result<_, MtError>>()?;

        for sut in suts {
            // fixed request order: real, render, transformed views, mutations
            let out_real = run_sut(sut, &real);
            let out_nerf = run_sut(sut, &nerf);
            let out_views: Vec<Option<Result<SutOutput, SutError>>> =
                views.iter().map(|(_, img, _)| img.as_ref().map(|i| run_sut(sut, i))).collect();
            let out_mut: Vec<Result<SutOutput, SutError>> = mutated.iter().map(|(_, i)| run_sut(sut, i)).collect();

            for ((tau, _, hom), out) in views.iter().zip(&out_views) {
                let (a, b) = match out {
                    None => (&out_real, &out_nerf),
                    Some(o) => (&out_nerf, o),
                };
                let c = Comparison { frame: fid, sut, arm: Arm::Transform, case: tau.kind.id().into(), a, b, h: hom.clone() };
                compare(c, &cfg.epsilons, w, h, &mut records);
            }
            for ((id, _), out) in mutated.iter().zip(&out_mut) {
                let c = Comparison {
                    frame: fid,
                    sut,
                    arm: Arm::Mutation,
                    case: id.clone(),
                    a: &out_real,
                    b: out,
                    h: Ok(Mat3::identity()),
                };
                compare(c, &cfg.epsilons, w, h, &mut records);
            }
        }
    }
    let counts = count_inconsistencies(&records, &cfg.epsilons);
    let correlations = correlation_table(&records, &quality).unwrap_or_default();
    let failures = records.iter().filter(|r| r.failed).count();
    Ok(CampaignReport {
        epsilons: cfg.epsilons.clone(),
        frames: frames.iter().map(|(_, f)| f.id.clone()).collect(),
        records,
        counts,
        quality,
        correlations,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transfer, CameraIntrinsics, CameraPose, PlaneModel, Vec3};

    #[test]
    fn index_homography_shifts_by_half_pixel() {
        let intr = CameraIntrinsics::from_fov(64, 36, 60.0).unwrap();
        let a = CameraPose::look_at(Vec3::new(0.0, -1.0, 0.0), Vec3::zeros(), Vec3::z()).unwrap();
        let b = CameraPose::look_at(Vec3::new(0.1, -1.0, 0.0), Vec3::new(0.1, 0.0, 0.0), Vec3::z()).unwrap();
        let plane = PlaneModel { normal: [0.0, -1.0, 0.0], distance: 0.0 };
        let hc = plane_homography(&intr, &a, &b, &plane).unwrap();
        let hi = index_homography(&hc);
        let (xc, yc) = transfer(&hc, 10.5, 7.5).unwrap();
        let (xi, yi) = transfer(&hi, 10.0, 7.0).unwrap();
        assert!((xc - 0.5 - xi).abs() < 1e-9 && (yc - 0.5 - yi).abs() < 1e-9);
    }
}

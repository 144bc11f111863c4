use serde::{Deserialize, Serialize};

use super::MtError;
use crate::dataset::Sidecar;
use crate::geometry::{CameraPose, PoseTransform, TauKind, Vec3};

/// Magnitudes of the seven pose transformations.
///
/// Shifts are fractions of the scene diameter. With `reaim` the transformed
/// camera is turned back to the aim point; without it the compensating turn is
/// a fixed yaw (horizontal shifts) or pitch (vertical shifts) of
/// `small_angle` / `large_angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformSuite {
    pub small_shift: f64,
    pub large_shift: f64,
    pub small_angle: f64,
    pub large_angle: f64,
    pub roll_angle: f64,
    pub reaim: bool,
}

impl Default for TransformSuite {
    fn default() -> Self {
        Self {
            small_shift: 0.05,
            large_shift: 0.15,
            small_angle: 2f64.to_radians(),
            large_angle: 6f64.to_radians(),
            roll_angle: 5f64.to_radians(),
            reaim: true,
        }
    }
}

impl TransformSuite {
    pub fn validate(&self) -> Result<(), MtError> {
        // zero magnitudes are allowed as degenerate cases
        if !(self.small_shift >= 0.0 && self.small_shift <= self.large_shift) {
            return Err(MtError::InvalidSuite("need 0 ≤ small_shift ≤ large_shift".into()));
        }
        if !(self.small_angle >= 0.0 && self.small_angle <= self.large_angle) {
            return Err(MtError::InvalidSuite("need 0 ≤ small_angle ≤ large_angle".into()));
        }
        if !self.roll_angle.is_finite() {
            return Err(MtError::InvalidSuite("roll_angle must be finite".into()));
        }
        Ok(())
    }
}

/// τ0 … τ6 for a scene.
pub fn build_suite(sidecar: Option<&Sidecar>, cfg: &TransformSuite) -> Result<Vec<PoseTransform>, MtError> {
    let sidecar = sidecar.ok_or(MtError::MissingSidecar)?;
    cfg.validate()?;
    let d = sidecar.diameter;
    let shifted = |kind: TauKind, shift: f64, angle: f64, vertical: bool, roll: f64| {
        let mut t = PoseTransform { kind, reaim: cfg.reaim, droll: roll, ..PoseTransform::identity() };
        if vertical {
            t.dy = shift * d;
            if !cfg.reaim {
                t.dpitch = angle;
            }
        } else {
            t.dx = shift * d;
            if !cfg.reaim {
                t.dyaw = -angle;
            }
        }
        t
    };
    let (s, l) = (cfg.small_shift, cfg.large_shift);
    let (sa, la) = (cfg.small_angle, cfg.large_angle);
    Ok(vec![
        PoseTransform::identity(),
        shifted(TauKind::Tau1, s, sa, false, 0.0),
        shifted(TauKind::Tau2, s, sa, true, 0.0),
        shifted(TauKind::Tau3, l, la, false, 0.0),
        shifted(TauKind::Tau4, l, la, true, 0.0),
        shifted(TauKind::Tau5, s, sa, false, cfg.roll_angle),
        shifted(TauKind::Tau6, s, sa, true, cfg.roll_angle),
    ])
}

/// Point the transformed camera re-aims at: where the optical axis meets the
/// scene plane, or the sidecar's look-at point for non-planar scenes.
pub fn aim_point(sidecar: &Sidecar, pose: &CameraPose) -> Vec3 {
    if let Some(plane) = &sidecar.plane {
        if let Some(t) = plane.intersect(&pose.position, &pose.forward()) {
            return pose.position + pose.forward() * t;
        }
    }
    Vec3::from(sidecar.lookat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SplitRule;
    use crate::geometry::{apply_transform, PlaneModel};

    fn sidecar(diameter: f64) -> Sidecar {
        Sidecar {
            plane: Some(PlaneModel { normal: [0.0, -1.0, 0.0], distance: 0.0 }),
            lookat: [0.0; 3],
            diameter,
            split: SplitRule::default(),
            scene: None,
        }
    }

    #[test]
    fn default_suite_shape() {
        let s = build_suite(Some(&sidecar(2.0)), &TransformSuite::default()).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s[0].is_identity());
        assert!((s[3].translation().norm() - 0.3).abs() < 1e-12);
        assert_eq!(s.iter().map(|t| t.kind).collect::<Vec<_>>(), TauKind::ALL);
        assert_eq!(s[5].droll, 5f64.to_radians());
    }

    #[test]
    fn missing_sidecar() {
        assert!(matches!(build_suite(None, &TransformSuite::default()), Err(MtError::MissingSidecar)));
    }

    #[test]
    fn zero_shift_is_a_reaim_no_op() {
        let sc = sidecar(2.0);
        let cfg = TransformSuite { small_shift: 0.0, ..Default::default() };
        let s = build_suite(Some(&sc), &cfg).unwrap();
        let pose = CameraPose::look_at(Vec3::new(0.3, -1.0, 0.1), Vec3::new(0.3, 0.0, 0.1), Vec3::z()).unwrap();
        let moved = apply_transform(&pose, &s[1], &aim_point(&sc, &pose)).unwrap();
        assert!((moved.position - pose.position).norm() < 1e-12);
        assert!((moved.rotation - pose.rotation).norm() < 1e-9);
    }
}

//! Pinhole cameras, rigid poses, pixel rays, pose transformations and
//! plane-induced homographies.
//!
//! Camera convention: camera-space +z is the viewing direction, +x points
//! right and +y points down. Poses are stored world-from-camera. World space
//! is z-up.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Smallest admissible ray parameter, keeps samples off the sensor.
pub const T_NEAR_FLOOR: f64 = 1e-4;

/// World up direction used when building look-at rotations.
pub const WORLD_UP: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("ray does not intersect the bounds")]
    NoIntersection,
    #[error("camera position coincides with the look-at target")]
    DegenerateAim,
    #[error("plane is not in front of the camera")]
    PlaneBehindCamera,
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("pixel ({0}, {1}) outside the image")]
    PixelOutOfImage(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// Centered principal point with the given horizontal field of view.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(GeometryError::InvalidIntrinsics(format!("hfov {hfov_deg} not in (0, 180)")));
        }
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidIntrinsics(m));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive, got ({}, {})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("principal point ({}, {}) outside image", self.cx, self.cy));
        }
        Ok(())
    }

    /// Same camera at a different image size (focal lengths and principal
    /// point scale with the image).
    pub fn scaled_to(&self, width: u32, height: u32) -> Result<Self, GeometryError> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Mat3 {
        Mat3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Project a camera-space point; `None` when it is not in front.
    pub fn project(&self, p_cam: &Vec3) -> Option<(f64, f64)> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some((self.fx * p_cam.x / p_cam.z + self.cx, self.fy * p_cam.y / p_cam.z + self.cy))
    }
}

/// World-from-camera rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub rotation: Mat3,
}

impl CameraPose {
    pub fn new(position: Vec3, rotation: Mat3) -> Result<Self, GeometryError> {
        let pose = Self { position, rotation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self { position: Vec3::zeros(), rotation: Mat3::identity() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let err = (self.rotation.transpose() * self.rotation - Mat3::identity()).abs().max();
        if !(err <= 1e-9) {
            return Err(GeometryError::InvalidPose(format!("rotation not orthonormal (error {err:e})")));
        }
        let det = self.rotation.determinant();
        if !((det - 1.0).abs() <= 1e-9) {
            return Err(GeometryError::InvalidPose(format!("rotation determinant {det}")));
        }
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite position".into()));
        }
        Ok(())
    }

    /// Camera looking from `position` at `target`, with `up_hint` projected
    /// onto the image plane as "up" (camera −y).
    pub fn look_at(position: Vec3, target: Vec3, up_hint: Vec3) -> Result<Self, GeometryError> {
        let to_target = target - position;
        let dist = to_target.norm();
        if !(dist > 1e-9) {
            return Err(GeometryError::DegenerateAim);
        }
        let forward = to_target / dist;
        let mut right = forward.cross(&up_hint);
        if right.norm() < 1e-9 {
            // looking straight along the hint; any perpendicular will do
            let alt = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_columns(&[right, down, forward]);
        Ok(Self { position, rotation: orthonormalize(&rotation) })
    }

    /// Viewing axis in world space.
    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// Camera "up" (−y) in world space.
    pub fn up(&self) -> Vec3 {
        -self.rotation.column(1).into_owned()
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.position)
    }

    /// 4×4 world-from-camera matrix, row-major.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let p = &self.position;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], p.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], p.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], p.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn from_row_major(m: &[f64]) -> Result<Self, GeometryError> {
        if m.len() != 16 {
            return Err(GeometryError::InvalidPose(format!("expected 16 numbers, got {}", m.len())));
        }
        let rotation = Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let position = Vec3::new(m[3], m[7], m[11]);
        Self::new(position, rotation)
    }
}

/// Re-orthonormalize a nearly orthonormal rotation (Gram-Schmidt on columns,
/// third column rebuilt as a cross product so det = +1).
fn orthonormalize(m: &Mat3) -> Mat3 {
    let x = m.column(0).normalize();
    let y = m.column(1) - x * x.dot(&m.column(1));
    let y = y.normalize();
    let z = x.cross(&y);
    Mat3::from_columns(&[x, y, z])
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|a| !(self.max[a] > self.min[a]))
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2])
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.max[0] + self.min[0]),
            0.5 * (self.max[1] + self.min[1]),
            0.5 * (self.max[2] + self.min[2]),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Grow every axis about the center by `frac` of its extent.
    pub fn inflated(&self, frac: f64) -> Self {
        let c = self.center();
        let h = self.extent() * 0.5 * (1.0 + frac);
        Self { min: [c.x - h.x, c.y - h.y, c.z - h.z], max: [c.x + h.x, c.y + h.y, c.z + h.z] }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Slab test; returns the parametric entry/exit along `origin + t·dir`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let inv = 1.0 / dir[a];
            let mut ta = (self.min[a] - origin[a]) * inv;
            let mut tb = (self.max[a] - origin[a]) * inv;
            if ta.is_nan() || tb.is_nan() {
                // ray parallel to the slab and exactly on a face plane
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t1 >= t0).then_some((t0, t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Unit world-space direction through continuous pixel coordinates `(u, v)`.
/// Pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
pub fn pixel_direction(intr: &CameraIntrinsics, pose: &CameraPose, u: f64, v: f64) -> Vec3 {
    let d_cam = Vec3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    (pose.rotation * d_cam).normalize()
}

/// Ray through continuous pixel coordinates, clipped to `bounds`.
pub fn pixel_ray(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    px: (f64, f64),
    bounds: &Aabb,
) -> Result<Ray, GeometryError> {
    let (u, v) = px;
    if !(u >= 0.0 && u <= intr.width as f64 && v >= 0.0 && v <= intr.height as f64) {
        return Err(GeometryError::PixelOutOfImage(u, v));
    }
    let direction = pixel_direction(intr, pose, u, v);
    let (t0, t1) = bounds.intersect(&pose.position, &direction).ok_or(GeometryError::NoIntersection)?;
    let t_near = t0.max(T_NEAR_FLOOR);
    if !(t1 > t_near) {
        return Err(GeometryError::NoIntersection);
    }
    Ok(Ray { origin: pose.position, direction, t_near, t_far: t1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauKind {
    Tau0,
    Tau1,
    Tau2,
    Tau3,
    Tau4,
    Tau5,
    Tau6,
}

impl TauKind {
    pub const ALL: [TauKind; 7] =
        [Self::Tau0, Self::Tau1, Self::Tau2, Self::Tau3, Self::Tau4, Self::Tau5, Self::Tau6];

    pub fn id(&self) -> &'static str {
        match self {
            Self::Tau0 => "tau0",
            Self::Tau1 => "tau1",
            Self::Tau2 => "tau2",
            Self::Tau3 => "tau3",
            Self::Tau4 => "tau4",
            Self::Tau5 => "tau5",
            Self::Tau6 => "tau6",
        }
    }
}

/// Pose change applied in the camera's own frame.
///
/// Translation `(dx, dy, dz)` is along camera x (right), y (down) and z
/// (forward). Angles are intrinsic rotations about camera y (yaw), x (pitch)
/// and z (roll), applied yaw → pitch → roll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseTransform {
    pub kind: TauKind,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub droll: f64,
    pub dpitch: f64,
    pub dyaw: f64,
    pub reaim: bool,
}

impl PoseTransform {
    pub fn identity() -> Self {
        Self { kind: TauKind::Tau0, dx: 0.0, dy: 0.0, dz: 0.0, droll: 0.0, dpitch: 0.0, dyaw: 0.0, reaim: false }
    }

    pub fn is_identity(&self) -> bool {
        !self.reaim
            && [self.dx, self.dy, self.dz, self.droll, self.dpitch, self.dyaw].iter().all(|v| *v == 0.0)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.kind == TauKind::Tau0 && !self.is_identity() {
            return Err(GeometryError::InvalidPose("tau0 must be the identity transform".into()));
        }
        Ok(())
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.dx, self.dy, self.dz)
    }
}

/// Rotation that turns the camera by yaw, then pitch, then roll (intrinsic).
pub fn ypr_rotation(yaw: f64, pitch: f64, roll: f64) -> Mat3 {
    let r_yaw = Rotation3::from_axis_angle(&Vec3::y_axis(), yaw);
    let r_pitch = Rotation3::from_axis_angle(&Vec3::x_axis(), pitch);
    let r_roll = Rotation3::from_axis_angle(&Vec3::z_axis(), roll);
    (r_yaw * r_pitch * r_roll).into_inner()
}

/// Apply a pose transformation.
///
/// The translation happens in the camera's local axes. With `reaim` set the
/// rotation is rebuilt to look at `lookat`, keeping the camera's current up
/// direction as the up hint. The angle deltas are applied last.
pub fn apply_transform(pose: &CameraPose, tau: &PoseTransform, lookat: &Vec3) -> Result<CameraPose, GeometryError> {
    tau.validate()?;
    if tau.is_identity() {
        return Ok(pose.clone());
    }
    let position = pose.position + pose.rotation * tau.translation();
    let mut rotation = pose.rotation;
    if tau.reaim {
        rotation = CameraPose::look_at(position, *lookat, pose.up())?.rotation;
    }
    if tau.dyaw != 0.0 || tau.dpitch != 0.0 || tau.droll != 0.0 {
        rotation = orthonormalize(&(rotation * ypr_rotation(tau.dyaw, tau.dpitch, tau.droll)));
    }
    Ok(CameraPose { position, rotation })
}

/// Plane `normal · p = distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub normal: [f64; 3],
    pub distance: f64,
}

impl PlaneModel {
    pub fn new(normal: Vec3, distance: f64) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(GeometryError::InvalidPlane(format!("normal has length {n}")));
        }
        Ok(Self { normal: [normal.x, normal.y, normal.z], distance })
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::from(self.normal)
    }

    /// Ray parameter of the intersection, if any (t > 0).
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let n = self.normal();
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.distance - n.dot(origin)) / denom;
        (t > 0.0).then_some(t)
    }
}

/// Homography taking homogeneous pixels of view A to view B for points on
/// `plane`, normalized so that `H[(2, 2)] = 1`.
pub fn plane_homography(
    intr: &CameraIntrinsics,
    pose_a: &CameraPose,
    pose_b: &CameraPose,
    plane: &PlaneModel,
) -> Result<Mat3, GeometryError> {
    let n_world = plane.normal();
    // plane in camera A: n_a · X_a = d_a
    let mut n_a = pose_a.rotation.transpose() * n_world;
    let mut d_a = plane.distance - n_world.dot(&pose_a.position);
    if d_a < 0.0 {
        n_a = -n_a;
        d_a = -d_a;
    }
    // the normal now points away from the camera; the plane is in front only
    // if the optical axis is heading towards it
    if !(d_a > 1e-12) || !(n_a.z > 0.0) {
        return Err(GeometryError::PlaneBehindCamera);
    }
    let r_ba = pose_b.rotation.transpose() * pose_a.rotation;
    let t_ba = pose_b.rotation.transpose() * (pose_a.position - pose_b.position);
    let euclidean = r_ba + t_ba * n_a.transpose() / d_a;
    let h = intr.matrix() * euclidean * intr.inverse_matrix();
    let s = h[(2, 2)];
    Ok(if s.abs() > 1e-15 { h / s } else { h })
}

/// Apply a homography to a point.
pub fn transfer(h: &Mat3, x: f64, y: f64) -> Option<(f64, f64)> {
    let p = h * Vec3::new(x, y, 1.0);
    if p.z.abs() < 1e-15 {
        return None;
    }
    Some((p.x / p.z, p.y / p.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 64.0, 36.0, 128, 72).unwrap()
    }

    fn unit_box() -> Aabb {
        Aabb::new([-1.0, -1.0, 4.0], [1.0, 1.0, 6.0])
    }

    #[test]
    fn principal_axis_ray() {
        let ray = pixel_ray(&intr(), &CameraPose::identity(), (64.0, 36.0), &unit_box()).unwrap();
        assert_relative_eq!(ray.direction, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
        assert_relative_eq!(ray.t_near, 4.0, epsilon = 1e-12);
        assert_relative_eq!(ray.t_far, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn forty_five_degree_ray() {
        let b = Aabb::new([-10.0, -10.0, 1.0], [10.0, 10.0, 2.0]);
        assert!(pixel_ray(&intr(), &CameraPose::identity(), (164.0, 36.0), &b).is_err());
        let wide = CameraIntrinsics::new(100.0, 100.0, 64.0, 36.0, 256, 72).unwrap();
        let ray = pixel_ray(&wide, &CameraPose::identity(), (164.0, 36.0), &b).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_relative_eq!(ray.direction, Vec3::new(s, 0.0, s), epsilon = 1e-12);
    }

    #[test]
    fn ray_aimed_away_misses() {
        let pose = CameraPose::look_at(Vec3::zeros(), Vec3::new(0.0, 0.0, -1.0), Vec3::y()).unwrap();
        let r = pixel_ray(&intr(), &pose, (64.0, 36.0), &unit_box());
        assert_eq!(r, Err(GeometryError::NoIntersection));
    }

    #[test]
    fn ray_from_inside_starts_at_floor() {
        let b = Aabb::new([-1.0; 3], [1.0; 3]);
        let ray = pixel_ray(&intr(), &CameraPose::identity(), (64.0, 36.0), &b).unwrap();
        assert_eq!(ray.t_near, T_NEAR_FLOOR);
        assert_relative_eq!(ray.t_far, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 3.9, 3.9, 4, 4).is_ok());
    }

    #[test]
    fn look_at_is_level() {
        let pose = CameraPose::look_at(Vec3::new(0.0, -2.0, 0.0), Vec3::zeros(), Vec3::from(WORLD_UP)).unwrap();
        pose.validate().unwrap();
        assert_relative_eq!(pose.forward(), Vec3::y(), epsilon = 1e-12);
        assert_relative_eq!(pose.up(), Vec3::z(), epsilon = 1e-12);
        // camera x points to world +x when looking along +y with z up
        assert_relative_eq!(pose.rotation.column(0).into_owned(), Vec3::x(), epsilon = 1e-12);
    }

    #[test]
    fn tau0_is_bit_identical() {
        let pose = CameraPose::look_at(Vec3::new(0.3, -2.0, 0.1), Vec3::zeros(), Vec3::z()).unwrap();
        let out = apply_transform(&pose, &PoseTransform::identity(), &Vec3::zeros()).unwrap();
        assert_eq!(out, pose);
    }

    #[test]
    fn tau0_must_be_identity() {
        let tau = PoseTransform { dx: 0.1, ..PoseTransform::identity() };
        assert!(apply_transform(&CameraPose::identity(), &tau, &Vec3::zeros()).is_err());
    }

    #[test]
    fn roll_by_pi_negates_image_axes() {
        let pose = CameraPose::look_at(Vec3::new(0.0, -2.0, 0.0), Vec3::zeros(), Vec3::z()).unwrap();
        let tau = PoseTransform { kind: TauKind::Tau5, droll: PI, ..PoseTransform::identity() };
        let out = apply_transform(&pose, &tau, &Vec3::zeros()).unwrap();
        assert_eq!(out.position, pose.position);
        assert_relative_eq!(out.rotation.column(0).into_owned(), -pose.rotation.column(0).into_owned(), epsilon = 1e-12);
        assert_relative_eq!(out.rotation.column(1).into_owned(), -pose.rotation.column(1).into_owned(), epsilon = 1e-12);
        assert_relative_eq!(out.rotation.column(2).into_owned(), pose.rotation.column(2).into_owned(), epsilon = 1e-12);
    }

    #[test]
    fn reaim_projects_lookat_to_principal_point() {
        let i = intr();
        let center = Vec3::new(0.0, 0.0, 0.0);
        let pose = CameraPose::look_at(Vec3::new(0.2, -1.5, 0.1), Vec3::new(0.2, 0.0, 0.1), Vec3::z()).unwrap();
        let tau = PoseTransform { kind: TauKind::Tau1, dx: 0.1, reaim: true, ..PoseTransform::identity() };
        let out = apply_transform(&pose, &tau, &center).unwrap();
        out.validate().unwrap();
        let (u, v) = i.project(&out.world_to_camera(&center)).unwrap();
        assert!((u - i.cx).abs() < 1e-6 && (v - i.cy).abs() < 1e-6, "({u}, {v})");
        // moved along the old camera x axis
        assert_relative_eq!(out.position, pose.position + pose.rotation.column(0) * 0.1, epsilon = 1e-12);
    }

    #[test]
    fn reaim_onto_own_position_is_degenerate() {
        let pose = CameraPose::identity();
        let tau = PoseTransform { kind: TauKind::Tau1, dx: 1.0, reaim: true, ..PoseTransform::identity() };
        assert_eq!(apply_transform(&pose, &tau, &Vec3::new(1.0, 0.0, 0.0)), Err(GeometryError::DegenerateAim));
    }

    #[test]
    fn translate_there_and_back() {
        let pose = CameraPose::look_at(Vec3::new(0.3, -2.0, 0.1), Vec3::zeros(), Vec3::z()).unwrap();
        let fwd = PoseTransform { kind: TauKind::Tau1, dx: 0.3, dy: -0.2, dz: 0.05, ..PoseTransform::identity() };
        let back = PoseTransform { dx: -0.3, dy: 0.2, dz: -0.05, ..fwd };
        let out = apply_transform(&apply_transform(&pose, &fwd, &Vec3::zeros()).unwrap(), &back, &Vec3::zeros()).unwrap();
        assert_relative_eq!(out.position, pose.position, epsilon = 1e-9);
        assert_relative_eq!(out.rotation, pose.rotation, epsilon = 1e-9);
    }

    #[test]
    fn yaw_turns_towards_camera_x() {
        let r = ypr_rotation(0.1, 0.0, 0.0);
        let z = r * Vec3::z();
        assert!(z.x > 0.0);
        let r = ypr_rotation(0.0, 0.1, 0.0);
        let z = r * Vec3::z();
        assert!(z.y < 0.0);
    }

    #[test]
    fn row_major_round_trip() {
        let pose = CameraPose::look_at(Vec3::new(0.3, -2.0, 0.1), Vec3::zeros(), Vec3::z()).unwrap();
        let back = CameraPose::from_row_major(&pose.to_row_major()).unwrap();
        assert_eq!(back, pose);
    }

    fn wall() -> PlaneModel {
        PlaneModel::new(Vec3::new(0.0, -1.0, 0.0), 0.0).unwrap()
    }

    #[test]
    fn homography_same_pose_is_identity() {
        let pose = CameraPose::look_at(Vec3::new(0.3, -2.0, 0.1), Vec3::new(0.3, 0.0, 0.1), Vec3::z()).unwrap();
        let h = plane_homography(&intr(), &pose, &pose, &wall()).unwrap();
        assert!((h - Mat3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn homography_rejects_plane_behind() {
        let pose = CameraPose::look_at(Vec3::new(0.0, -2.0, 0.0), Vec3::new(0.0, -4.0, 0.0), Vec3::z()).unwrap();
        assert_eq!(plane_homography(&intr(), &pose, &pose, &wall()), Err(GeometryError::PlaneBehindCamera));
    }
}

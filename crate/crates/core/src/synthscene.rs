//! Ground-truth Lambertian raytracer standing in for a real camera, plus the
//! posed-dataset generator built on it.
//!
//! Texture: a lattice of cells of side `texture_scale`; the cell parity
//! `(ix ^ iy ^ iz) & 1` picks one of two palette colors, which is then
//! modulated by smooth value noise. Lattice values come from
//! [`hash_words`](crate::rng::hash_words) (splitmix64), so the texture is a
//! pure function of the seed.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Frame, Sidecar, SplitRule};
use crate::geometry::{
    pixel_direction, Aabb, CameraIntrinsics, CameraPose, GeometryError, PlaneModel, Vec3, WORLD_UP,
};
use crate::image::{ImageBuffer, Provenance};
use crate::rng::{hash_words, unit_f64};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Wall,
    Object,
}

/// A textured rectangle lying in `plane`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallGeometry {
    pub plane: PlaneModel,
    /// Half extent along the horizontal in-plane axis.
    pub half_width: f64,
    /// Half extent along the vertical in-plane axis.
    pub half_height: f64,
    /// Half depth of the scene box around the plane.
    pub half_depth: f64,
}

/// Sphere and box standing on a finite square of ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectGeometry {
    pub sphere_center: [f64; 3],
    pub sphere_radius: f64,
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub ground: PlaneModel,
    pub ground_half_extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneGeometry {
    Wall(WallGeometry),
    Object(ObjectGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub texture_scale: f64,
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub background: [f64; 3],
    pub geometry: SceneGeometry,
}

impl SceneSpec {
    /// Vertical wall in the plane y = 0, seen from negative y.
    pub fn wall_default(seed: u64) -> Self {
        Self {
            seed,
            texture_scale: 0.3,
            light_dir: normalized([0.3, -0.8, 0.5]),
            ambient: 0.35,
            background: [0.05, 0.12, 0.2],
            geometry: SceneGeometry::Wall(WallGeometry {
                plane: PlaneModel { normal: [0.0, -1.0, 0.0], distance: 0.0 },
                half_width: 1.2,
                half_height: 0.7,
                half_depth: 0.05,
            }),
        }
    }

    /// Sphere and box on a ground square in the plane z = 0.
    pub fn object_default(seed: u64) -> Self {
        Self {
            seed,
            texture_scale: 0.25,
            light_dir: normalized([0.4, -0.3, 0.85]),
            ambient: 0.35,
            background: [0.55, 0.65, 0.8],
            geometry: SceneGeometry::Object(ObjectGeometry {
                sphere_center: [-0.2, 0.15, 0.35],
                sphere_radius: 0.35,
                box_min: [0.25, -0.55, 0.0],
                box_max: [0.65, -0.15, 0.4],
                ground: PlaneModel { normal: [0.0, 0.0, 1.0], distance: 0.0 },
                ground_half_extent: 1.0,
            }),
        }
    }

    pub fn kind(&self) -> SceneKind {
        match self.geometry {
            SceneGeometry::Wall(_) => SceneKind::Wall,
            SceneGeometry::Object(_) => SceneKind::Object,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScene(m.to_string()));
        if !(0.0..=1.0).contains(&self.ambient) {
            return bad("ambient must lie in [0, 1]");
        }
        if !(self.texture_scale > 0.0) {
            return bad("texture_scale must be positive");
        }
        if (Vec3::from(self.light_dir).norm() - 1.0).abs() > 1e-6 {
            return bad("light_dir must be a unit vector");
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("background outside [0, 1]");
        }
        match &self.geometry {
            SceneGeometry::Wall(w) => {
                PlaneModel::new(w.plane.normal(), w.plane.distance)?;
                if !(w.half_width > 0.0 && w.half_height > 0.0 && w.half_depth > 0.0) {
                    return bad("wall extents must be positive");
                }
            }
            SceneGeometry::Object(o) => {
                PlaneModel::new(o.ground.normal(), o.ground.distance)?;
                if !(o.sphere_radius > 0.0 && o.ground_half_extent > 0.0) {
                    return bad("sphere radius and ground extent must be positive");
                }
                if Aabb::new(o.box_min, o.box_max).is_degenerate() {
                    return bad("degenerate box");
                }
            }
        }
        Ok(())
    }

    /// The plane the wall lies in, for wall scenes.
    pub fn plane(&self) -> Option<PlaneModel> {
        match &self.geometry {
            SceneGeometry::Wall(w) => Some(w.plane),
            SceneGeometry::Object(_) => None,
        }
    }

    /// Axis-aligned box containing all geometry.
    pub fn scene_box(&self) -> Aabb {
        let mut pts: Vec<Vec3> = Vec::new();
        match &self.geometry {
            SceneGeometry::Wall(w) => {
                let (e1, e2) = plane_axes(&w.plane.normal());
                let c = plane_origin(&w.plane);
                let n = w.plane.normal();
                for s1 in [-1.0, 1.0] {
                    for s2 in [-1.0, 1.0] {
                        for s3 in [-1.0, 1.0] {
                            pts.push(c + e1 * (s1 * w.half_width) + e2 * (s2 * w.half_height) + n * (s3 * w.half_depth));
                        }
                    }
                }
            }
            SceneGeometry::Object(o) => {
                let r = o.sphere_radius;
                let sc = Vec3::from(o.sphere_center);
                pts.push(sc - Vec3::repeat(r));
                pts.push(sc + Vec3::repeat(r));
                pts.push(Vec3::from(o.box_min));
                pts.push(Vec3::from(o.box_max));
                let (e1, e2) = plane_axes(&o.ground.normal());
                let c = plane_origin(&o.ground);
                let n = o.ground.normal();
                let h = o.ground_half_extent;
                for s1 in [-1.0, 1.0] {
                    for s2 in [-1.0, 1.0] {
                        for s3 in [-1.0, 1.0] {
                            // thin slab around the ground
                            pts.push(c + e1 * (s1 * h) + e2 * (s2 * h) + n * (s3 * 0.02));
                        }
                    }
                }
            }
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        Aabb::new(min, max)
    }

    /// Albedo at a texture-space point.
    pub fn albedo(&self, q: &Vec3) -> [f64; 3] {
        let s = q / self.texture_scale;
        let cell = [s.x.floor() as i64, s.y.floor() as i64, s.z.floor() as i64];
        let checker = (cell[0] ^ cell[1] ^ cell[2]) & 1 == 1;
        let noise = value_noise(self.seed, &(s * 2.0));
        let (light, dark) = palette(self.seed);
        let base = if checker { light } else { dark };
        let m = 0.75 + 0.25 * noise;
        [base[0] * m, base[1] * m, base[2] * m]
    }
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = Vec3::from(v).normalize();
    [n.x, n.y, n.z]
}

/// Orthonormal in-plane axes: horizontal first, then "up".
pub fn plane_axes(normal: &Vec3) -> (Vec3, Vec3) {
    let up = Vec3::from(WORLD_UP);
    let mut e1 = up.cross(normal);
    if e1.norm() < 1e-9 {
        e1 = Vec3::x().cross(normal);
    }
    let e1 = e1.normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

/// Point of the plane closest to the world origin.
pub fn plane_origin(plane: &PlaneModel) -> Vec3 {
    plane.normal() * plane.distance
}

/// Two palette colors derived from the seed; the dark one is a scaled copy of
/// the light one.
pub fn palette(seed: u64) -> ([f64; 3], [f64; 3]) {
    let light: [f64; 3] = std::array::from_fn(|c| 0.35 + 0.6 * unit_f64(hash_words(&[seed, 0xC0105, c as u64])));
    let dark = light.map(|v| 0.45 * v);
    (light, dark)
}

fn lattice(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    unit_f64(hash_words(&[seed, x as u64, y as u64, z as u64]))
}

/// Trilinear value noise with smoothstep fade, in [0, 1].
pub fn value_noise(seed: u64, p: &Vec3) -> f64 {
    let b = [p.x.floor(), p.y.floor(), p.z.floor()];
    let f = [p.x - b[0], p.y - b[1], p.z - b[2]].map(|t| t * t * (3.0 - 2.0 * t));
    let (x0, y0, z0) = (b[0] as i64, b[1] as i64, b[2] as i64);
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 1 { f[0] } else { 1.0 - f[0] })
                    * (if dy == 1 { f[1] } else { 1.0 - f[1] })
                    * (if dz == 1 { f[2] } else { 1.0 - f[2] });
                acc += w * lattice(seed, x0 + dx, y0 + dy, z0 + dz);
            }
        }
    }
    acc
}

struct Hit {
    t: f64,
    normal: Vec3,
    /// Coordinates handed to the texture.
    tex: Vec3,
}

/// Texture coordinates on a plane: in-plane axes, zero along the normal, so
/// the lattice never straddles the surface.
fn planar_tex(plane: &PlaneModel, p: &Vec3) -> Vec3 {
    let (e1, e2) = plane_axes(&plane.normal());
    let d = p - plane_origin(plane);
    Vec3::new(d.dot(&e1), d.dot(&e2), 0.0)
}

const SOLID_OFFSET: f64 = 0.137;

fn hit_rect(plane: &PlaneModel, half_w: f64, half_h: f64, o: &Vec3, d: &Vec3) -> Option<Hit> {
    let t = plane.intersect(o, d)?;
    let p = o + d * t;
    let (e1, e2) = plane_axes(&plane.normal());
    let rel = p - plane_origin(plane);
    if rel.dot(&e1).abs() > half_w || rel.dot(&e2).abs() > half_h {
        return None;
    }
    Some(Hit { t, normal: plane.normal(), tex: planar_tex(plane, &p) })
}

fn hit_sphere(center: &Vec3, r: f64, o: &Vec3, d: &Vec3) -> Option<Hit> {
    let oc = o - center;
    let b = oc.dot(d);
    let c = oc.norm_squared() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if -b - sq > 1e-9 { -b - sq } else if -b + sq > 1e-9 { -b + sq } else { return None };
    let p = o + d * t;
    Some(Hit { t, normal: (p - center) / r, tex: p.add_scalar(SOLID_OFFSET) })
}

fn hit_box(b: &Aabb, o: &Vec3, d: &Vec3) -> Option<Hit> {
    let (t0, t1) = b.intersect(o, d)?;
    let t = if t0 > 1e-9 { t0 } else if t1 > 1e-9 { t1 } else { return None };
    let p = o + d * t;
    // face whose plane the hit point lies on
    let mut best = (f64::INFINITY, Vec3::zeros());
    for a in 0..3 {
        for (v, s) in [(b.min[a], -1.0), (b.max[a], 1.0)] {
            let dist = (p[a] - v).abs();
            if dist < best.0 {
                let mut n = Vec3::zeros();
                n[a] = s;
                best = (dist, n);
            }
        }
    }
    Some(Hit { t, normal: best.1, tex: p.add_scalar(SOLID_OFFSET) })
}

fn nearest(hits: impl IntoIterator<Item = Option<Hit>>) -> Option<Hit> {
    hits.into_iter().flatten().min_by(|a, b| a.t.total_cmp(&b.t))
}

impl SceneSpec {
    fn trace(&self, o: &Vec3, d: &Vec3) -> Option<Hit> {
        match &self.geometry {
            SceneGeometry::Wall(w) => hit_rect(&w.plane, w.half_width, w.half_height, o, d),
            SceneGeometry::Object(g) => nearest([
                hit_sphere(&Vec3::from(g.sphere_center), g.sphere_radius, o, d),
                hit_box(&Aabb::new(g.box_min, g.box_max), o, d),
                hit_rect(&g.ground, g.ground_half_extent, g.ground_half_extent, o, d),
            ]),
        }
    }

    /// Shaded color seen along a ray, or the background.
    pub fn shade(&self, o: &Vec3, d: &Vec3) -> [f64; 3] {
        let Some(hit) = self.trace(o, d) else {
            return self.background;
        };
        let mut n = hit.normal;
        if n.dot(d) > 0.0 {
            n = -n;
        }
        let lambert = n.dot(&Vec3::from(self.light_dir)).max(0.0);
        let k = self.ambient + (1.0 - self.ambient) * lambert;
        self.albedo(&hit.tex).map(|a| (a * k).clamp(0.0, 1.0))
    }
}

/// Render the scene from a pose (pixel centers, no anti-aliasing).
pub fn raytrace(spec: &SceneSpec, intr: &CameraIntrinsics, pose: &CameraPose) -> ImageBuffer {
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut pixels = vec![0f32; w * h * 3];
    pixels.par_chunks_mut(3 * w).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let d = pixel_direction(intr, pose, x as f64 + 0.5, y as f64 + 0.5);
            let c = spec.shade(&pose.position, &d);
            for ch in 0..3 {
                row[3 * x + ch] = c[ch] as f32;
            }
        }
    });
    ImageBuffer { width: intr.width, height: intr.height, pixels, provenance: Provenance::Real }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    WallScan,
    Orbit,
}

/// Camera path.
///
/// `wall_scan`: cameras face the wall squarely from `standoff` in front of
/// `lookat`, sweeping `±amplitude` horizontally while weaving vertically
/// around `height` with `0.6 · amplitude` swing. `orbit`: a circle of radius
/// `amplitude` at `height` above `lookat`, every camera aimed at `lookat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub n_frames: usize,
    pub amplitude: f64,
    pub height: f64,
    #[serde(default)]
    pub standoff: f64,
    pub lookat: [f64; 3],
}

impl TrajectorySpec {
    pub fn wall_scan_default() -> Self {
        Self { kind: TrajectoryKind::WallScan, n_frames: 300, amplitude: 0.6, height: 0.0, standoff: 1.0, lookat: [0.0; 3] }
    }

    pub fn orbit_default() -> Self {
        Self { kind: TrajectoryKind::Orbit, n_frames: 300, amplitude: 2.2, height: 1.1, standoff: 0.0, lookat: [0.0, 0.0, 0.25] }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_frames < 2 {
            return Err(SynthError::InvalidTrajectory(format!("n_frames must be at least 2, got {}", self.n_frames)));
        }
        if self.kind == TrajectoryKind::WallScan && !(self.standoff > 0.0) {
            return Err(SynthError::InvalidTrajectory("wall_scan needs a positive standoff".into()));
        }
        if self.kind == TrajectoryKind::Orbit && !(self.amplitude > 0.0) {
            return Err(SynthError::InvalidTrajectory("orbit needs a positive radius".into()));
        }
        Ok(())
    }

    /// Poses along the path. Wall scans need the wall plane.
    pub fn poses(&self, plane: Option<&PlaneModel>) -> Result<Vec<CameraPose>, SynthError> {
        self.validate()?;
        let lookat = Vec3::from(self.lookat);
        let n = self.n_frames;
        (0..n)
            .map(|i| match self.kind {
                TrajectoryKind::WallScan => {
                    let plane = plane
                        .ok_or_else(|| SynthError::InvalidTrajectory("wall_scan requires a wall scene".into()))?;
                    let normal = plane.normal();
                    let (e1, e2) = plane_axes(&normal);
                    let s = i as f64 / (n - 1) as f64;
                    let across = self.amplitude * (2.0 * s - 1.0);
                    let up = self.height + 0.6 * self.amplitude * (6.0 * std::f64::consts::PI * s).sin();
                    let pos = lookat + normal * self.standoff + e1 * across + e2 * up;
                    Ok(CameraPose::look_at(pos, pos - normal, e2)?)
                }
                TrajectoryKind::Orbit => {
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let pos = lookat + Vec3::new(self.amplitude * phi.cos(), self.amplitude * phi.sin(), self.height);
                    Ok(CameraPose::look_at(pos, lookat, Vec3::from(WORLD_UP))?)
                }
            })
            .collect()
    }
}

/// Render every frame of the trajectory and write the posed dataset
/// (images, pose file and scene sidecar) to `dir`.
pub fn generate_dataset(
    spec: &SceneSpec,
    traj: &TrajectorySpec,
    intr: &CameraIntrinsics,
    dir: &Path,
) -> Result<Dataset, SynthError> {
    let dataset = build_dataset(spec, traj, intr)?;
    dataset.write(dir)?;
    Ok(dataset)
}

/// In-memory version of [`generate_dataset`]; images are quantized to 8 bit
/// exactly as they would be on disk.
pub fn build_dataset(spec: &SceneSpec, traj: &TrajectorySpec, intr: &CameraIntrinsics) -> Result<Dataset, SynthError> {
    spec.validate()?;
    intr.validate()?;
    let plane = spec.plane();
    let poses = traj.poses(plane.as_ref())?;
    let split = SplitRule::default();
    let frames = poses
        .into_iter()
        .enumerate()
        .map(|(i, pose)| {
            let image = raytrace(spec, intr, &pose).quantized();
            let id = format!("frame_{i:04}");
            Frame { image_path: format!("{id}.ppm"), id, pose, image, eval: split.is_eval(i) }
        })
        .collect();
    let sidecar = Sidecar { plane, lookat: traj.lookat, diameter: spec.scene_box().diagonal(), split, scene: Some(*spec) };
    Ok(Dataset { intrinsics: *intr, frames, sidecar: Some(sidecar) })
}

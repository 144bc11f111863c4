//! Posed image datasets on disk:
//!
//! ```text
//! <dir>/poses.json      {"intrinsics": {..}, "frames": [{"id", "world_from_camera", "image"}]}
//! <dir>/scene.json      {"plane", "lookat", "diameter", "split": {"eval_every"}}   (optional)
//! <dir>/frame_0000.ppm  ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::TrainView;
use crate::geometry::{CameraIntrinsics, CameraPose, GeometryError, PlaneModel};
use crate::image::{ImageBuffer, ImageError, Provenance};
use crate::synthscene::SceneSpec;

pub const POSE_FILE: &str = "poses.json";
pub const SIDECAR_FILE: &str = "scene.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("frame {frame}: {source}")]
    Pose { frame: String, source: GeometryError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("dataset has no scene sidecar ({SIDECAR_FILE})")]
    MissingSidecar,
}

/// Every `eval_every`-th frame, starting at frame 1, is held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRule {
    pub eval_every: usize,
}

impl Default for SplitRule {
    fn default() -> Self {
        Self { eval_every: 10 }
    }
}

impl SplitRule {
    pub fn is_eval(&self, index: usize) -> bool {
        self.eval_every > 0 && index % self.eval_every == 1 % self.eval_every
    }
}

/// Scene metadata needed for homographies and re-aiming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub plane: Option<PlaneModel>,
    pub lookat: [f64; 3],
    pub diameter: f64,
    #[serde(default)]
    pub split: SplitRule,
    /// Generator description, when the dataset is synthetic; lets consumers
    /// re-raytrace ground truth at other resolutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub pose: CameraPose,
    /// Path relative to the dataset directory.
    pub image_path: String,
    pub image: ImageBuffer,
    pub eval: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<Frame>,
    pub sidecar: Option<Sidecar>,
}

#[derive(Serialize, Deserialize)]
struct PoseFile {
    intrinsics: CameraIntrinsics,
    frames: Vec<PoseEntry>,
}

#[derive(Serialize, Deserialize)]
struct PoseEntry {
    id: String,
    world_from_camera: Vec<f64>,
    image: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| DatasetError::Json { path: path.display().to_string(), source })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json { path: path.display().to_string(), source })
}

impl Dataset {
    pub fn split(&self) -> SplitRule {
        self.sidecar.as_ref().map(|s| s.split).unwrap_or_default()
    }

    pub fn sidecar(&self) -> Result<&Sidecar, DatasetError> {
        self.sidecar.as_ref().ok_or(DatasetError::MissingSidecar)
    }

    pub fn train_frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter().filter(|f| !f.eval)
    }

    pub fn eval_frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter().filter(|f| f.eval)
    }

    pub fn train_views(&self) -> Vec<TrainView> {
        self.train_frames()
            .map(|f| TrainView { intr: self.intrinsics, pose: f.pose.clone(), image: f.image.clone() })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for f in &self.frames {
            f.image.write_ppm(&dir.join(&f.image_path))?;
        }
        let poses = PoseFile {
            intrinsics: self.intrinsics,
            frames: self
                .frames
                .iter()
                .map(|f| PoseEntry {
                    id: f.id.clone(),
                    world_from_camera: f.pose.to_row_major().to_vec(),
                    image: f.image_path.clone(),
                })
                .collect(),
        };
        write_json(&dir.join(POSE_FILE), &poses)?;
        if let Some(sc) = &self.sidecar {
            write_json(&dir.join(SIDECAR_FILE), sc)?;
        }
        Ok(())
    }

    /// Load `dir/poses.json`, its images, and the sidecar if present.
    pub fn read(dir: &Path) -> Result<Self, DatasetError> {
        Self::read_pose_file(&dir.join(POSE_FILE))
    }

    /// Import a pose file; image paths resolve relative to its directory and
    /// the sidecar is looked up next to it.
    pub fn read_pose_file(path: &Path) -> Result<Self, DatasetError> {
        let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let pf: PoseFile = read_json(path)?;
        pf.intrinsics.validate()?;
        let sidecar_path = base.join(SIDECAR_FILE);
        let sidecar: Option<Sidecar> = if sidecar_path.exists() { Some(read_json(&sidecar_path)?) } else { None };
        if let Some(sc) = &sidecar {
            if !(sc.diameter > 0.0) {
                return Err(DatasetError::Invalid(format!("sidecar diameter must be positive, got {}", sc.diameter)));
            }
        }
        let split = sidecar.as_ref().map(|s| s.split).unwrap_or_default();
        let mut frames = Vec::with_capacity(pf.frames.len());
        for (i, e) in pf.frames.into_iter().enumerate() {
            let pose = CameraPose::from_row_major(&e.world_from_camera)
                .map_err(|source| DatasetError::Pose { frame: e.id.clone(), source })?;
            let image = ImageBuffer::read_ppm(&base.join(&e.image), Provenance::Real)?;
            if (image.width, image.height) != (pf.intrinsics.width, pf.intrinsics.height) {
                return Err(DatasetError::Invalid(format!(
                    "frame {}: image is {}x{}, intrinsics say {}x{}",
                    e.id, image.width, image.height, pf.intrinsics.width, pf.intrinsics.height
                )));
            }
            frames.push(Frame { id: e.id, pose, image_path: e.image, image, eval: split.is_eval(i) });
        }
        Ok(Self { intrinsics: pf.intrinsics, frames, sidecar })
    }
}

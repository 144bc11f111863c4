//! The single JSON configuration document and its `--key.path=value`
//! overrides.
//!
//! Loading order: the file (if any), then overrides, are merged onto the
//! defaults of the selected scene preset (`"scene": "wall" | "object"`).
//! Per-stage seeds are derived from the global `seed`; any seed fields set
//! inside sub-sections are replaced when the config is resolved.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::field::{FieldInit, RenderConfig, TrainConfig};
use crate::geometry::CameraIntrinsics;
use crate::mt::{TransformSuite, DEFAULT_EPSILONS};
use crate::mutate::MutationSpec;
use crate::rng::stage_seed;
use crate::suts::{SutTask, DEFAULT_MAX_POINTS};
use crate::synthscene::{SceneKind, SceneSpec, TrajectorySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub width: u32,
    pub height: u32,
    pub hfov_deg: f64,
}

impl IntrinsicsConfig {
    pub fn build(&self) -> Result<CameraIntrinsics, crate::geometry::GeometryError> {
        CameraIntrinsics::from_fov(self.width, self.height, self.hfov_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SutKind {
    Harris,
    Hist,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SutConfig {
    pub name: String,
    pub kind: SutKind,
    /// Required for external SUTs; implied by the reference kinds.
    #[serde(default)]
    pub task: Option<SutTask>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS
}
fn default_timeout_s() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub width: u32,
    pub height: u32,
    pub max_frames: Option<usize>,
    /// Exit with status 3 when more records than this fail.
    pub failure_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub resolutions: Vec<[u32; 2]>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub scene: SceneKind,
    pub scene_spec: SceneSpec,
    pub trajectory: TrajectorySpec,
    pub intrinsics: IntrinsicsConfig,
    pub field: FieldInit,
    pub train: TrainConfig,
    pub render: RenderConfig,
    pub suite: TransformSuite,
    pub mutations: Vec<MutationSpec>,
    pub epsilons: Vec<f64>,
    pub suts: Vec<SutConfig>,
    pub test: TestConfig,
    pub bench: BenchConfig,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/dataset`.
    pub dataset_dir: Option<PathBuf>,
}

impl Config {
    /// Defaults for a scene preset.
    pub fn preset(kind: SceneKind, seed: u64) -> Self {
        let scene_seed = stage_seed(seed, "scene");
        let (scene_spec, trajectory) = match kind {
            SceneKind::Wall => (SceneSpec::wall_default(scene_seed), TrajectorySpec::wall_scan_default()),
            SceneKind::Object => (SceneSpec::object_default(scene_seed), TrajectorySpec::orbit_default()),
        };
        Self {
            seed,
            scene: kind,
            scene_spec,
            trajectory,
            intrinsics: IntrinsicsConfig { width: 128, height: 72, hfov_deg: 60.0 },
            field: FieldInit::default(),
            train: TrainConfig::default(),
            render: RenderConfig::default(),
            suite: TransformSuite::default(),
            mutations: MutationSpec::defaults(0),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            suts: vec![
                SutConfig {
                    name: "harris".into(),
                    kind: SutKind::Harris,
                    task: None,
                    max_points: DEFAULT_MAX_POINTS,
                    command: vec![],
                    timeout_s: default_timeout_s(),
                },
                SutConfig {
                    name: "hist".into(),
                    kind: SutKind::Hist,
                    task: None,
                    max_points: DEFAULT_MAX_POINTS,
                    command: vec![],
                    timeout_s: default_timeout_s(),
                },
            ],
            test: TestConfig { width: 480, height: 270, max_frames: None, failure_budget: None },
            bench: BenchConfig { resolutions: vec![[480, 270], [960, 540], [1920, 1080]], frames: 10 },
            out_dir: PathBuf::from("out"),
            dataset_dir: None,
        }
    }

    /// Load from an optional file plus overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut user = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        Self::from_value(user)
    }

    pub fn from_value(user: Value) -> anyhow::Result<Self> {
        let kind: SceneKind = match user.get("scene") {
            Some(v) => serde_json::from_value(v.clone()).context("scene must be \"wall\" or \"object\"")?,
            None => SceneKind::Wall,
        };
        let seed = match user.get("seed") {
            Some(v) => v.as_u64().context("seed must be a non-negative integer")?,
            None => 0,
        };
        let mut merged = serde_json::to_value(Self::preset(kind, seed))?;
        merge(&mut merged, user);
        let mut cfg: Config = serde_json::from_value(merged).context("invalid configuration")?;
        cfg.resolve_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_seeds(&mut self) {
        self.train.seed = stage_seed(self.seed, "fit");
        self.render.seed = stage_seed(self.seed, "render");
        for (i, m) in self.mutations.iter_mut().enumerate() {
            m.seed = stage_seed(self.seed, &format!("mutate{i}"));
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.scene_spec.kind() != self.scene {
            bail!("scene_spec geometry does not match scene {:?}", self.scene);
        }
        if self.epsilons.is_empty() {
            bail!("epsilons must not be empty");
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            bail!("epsilons must lie in (0, 1) and be strictly increasing");
        }
        if !(self.field.initial_opacity > 0.0 && self.field.initial_opacity < 1.0) {
            bail!("field.initial_opacity must lie in (0, 1)");
        }
        if self.bench.frames == 0 {
            bail!("bench.frames must be at least 1");
        }
        Ok(())
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.dataset_dir.clone().unwrap_or_else(|| self.out_dir.join("dataset"))
    }
}

/// Recursively merge `patch` into `base`; objects merge, everything else
/// replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Apply `key.path=value` (a leading `--` is ignored). The value is parsed as
/// JSON when possible and taken as a string otherwise. Numeric path segments
/// index into arrays.
pub fn apply_override(doc: &mut Value, arg: &str) -> anyhow::Result<()> {
    let arg = arg.trim_start_matches("--");
    let Some((key, raw)) = arg.split_once('=') else {
        bail!("override {arg:?} is not of the form key=value");
    };
    if key.is_empty() {
        bail!("override {arg:?} has an empty key");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    set_path(doc, &parts, value).with_context(|| format!("override {key}"))
}

fn set_path(cur: &mut Value, parts: &[&str], value: Value) -> anyhow::Result<()> {
    let Some((part, rest)) = parts.split_first() else {
        *cur = value;
        return Ok(());
    };
    if let Value::Array(items) = cur {
        if let Ok(idx) = part.parse::<usize>() {
            let Some(item) = items.get_mut(idx) else { bail!("index {idx} out of range") };
            return set_path(item, rest, value);
        }
    }
    if !cur.is_object() {
        *cur = Value::Object(Map::new());
    }
    let slot = cur
        .as_object_mut()
        .expect("object")
        .entry(part.to_string())
        .or_insert_with(|| Value::Object(Map::new()));
    set_path(slot, rest, value)
}

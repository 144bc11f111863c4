//! Command implementations behind the `nerfmt` binary.
//!
//! Output layout under `out_dir`: `dataset/`, `fit/` (checkpoint, loss
//! history, metrics), `render/`, `transform/`, `mutate/`, `test/` (campaign
//! report), `analyze/` and `bench/`. Every output directory receives the
//! resolved `config.json`.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{apply_override, BenchConfig, Config, IntrinsicsConfig, SutConfig, SutKind, TestConfig};

use crate::dataset::Dataset;
use crate::field::{read_checkpoint, render_image, write_checkpoint, RadianceField, Trainer};
use crate::geometry::{apply_transform, Aabb, CameraIntrinsics};
use crate::image::ImageBuffer;
use crate::imqual::{psnr, ssim};
use crate::mt::{
    aim_point, build_suite, correlation_table, run_campaign, summary_table, write_report, CampaignConfig,
    CampaignReport, CorrelationEntry,
};
use crate::mutate::mutate;
use crate::suts::{train_hist_classifier, ExternalSut, Sut, SutBackend, SutDescriptor, SutTask};
use crate::synthscene::{generate_dataset, raytrace, SceneSpec};

pub const CHECKPOINT_FILE: &str = "field.n2rf";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Data(#[from] anyhow::Error),
    #[error("{failures} failed SUT records exceed the failure budget of {budget}")]
    SutBudget { failures: usize, budget: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::SutBudget { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn data<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Data(e.into())
}

impl Config {
    pub fn fit_dir(&self) -> PathBuf {
        self.out_dir.join("fit")
    }
    pub fn checkpoint_path(&self) -> PathBuf {
        self.fit_dir().join(CHECKPOINT_FILE)
    }
    pub fn test_dir(&self) -> PathBuf {
        self.out_dir.join("test")
    }

    fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            width: self.test.width,
            height: self.test.height,
            render: self.render,
            epsilons: self.epsilons.clone(),
            max_frames: self.test.max_frames,
        }
    }
}

fn prepare_dir(cfg: &Config, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(CONFIG_FILE);
    let text = serde_json::to_string_pretty(cfg)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_dataset(cfg: &Config) -> anyhow::Result<Dataset> {
    let dir = cfg.dataset_dir();
    Dataset::read(&dir).with_context(|| format!("cannot load dataset from {}", dir.display()))
}

fn load_field(cfg: &Config) -> anyhow::Result<RadianceField> {
    let path = cfg.checkpoint_path();
    read_checkpoint(&path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

/// Bounding box to fit: the generator's scene box when known, otherwise a
/// cube of the sidecar diameter around the look-at point.
fn scene_box(dataset: &Dataset) -> anyhow::Result<Aabb> {
    let sc = dataset.sidecar()?;
    if let Some(scene) = &sc.scene {
        return Ok(scene.scene_box());
    }
    let r = 0.5 * sc.diameter;
    let c = sc.lookat;
    Ok(Aabb::new([c[0] - r, c[1] - r, c[2] - r], [c[0] + r, c[1] + r, c[2] + r]))
}

/// The "real" image of a frame at the test resolution: a fresh raytrace when
/// the generator is known, else the dataset image resampled.
fn real_image(dataset: &Dataset, frame: usize, intr: &CameraIntrinsics) -> ImageBuffer {
    let f = &dataset.frames[frame];
    match dataset.sidecar.as_ref().and_then(|s| s.scene.as_ref()) {
        Some(scene) => raytrace(scene, intr, &f.pose).quantized(),
        None if (f.image.width, f.image.height) == (intr.width, intr.height) => f.image.clone(),
        None => f.image.resized(intr.width, intr.height),
    }
}

fn pick_frame(dataset: &Dataset, id: Option<&str>) -> anyhow::Result<usize> {
    match id {
        Some(id) => dataset.frames.iter().position(|f| f.id == id).with_context(|| format!("no frame {id:?}")),
        None => dataset.frames.iter().position(|f| f.eval).context("dataset has no eval frames"),
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub train: usize,
    pub eval: usize,
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>13}  {:>13}  {:>12}", "#total images", "#train images", "#eval images")?;
        write!(f, "{:>13}  {:>13}  {:>12}", self.total, self.train, self.eval)
    }
}

pub fn cmd_synth(cfg: &Config) -> CliResult<DatasetSummary> {
    let intr = cfg.intrinsics.build().map_err(data)?;
    let dir = cfg.dataset_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let ds = generate_dataset(&cfg.scene_spec, &cfg.trajectory, &intr, &dir)
        .with_context(|| format!("cannot write dataset to {}", dir.display()))?;
    prepare_dir(cfg, &dir)?;
    Ok(DatasetSummary { total: ds.frames.len(), train: ds.train_frames().count(), eval: ds.eval_frames().count() })
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub steps: usize,
    pub train_frames: usize,
    pub eval_frames: usize,
    pub wall_time_s: f64,
    pub init_psnr: f64,
    pub init_ssim: f64,
    pub heldout_psnr: f64,
    pub heldout_ssim: f64,
    pub final_loss: Option<f64>,
}

/// Mean PSNR / SSIM of the field over the eval frames at dataset resolution.
pub fn heldout_quality(field: &RadianceField, dataset: &Dataset, cfg: &Config) -> anyhow::Result<(f64, f64)> {
    let frames: Vec<_> = dataset.eval_frames().collect();
    if frames.is_empty() {
        bail!("dataset has no eval frames");
    }
    let (mut p, mut s) = (0.0, 0.0);
    for f in &frames {
        let img = render_image(field, &dataset.intrinsics, &f.pose, &cfg.render);
        p += psnr(&f.image, &img)?;
        s += ssim(&f.image, &img)?;
    }
    Ok((p / frames.len() as f64, s / frames.len() as f64))
}

/// Fit a field to the training frames; `progress` is called every 100 steps
/// with (step, loss).
pub fn cmd_fit(cfg: &Config, mut progress: impl FnMut(usize, f64)) -> CliResult<FitMetrics> {
    let dataset = load_dataset(cfg)?;
    let views = dataset.train_views();
    if views.is_empty() {
        return Err(data(anyhow::anyhow!("dataset has no training frames")));
    }
    let field = RadianceField::from_init(&cfg.field, &scene_box(&dataset)?).map_err(data)?;
    let (init_psnr, init_ssim) = heldout_quality(&field, &dataset, cfg)?;

    let start = Instant::now();
    let mut trainer = Trainer::new(field, &views, cfg.train, cfg.render).map_err(data)?;
    for i in 0..cfg.train.steps {
        let loss = trainer.step();
        if (i + 1) % 100 == 0 {
            progress(i + 1, loss);
        }
    }
    let result = trainer.finish();
    let wall_time_s = start.elapsed().as_secs_f64();
    let (heldout_psnr, heldout_ssim) = heldout_quality(&result.field, &dataset, cfg)?;

    let dir = cfg.fit_dir();
    prepare_dir(cfg, &dir)?;
    write_checkpoint(&result.field, &dir.join(CHECKPOINT_FILE)).map_err(data)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in result.loss_history.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    std::fs::write(dir.join("loss.csv"), csv).context("cannot write loss.csv")?;
    let metrics = FitMetrics {
        steps: cfg.train.steps,
        train_frames: views.len(),
        eval_frames: dataset.eval_frames().count(),
        wall_time_s,
        init_psnr,
        init_ssim,
        heldout_psnr,
        heldout_ssim,
        final_loss: result.loss_history.last().copied(),
    };
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics).map_err(data)? + "\n")
        .context("cannot write metrics.json")?;
    Ok(metrics)
}

// ---------------------------------------------------------------- render / transform / mutate

/// Render eval frames (or one frame) at the test resolution into `render/`.
pub fn cmd_render(cfg: &Config, frame: Option<&str>) -> CliResult<Vec<PathBuf>> {
    let dataset = load_dataset(cfg)?;
    let field = load_field(cfg)?;
    let intr = dataset.intrinsics.scaled_to(cfg.test.width, cfg.test.height).map_err(data)?;
    let indices: Vec<usize> = match frame {
        Some(id) => vec![pick_frame(&dataset, Some(id))?],
        None => (0..dataset.frames.len()).filter(|&i| dataset.frames[i].eval).collect(),
    };
    let dir = cfg.out_dir.join("render");
    prepare_dir(cfg, &dir)?;
    let mut out = Vec::new();
    for i in indices {
        let f = &dataset.frames[i];
        let path = dir.join(format!("{}.ppm", f.id));
        render_image(&field, &intr, &f.pose, &cfg.render).write_ppm(&path).map_err(data)?;
        out.push(path);
    }
    Ok(out)
}

/// Render one frame under every transform of the suite into `transform/`.
pub fn cmd_transform(cfg: &Config, frame: Option<&str>) -> CliResult<Vec<PathBuf>> {
    let dataset = load_dataset(cfg)?;
    let field = load_field(cfg)?;
    let sidecar = dataset.sidecar().map_err(data)?;
    let suite = build_suite(Some(sidecar), &cfg.suite).map_err(data)?;
    let intr = dataset.intrinsics.scaled_to(cfg.test.width, cfg.test.height).map_err(data)?;
    let f = &dataset.frames[pick_frame(&dataset, frame)?];
    let aim = aim_point(sidecar, &f.pose);
    let dir = cfg.out_dir.join("transform");
    prepare_dir(cfg, &dir)?;
    let mut out = Vec::new();
    for tau in &suite {
        let pose = apply_transform(&f.pose, tau, &aim).map_err(data)?;
        let path = dir.join(format!("{}_{}.ppm", f.id, tau.kind.id()));
        render_image(&field, &intr, &pose, &cfg.render).write_ppm(&path).map_err(data)?;
        out.push(path);
    }
    Ok(out)
}

/// Apply every configured mutation to one real frame into `mutate/`.
pub fn cmd_mutate(cfg: &Config, frame: Option<&str>) -> CliResult<Vec<PathBuf>> {
    let dataset = load_dataset(cfg)?;
    let intr = dataset.intrinsics.scaled_to(cfg.test.width, cfg.test.height).map_err(data)?;
    let index = pick_frame(&dataset, frame)?;
    let real = real_image(&dataset, index, &intr);
    let dir = cfg.out_dir.join("mutate");
    prepare_dir(cfg, &dir)?;
    let id = &dataset.frames[index].id;
    let mut out = vec![dir.join(format!("{id}_real.ppm"))];
    real.write_ppm(&out[0]).map_err(data)?;
    for m in &cfg.mutations {
        let spec = crate::mutate::MutationSpec { seed: crate::rng::hash_words(&[m.seed, index as u64]), ..*m };
        let path = dir.join(format!("{id}_{}.ppm", m.id()));
        mutate(&real, &spec).map_err(data)?.write_ppm(&path).map_err(data)?;
        out.push(path);
    }
    Ok(out)
}

// ---------------------------------------------------------------- test

/// Training classes for the reference classifier: the dataset's own training
/// images, plus re-seeded variants of the generator scene as distractors.
fn hist_classes(dataset: &Dataset) -> BTreeMap<String, Vec<ImageBuffer>> {
    let mut classes = BTreeMap::new();
    classes.insert("scene".to_string(), dataset.train_frames().map(|f| f.image.clone()).collect::<Vec<_>>());
    if let Some(scene) = dataset.sidecar.as_ref().and_then(|s| s.scene.as_ref()) {
        let poses: Vec<_> = dataset.train_frames().step_by(10).take(8).map(|f| f.pose.clone()).collect();
        for k in 1..=2u64 {
            let alt = SceneSpec { seed: scene.seed.wrapping_add(k), ..*scene };
            let imgs = poses.iter().map(|p| raytrace(&alt, &dataset.intrinsics, p).quantized()).collect();
            classes.insert(format!("alt{k}"), imgs);
        }
    }
    classes
}

pub fn build_suts(cfg: &Config, dataset: &Dataset) -> CliResult<Vec<Sut>> {
    let mut out = Vec::new();
    let mut hist_model = None;
    for s in &cfg.suts {
        let (task, backend) = match s.kind {
            SutKind::Harris => (SutTask::Detect, SutBackend::Harris),
            SutKind::Hist => {
                if hist_model.is_none() {
                    hist_model = Some(train_hist_classifier(&hist_classes(dataset)).map_err(data)?);
                }
                (SutTask::Classify, SutBackend::Hist(hist_model.clone().expect("trained")))
            }
            SutKind::External => {
                let task = s
                    .task
                    .ok_or_else(|| CliError::Usage(format!("external SUT {} needs a task", s.name)))?;
                if !(s.timeout_s > 0.0 && s.timeout_s.is_finite()) {
                    return Err(CliError::Usage(format!("SUT {}: timeout_s must be positive", s.name)));
                }
                let ext = ExternalSut::new(s.command.clone(), Duration::from_secs_f64(s.timeout_s))
                    .map_err(|e| CliError::Usage(format!("SUT {}: {e}", s.name)))?;
                (task, SutBackend::External(ext))
            }
        };
        if let Some(t) = s.task {
            if t != task {
                return Err(CliError::Usage(format!("SUT {} cannot perform {}", s.name, t.as_str())));
            }
        }
        let desc = SutDescriptor { name: s.name.clone(), task, max_points: s.max_points };
        out.push(Sut::new(desc, backend).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    Ok(out)
}

/// Run the campaign and write `test/report.json`, `records.csv` and
/// `summary.txt`. The report is written even when the failure budget is
/// exceeded; the error is returned afterwards.
pub fn cmd_test(cfg: &Config) -> CliResult<CampaignReport> {
    if cfg.suts.is_empty() {
        return Err(CliError::Usage("no SUTs configured".into()));
    }
    let dataset = load_dataset(cfg)?;
    let field = load_field(cfg)?;
    let suts = build_suts(cfg, &dataset)?;
    let suite = build_suite(Some(dataset.sidecar().map_err(data)?), &cfg.suite).map_err(data)?;
    let report = run_campaign(&field, &dataset, &suts, &suite, &cfg.mutations, &cfg.campaign()).map_err(data)?;
    let dir = cfg.test_dir();
    prepare_dir(cfg, &dir)?;
    write_report(&report, &dir).map_err(data)?;
    if let Some(budget) = cfg.test.failure_budget {
        if report.failures > budget {
            return Err(CliError::SutBudget { failures: report.failures, budget });
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- analyze

pub fn correlation_text(rows: &[CorrelationEntry]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let mut table = vec![["sut", "metric", "image_metric", "n", "rho", "p", "sig", "note"].map(String::from).to_vec()];
    for r in rows {
        table.push(vec![
            r.sut.clone(),
            r.metric.id().into(),
            r.image_metric.clone(),
            r.n.to_string(),
            fmt(r.rho),
            fmt(r.p),
            if r.significant { "*".into() } else { String::new() },
            r.note.clone().unwrap_or_default(),
        ]);
    }
    let widths: Vec<usize> = (0..table[0].len()).map(|i| table.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
    table
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            cells.join("  ").trim_end().to_string() + "\n"
        })
        .collect()
}

/// Recompute counts and correlations from a stored report; writes
/// `analyze/correlations.json` and returns the printable tables.
pub fn cmd_analyze(cfg: &Config) -> CliResult<String> {
    let path = cfg.test_dir().join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let report: CampaignReport =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    let corr = correlation_table(&report.records, &report.quality).map_err(data)?;
    let dir = cfg.out_dir.join("analyze");
    prepare_dir(cfg, &dir)?;
    std::fs::write(dir.join("correlations.json"), serde_json::to_string_pretty(&corr).map_err(data)? + "\n")
        .context("cannot write correlations.json")?;
    Ok(format!("{}\n{}", summary_table(&report), correlation_text(&corr)))
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub seconds: f64,
    pub fps: f64,
}

/// Resolutions as columns, one FPS row.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let heads: Vec<String> = rows.iter().map(|r| format!("{}x{}", r.width, r.height)).collect();
    let vals: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.fps)).collect();
    let w: Vec<usize> = heads.iter().zip(&vals).map(|(h, v)| h.len().max(v.len())).collect();
    let line = |label: &str, cells: &[String]| {
        let mut s = format!("{label:<10}");
        for (c, w) in cells.iter().zip(&w) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s + "\n"
    };
    line("resolution", &heads) + &line("fps", &vals)
}

/// Render `frames` views per resolution (cycling over the dataset poses, eval
/// frames first) and report mean throughput.
pub fn bench_field(
    field: &RadianceField,
    dataset: &Dataset,
    cfg: &Config,
    resolutions: &[[u32; 2]],
    frames: usize,
) -> anyhow::Result<Vec<BenchRow>> {
    let mut poses: Vec<_> = dataset.eval_frames().chain(dataset.train_frames()).map(|f| f.pose.clone()).collect();
    if poses.is_empty() {
        bail!("dataset has no frames");
    }
    poses.truncate(frames.max(1));
    let mut rows = Vec::new();
    for &[w, h] in resolutions {
        let intr = dataset.intrinsics.scaled_to(w, h)?;
        let start = Instant::now();
        for i in 0..frames {
            std::hint::black_box(render_image(field, &intr, &poses[i % poses.len()], &cfg.render));
        }
        let seconds = start.elapsed().as_secs_f64();
        rows.push(BenchRow { width: w, height: h, frames, seconds, fps: frames as f64 / seconds });
    }
    Ok(rows)
}

pub fn cmd_bench(cfg: &Config) -> CliResult<Vec<BenchRow>> {
    if cfg.bench.resolutions.is_empty() {
        return Err(CliError::Usage("bench.resolutions is empty".into()));
    }
    let dataset = load_dataset(cfg)?;
    let field = load_field(cfg)?;
    let rows = bench_field(&field, &dataset, cfg, &cfg.bench.resolutions, cfg.bench.frames.max(10))?;
    let dir = cfg.out_dir.join("bench");
    prepare_dir(cfg, &dir)?;
    std::fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&rows).map_err(data)? + "\n")
        .context("cannot write bench.json")?;
    std::fs::write(dir.join("bench.txt"), bench_table(&rows)).context("cannot write bench.txt")?;
    Ok(rows)
}

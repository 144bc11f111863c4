mod common;

use std::path::Path;
use std::process::Command;

use nerfmt::cli::{self, CliError, Config, SutConfig, SutKind};
use nerfmt::field::{read_checkpoint, RadianceField};
use nerfmt::mt::{Arm, CampaignReport};
use nerfmt::suts::SutTask;

/// A desk-top-in-seconds configuration.
fn tiny(out: &Path, extra: &[&str]) -> Config {
    let mut o: Vec<String> = [
        "trajectory.n_frames=20",
        "intrinsics.width=48",
        "intrinsics.height=27",
        "field.resolution=[12,12,12]",
        "train.steps=30",
        "train.rays_per_step=256",
        "render.samples_per_ray=16",
        "test.width=64",
        "test.height=36",
        "test.max_frames=2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    o.push(format!("out_dir={}", out.display()));
    o.extend(extra.iter().map(|s| s.to_string()));
    Config::load(None, &o).unwrap()
}

#[test]
fn synth_fit_test_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), &[]);
    let s = cli::cmd_synth(&cfg).unwrap();
    assert_eq!((s.total, s.train, s.eval), (20, 18, 2));

    // fitting is reproducible down to the loss history
    cli::cmd_fit(&cfg, |_, _| {}).unwrap();
    let loss_a = std::fs::read(cfg.fit_dir().join("loss.csv")).unwrap();
    let m = cli::cmd_fit(&cfg, |_, _| {}).unwrap();
    let loss_b = std::fs::read(cfg.fit_dir().join("loss.csv")).unwrap();
    assert_eq!(loss_a, loss_b);
    assert_eq!(String::from_utf8(loss_a).unwrap().lines().count(), 31);
    assert!(m.heldout_psnr.is_finite() && m.wall_time_s >= 0.0);
    assert!(cfg.fit_dir().join("config.json").exists());

    let r1 = cli::cmd_test(&cfg).unwrap();
    let json1 = std::fs::read(cfg.test_dir().join("report.json")).unwrap();
    let r2 = cli::cmd_test(&cfg).unwrap();
    let json2 = std::fs::read(cfg.test_dir().join("report.json")).unwrap();
    assert_eq!(json1, json2);
    assert_eq!(r1, r2);

    for sut in ["harris", "hist"] {
        let cases = |arm: Arm| {
            let mut c: Vec<&str> =
                r1.records.iter().filter(|r| r.sut == sut && r.arm == arm).map(|r| r.case.as_str()).collect();
            c.dedup();
            c.sort();
            c.dedup();
            c
        };
        assert_eq!(cases(Arm::Transform), ["tau0", "tau1", "tau2", "tau3", "tau4", "tau5", "tau6"]);
        assert_eq!(cases(Arm::Mutation).len(), cfg.mutations.len());
    }
    let stored: CampaignReport = serde_json::from_slice(&json1).unwrap();
    assert_eq!(stored, r1);
    assert!(std::fs::read_to_string(cfg.test_dir().join("records.csv"))
        .unwrap()
        .starts_with("frame,sut,arm,tau_or_mutation,metric,raw,deviation,inc_01,inc_02,inc_05,failed\n"));

    let text = cli::cmd_analyze(&cfg).unwrap();
    assert!(text.contains("image_metric"));
    assert!(tmp.path().join("analyze/correlations.json").exists());

    assert_eq!(cli::cmd_render(&cfg, None).unwrap().len(), 2);
    assert_eq!(cli::cmd_transform(&cfg, None).unwrap().len(), 7);
    assert_eq!(cli::cmd_mutate(&cfg, Some("frame_0003")).unwrap().len(), 1 + cfg.mutations.len());
    let one = tiny(tmp.path(), &["bench.resolutions=[[32,18]]"]);
    let rows = cli::cmd_bench(&one).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].frames >= 10);
}

#[test]
fn zero_steps_leave_the_initial_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), &["train.steps=0"]);
    cli::cmd_synth(&cfg).unwrap();
    let m = cli::cmd_fit(&cfg, |_, _| {}).unwrap();
    assert_eq!(m.heldout_psnr, m.init_psnr);
    let field = read_checkpoint(&cfg.checkpoint_path()).unwrap();
    let scene = cfg.scene_spec.scene_box();
    let init = RadianceField::from_init(&cfg.field, &scene).unwrap();
    assert_eq!(field.resolution, init.resolution);
    assert_eq!(field.sigma.iter().map(|v| *v as f32).collect::<Vec<_>>(), init.sigma.iter().map(|v| *v as f32).collect::<Vec<_>>());
    assert_eq!(field.background, init.background);
}

#[test]
fn failure_budget_maps_to_exit_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path(), &["train.steps=0", "test.failure_budget=0"]);
    cfg.suts = vec![SutConfig {
        name: "flaky".into(),
        kind: SutKind::External,
        task: Some(SutTask::Classify),
        max_points: 100,
        command: vec![common::stub_exe().into(), "malformed".into()],
        timeout_s: 10.0,
    }];
    cli::cmd_synth(&cfg).unwrap();
    cli::cmd_fit(&cfg, |_, _| {}).unwrap();
    let err = cli::cmd_test(&cfg).unwrap_err();
    assert!(matches!(err, CliError::SutBudget { failures: 1, budget: 0 }), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(cfg.test_dir().join("report.json").exists());
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_nerfmt");
    let tmp = tempfile::tempdir().unwrap();
    let out = format!("--out_dir={}", tmp.path().display());
    let code = |args: &[&str]| Command::new(exe).args(args).output().unwrap().status.code();
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["fit", &out, "--epsilons=[0.5,0.2]"]), Some(1));
    assert_eq!(code(&["test", &out, "--suts=[]"]), Some(1));
    // no dataset on disk
    assert_eq!(code(&["fit", &out]), Some(2));
    assert_eq!(code(&["synth", &out, "--trajectory.n_frames=3", "--intrinsics.width=16", "--intrinsics.height=9"]), Some(0));
    // --frame may appear anywhere among the overrides
    let small = ["--test.width=16", "--test.height=9"];
    assert_eq!(code(&["mutate", &out, small[0], "--frame", "frame_0002", small[1]]), Some(0));
    assert!(tmp.path().join("mutate/frame_0002_real.ppm").exists());
    assert_eq!(code(&["mutate", &out, "--frame=frame_0099", small[0], small[1]]), Some(2));
    assert_eq!(code(&["mutate", &out, "--frame"]), Some(1));
}

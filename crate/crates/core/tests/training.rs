mod common;

use std::fs;
use std::path::Path;

use common::synth::synth;
use hbpn_core::autodiff::checkpoint::Checkpoint;
use hbpn_core::imaging::{prepare_data, save_image};
use hbpn_core::metrics::PassThrough;
use hbpn_core::net::{HbpnConfig, HbpnModel, HeadKind};
use hbpn_core::train::{
    ablate, evaluate_dataset, load_model, read_loss_log, report_paths, step_checkpoint_name, write_reports,
    AblationAxis, EvalOptions, TrainConfig, Trainer, FINAL_CHECKPOINT, LOSS_LOG,
};
use hbpn_core::ErrorKind;

/// A prepared ×2 dataset of `n` synthetic 32×32 images.
fn dataset(root: &Path, n: usize) {
    let src = root.join("src");
    for i in 0..n {
        save_image(&synth(i, 32), src.join(format!("im{i}.png"))).unwrap();
    }
    prepare_data(&src, &[2], &root.join("data")).unwrap();
}

fn tiny_config(root: &Path, steps: usize) -> TrainConfig {
    let mut c = TrainConfig::default();
    c.scale = 2;
    c.model = HbpnConfig {
        modules: 2,
        depth: 1,
        base_channels: 2,
        head: HeadKind::Wr,
    };
    c.patch_size = 16;
    c.patch_stride = 16;
    c.lr = 1e-3;
    c.batch_schedule = format!("2x{steps}").parse().unwrap();
    c.dataset_root = root.join("data");
    c.checkpoint_dir = root.join("ckpt");
    c.checkpoint_interval = 3;
    c.log_interval = 1;
    c
}

#[test]
fn schedule_consumes_exactly_its_steps() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 2);
    let mut c = tiny_config(dir.path(), 1);
    c.batch_schedule = "8x10,32x10".parse().unwrap();
    c.checkpoint_interval = 1000;
    let mut t = Trainer::new(c).unwrap();
    let out = t.run(None).unwrap();
    assert_eq!(out.steps_run, 20);
    assert_eq!(out.final_step, 20);
    assert!(t.is_finished());
    assert_eq!(read_loss_log(&out.loss_log).unwrap().len(), 20);
}

#[test]
fn same_seed_gives_identical_loss_logs() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 3);
    let mut logs = Vec::new();
    for run in 0..2 {
        let mut c = tiny_config(dir.path(), 6);
        c.checkpoint_dir = dir.path().join(format!("run{run}"));
        Trainer::new(c).unwrap().run(None).unwrap();
        logs.push(fs::read(dir.path().join(format!("run{run}")).join(LOSS_LOG)).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(String::from_utf8(logs[0].clone()).unwrap().lines().count(), 6);
}

#[test]
fn checkpoints_are_written_and_reload_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 2);
    let c = tiny_config(dir.path(), 7);
    let mut t = Trainer::new(c.clone()).unwrap();
    let out = t.run(None).unwrap();
    let names: Vec<String> = out
        .checkpoints
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec![step_checkpoint_name(3), step_checkpoint_name(6), FINAL_CHECKPOINT.to_string()]);
    let loaded = load_model(&c.checkpoint_dir.join(FINAL_CHECKPOINT), Some(&c.model)).unwrap();
    let x = t.data().pairs()[0].input.to_tensor();
    let a = t.model.infer_tensor(&x).unwrap();
    let b = loaded.infer_tensor(&x).unwrap();
    assert_eq!(
        a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 3);
    let mut full = tiny_config(dir.path(), 8);
    full.checkpoint_dir = dir.path().join("full");
    Trainer::new(full.clone()).unwrap().run(None).unwrap();

    let mut part = tiny_config(dir.path(), 8);
    part.checkpoint_dir = dir.path().join("part");
    Trainer::new(part.clone()).unwrap().run(Some(5)).unwrap();
    // Resume from the step-3 checkpoint; the log is trimmed back to step 3.
    let mut resumed = Trainer::resume(part.clone(), &part.checkpoint_dir.join(step_checkpoint_name(3))).unwrap();
    assert_eq!(resumed.step(), 3);
    resumed.run(None).unwrap();

    let a = fs::read(full.checkpoint_dir.join(LOSS_LOG)).unwrap();
    let b = fs::read(part.checkpoint_dir.join(LOSS_LOG)).unwrap();
    assert_eq!(a, b);
    // Headers differ only in the recorded checkpoint directory.
    let fa = Checkpoint::load(&full.checkpoint_dir.join(FINAL_CHECKPOINT)).unwrap();
    let fb = Checkpoint::load(&part.checkpoint_dir.join(FINAL_CHECKPOINT)).unwrap();
    assert_eq!(fa.tensors.len(), fb.tensors.len());
    for ((na, ta), (nb, tb)) in fa.tensors.iter().zip(&fb.tensors) {
        assert_eq!(na, nb);
        assert_eq!(
            ta.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            tb.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            "{na}"
        );
    }
    assert_eq!(fa.header.get("train.adam_step"), fb.header.get("train.adam_step"));
}

#[test]
fn non_finite_loss_stops_and_keeps_earlier_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 2);
    let mut c = tiny_config(dir.path(), 200);
    c.lr = 1e30;
    c.checkpoint_interval = 1;
    let mut t = Trainer::new(c.clone()).unwrap();
    let err = t.run(None).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Numeric, "{err}");
    let last = t.step();
    assert!(last < 200);
    if last > 0 {
        assert!(c.checkpoint_dir.join(step_checkpoint_name(last)).is_file());
    }
    assert!(!c.checkpoint_dir.join(FINAL_CHECKPOINT).exists());
}

#[test]
fn evaluation_reports_every_image() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 3);
    let root = dir.path().join("data");
    let plain = evaluate_dataset(&PassThrough, &root, 2, &EvalOptions::default()).unwrap();
    let ens = evaluate_dataset(
        &PassThrough,
        &root,
        2,
        &EvalOptions {
            self_ensemble: true,
            save_dir: Some(dir.path().join("sr")),
        },
    )
    .unwrap();
    assert_eq!(plain.records.len(), 3);
    let names = |r: &hbpn_core::metrics::MetricsReport| r.records.iter().map(|x| x.name.clone()).collect::<Vec<_>>();
    assert_eq!(names(&plain), names(&ens));
    let out = dir.path().join("reports");
    let a = write_reports(&plain, &out, false).unwrap();
    let b = write_reports(&ens, &out, true).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, report_paths(&out, 2, false));
    for p in [&a.0, &a.1, &b.0, &b.1] {
        assert!(p.is_file());
    }
    assert_eq!(fs::read_dir(dir.path().join("sr")).unwrap().count(), 3);
}

#[test]
fn architecture_mismatch_names_both_configs() {
    let dir = tempfile::tempdir().unwrap();
    let model = HbpnModel::new(
        HbpnConfig {
            modules: 2,
            depth: 1,
            base_channels: 2,
            head: HeadKind::Wr,
        },
        0,
    )
    .unwrap();
    let p = dir.path().join("m.ckpt");
    model.to_checkpoint().save(&p).unwrap();
    let other = HbpnConfig {
        modules: 3,
        ..model.config
    };
    let msg = load_model(&p, Some(&other)).unwrap_err().to_string();
    assert!(msg.contains("modules=2") && msg.contains("modules=3"), "{msg}");
}

#[test]
fn module_ablation_parameter_counts_increase() {
    let base = TrainConfig::default();
    let counts: Vec<usize> = AblationAxis::Modules
        .default_values()
        .iter()
        .map(|v| {
            let mut c = base.clone();
            AblationAxis::Modules.apply(&mut c, v).unwrap();
            HbpnModel::param_count(&c.model)
        })
        .collect();
    assert_eq!(counts.len(), 3);
    assert!(counts.windows(2).all(|w| w[1] > w[0]));
    let mut c = base.clone();
    assert!(AblationAxis::Modules.apply(&mut c, "5").is_err());
    assert!(AblationAxis::Depth.apply(&mut c, "0").is_err());
}

#[test]
fn every_depth_trains_on_32px_patches() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    for t in 1..=4 {
        let mut c = tiny_config(dir.path(), 2);
        c.patch_size = 32;
        c.patch_stride = 32;
        AblationAxis::Depth.apply(&mut c, &t.to_string()).unwrap();
        c.checkpoint_dir = dir.path().join(format!("depth{t}"));
        c.validate().unwrap();
        let out = Trainer::new(c).unwrap().run(None).unwrap();
        assert_eq!(out.steps_run, 2);
        assert!(out.final_loss.unwrap().is_finite());
    }
}

#[test]
fn head_ablation_table() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 2);
    let c = tiny_config(dir.path(), 2);
    let report = ablate(&c, AblationAxis::Head, &AblationAxis::Head.default_values()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].label, "Plain model");
    assert_eq!(report.rows[1].label, "WR model");
    assert!(report.rows[0].params > report.rows[1].params);
    let table = report.to_table();
    println!("{table}");
    assert!(table.contains("Algorithm") && table.contains("PSNR") && table.contains("SSIM"));
    assert!(table.contains("data"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("train.cfg");
    fs::write(&p, "# desk run\nscale = 2\nmodules = 2\nlr = 0.001\n").unwrap();
    let mut c = TrainConfig::load(&p).unwrap();
    assert_eq!(c.scale, 2);
    c.apply_overrides(&["lr=0.01", "seed=5"]).unwrap();
    assert_eq!(c.lr, 0.01);
    assert_eq!(c.seed, 5);
    assert_eq!(TrainConfig::parse_text(&c.to_text()).unwrap(), c);
    fs::write(&p, "learning_rate = 1\n").unwrap();
    assert!(TrainConfig::load(&p).is_err());
    assert!(c.apply_overrides(&["bogus=1"]).is_err());
}

#[test]
fn missing_dataset_is_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config(dir.path(), 2);
    let err = Trainer::new(c.clone()).err().unwrap();
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(!c.checkpoint_dir.exists());
}

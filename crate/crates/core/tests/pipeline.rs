use std::fs;
use std::path::Path;
use std::process::Command;

use clmia::data::{Ratio, SplitConfig};
use clmia::experiment::{
    cell_count, commands, files, run_ablation, run_experiment, ExperimentConfig, CLMIA,
};

const SMALL: &str = r#"
seed = 7

[dataset]
kind = "synthetic"
n = 600
classes = 4
dim = 12
separation = 2.5
aux = 200

[split]
target_count = 200
labeled_count = 120

[target]
hidden = [32]
epochs = 30

[attack]
epochs = 4
batch_size = 32

[attack.finetune]
epochs = 10

[baselines]
nn_epochs = 10
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).unwrap()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn runs_are_byte_identical() {
    let cfg = small();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    for f in [files::REPORTS, files::INFERENCE, files::ATTACK_CKPT, files::TARGET_CKPT, files::POSTERIORS_TARGET] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f} differs");
    }
}

#[test]
fn baselines_off_gives_one_report() {
    let mut cfg = small();
    cfg.baselines.enabled = false;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert_eq!(out.reports[0].attack, CLMIA);
    assert_eq!(out.manifest.config_hash, cfg.hash());
    assert!(out.manifest.failed_stage.is_none());
}

#[test]
fn full_run_reports_every_attack() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(), dir.path()).unwrap();
    let names: Vec<&str> = out.reports.iter().map(|r| r.attack.as_str()).collect();
    for want in ["clmia", "top1", "entropy", "modified_entropy", "loss", "correctness", "only_fc", "nn_attack"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
        assert!(dir.path().join(format!("report_{want}.json")).exists());
        assert!(dir.path().join(format!("roc_{want}.csv")).exists());
    }
    for r in &out.reports {
        assert_eq!(r.n_members + r.n_non_members, 200);
    }
}

#[test]
fn staged_commands_reproduce_run() {
    let cfg = small();
    let (whole, staged) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run_experiment(&cfg, whole.path()).unwrap();

    let s = staged.path();
    commands::train_target_cmd(&cfg, s).unwrap();
    commands::dump_posteriors_cmd(&cfg, s, None).unwrap();
    commands::make_attack_data_cmd(&cfg, s).unwrap();
    commands::train_clmia_cmd(&cfg, s, None).unwrap();
    commands::finetune_cmd(&cfg, s).unwrap();
    let report = commands::infer_cmd(&cfg, s, None).unwrap().unwrap();
    let baselines = commands::baselines_cmd(&cfg, s).unwrap();

    for f in [
        files::TARGET_CKPT,
        files::POSTERIORS_TARGET,
        files::POSTERIORS_LABELED,
        files::ATTACK_DATA,
        files::ENCODER_CKPT,
        files::ATTACK_CKPT,
        files::INFERENCE,
    ] {
        assert_eq!(read(whole.path().join(f)), read(s.join(f)), "{f} differs");
    }
    assert_eq!(&report, out.report(CLMIA).unwrap());
    for b in &baselines {
        assert_eq!(Some(b), out.report(&b.attack), "{}", b.attack);
    }
}

#[test]
fn staged_commands_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let err = commands::finetune_cmd(&small(), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let err = commands::make_attack_data_cmd(&small(), dir.path()).unwrap_err();
    assert!(err.to_string().contains("train-target"), "{err}");
}

#[test]
fn hash_ignores_output_dir() {
    let mut a = small();
    let mut b = small();
    a.output_dir = Some("one".into());
    b.output_dir = Some("two".into());
    assert_eq!(a.hash(), b.hash());
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn single_temperature_is_a_single_cell() {
    let mut cfg = small();
    cfg.ablation.temperatures = vec![0.05];
    assert_eq!(cell_count(&cfg), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = run_ablation(&cfg, dir.path()).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert_eq!(out.reports[0].params["temperature"], "0.05");
    assert!(dir.path().join("cells/cell_000_clmia.json").exists());
}

#[test]
fn size_by_ratio_grid_has_eight_cells() {
    let mut cfg = small();
    cfg.dataset = toml::from_str(
        r#"
        kind = "synthetic"
        n = 2400
        classes = 4
        dim = 12
        separation = 2.5
        "#,
    )
    .unwrap();
    cfg.split = SplitConfig {
        target_count: 200,
        labeled_count: 600,
        ..SplitConfig::default()
    };
    cfg.attack.epochs = 2;
    cfg.attack.finetune.epochs = 3;
    cfg.ablation.labeled_sizes = Some(vec![600, 800]);
    cfg.ablation.ratios = Some(vec![Ratio::new(1, 1), Ratio::new(1, 2), Ratio::new(1, 3), Ratio::new(1, 4)]);
    assert_eq!(cell_count(&cfg), 8);
    let dir = tempfile::tempdir().unwrap();
    let out = run_ablation(&cfg, dir.path()).unwrap();
    let cells: Vec<(String, String)> = out
        .reports
        .iter()
        .map(|r| (r.params["labeled_size"].clone(), r.params["ratio"].clone()))
        .collect();
    assert_eq!(cells.len(), 8);
    assert_eq!(cells[0], ("600".to_string(), "1:1".to_string()));
    assert_eq!(cells[7], ("800".to_string(), "1:4".to_string()));
    let saved: Vec<clmia::metrics::AttackReport> =
        serde_json::from_slice(&read(dir.path().join("ablation.json"))).unwrap();
    assert_eq!(saved, out.reports);
}

#[test]
fn only_fc_adds_a_cell_per_labeled_set() {
    let mut cfg = small();
    cfg.ablation.only_fc = true;
    cfg.ablation.labeled_sizes = Some(vec![60, 120]);
    assert_eq!(cell_count(&cfg), 4);
    let dir = tempfile::tempdir().unwrap();
    let out = run_ablation(&cfg, dir.path()).unwrap();
    let only_fc = out.reports.iter().filter(|r| r.attack == "only_fc").count();
    assert_eq!(only_fc, 2);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_clmia")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let good = d.join("good.toml");
    fs::write(&good, SMALL).unwrap();
    let out = d.join("out");
    let out_s = out.to_str().unwrap();

    let missing_seed = d.join("noseed.toml");
    fs::write(&missing_seed, SMALL.replace("seed = 7", "")).unwrap();
    let r = cli(&["run", "--config", missing_seed.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));

    let bad_rate = d.join("rate.toml");
    fs::write(&bad_rate, format!("{SMALL}\n[ablation]\ndropout = [[1.5, 0.1]]\n")).unwrap();
    let r = cli(&["ablate", "--config", bad_rate.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));

    let r = cli(&["finetune", "--config", good.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(3));

    let r = cli(&["train-target", "--config", good.to_str().unwrap(), "--out", out_s]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("gap="));

    let bad_dump = d.join("bad.csv");
    fs::write(&bad_dump, "mia-dump v1 classes=2 labeled=1\n0.5,0.5,0,1\n0.7,0.7,1,0\n").unwrap();
    let cfg_dump = d.join("dump.toml");
    fs::write(
        &cfg_dump,
        format!("seed = 1\n[dataset]\nkind = \"dump\"\npath = \"{}\"\n", bad_dump.display()),
    )
    .unwrap();
    let r = cli(&["run", "--config", cfg_dump.to_str().unwrap(), "--out", out_s]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smat_cli::RunConfig;
use smat_core::curriculum::read_metrics_csv;

fn smat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smat")).args(args).output().expect("binary runs")
}

fn trace_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic_gait.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Desk config shrunk to a few updates per stage.
fn tiny_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::desk();
    for p in &mut cfg.ppo {
        p.rollout_steps = 8;
        p.n_envs = 2;
        p.minibatch_size = 8;
        p.epochs = 2;
    }
    cfg.plan.budgets = Some([48; 4]);
    cfg.eval_steps = 30;
    let path = dir.join("tiny.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn printed_defaults_pass_check() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [&[][..], &["--desk"][..]] {
        let out = smat(&[&["config", "--print-defaults"], extra].concat());
        assert!(out.status.success());
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, &out.stdout).unwrap();
        assert!(smat(&["config", "--check", s(&path)]).status.success());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.ppo[0].learning_rate = -1.0;
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, cfg.to_json()).unwrap();
    assert_eq!(smat(&["config", "--check", s(&bad)]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"seed": 1, "learning_rate": 0.1}"#).unwrap();
    assert_eq!(smat(&["config", "--check", s(&unknown)]).status.code(), Some(2));

    let out = dir.path().join("run");
    let res = smat(&["train", "--stage", "3", "--config", s(&tiny_config(dir.path())), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2), "stage 3 without a stage-2 checkpoint");
    assert!(!res.stderr.is_empty());

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let code = smat(&["analyze", s(&empty), "--out", s(&dir.path().join("a"))]).status.code();
    assert_eq!(code, Some(3));

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let code = smat(&[
        "eval-offline",
        "--checkpoint",
        s(&junk),
        "--trace",
        s(&trace_file()),
        "--torque-limit",
        "15",
        "--out",
        s(&dir.path().join("o")),
    ])
    .status
    .code();
    assert_eq!(code, Some(3));
}

#[test]
fn analyze_identical_traces_have_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.csv");
    std::fs::copy(trace_file(), &copy).unwrap();
    let out = dir.path().join("out");
    assert!(smat(&["analyze", s(&trace_file()), s(&copy), "--out", s(&out)]).status.success());
    let mut rdr = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[2][0], "mean");
    assert_eq!(&rows[3][0], "sd");
    for v in rows[3].iter().skip(1) {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(rows[0].iter().skip(1).collect::<Vec<_>>(), rows[2].iter().skip(1).collect::<Vec<_>>());
    assert!(out.join("synthetic_gait_waveform.csv").exists());
}

#[test]
fn train_export_and_offline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let runs = ["a", "b"].map(|n| dir.path().join(n));
    for r in &runs {
        let out = smat(&["train", "--all", "--quiet", "--config", s(&cfg), "--out", s(r)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for stage in 1..=4 {
        for name in [format!("stage{stage}.ckpt"), format!("stage{stage}_metrics.csv")] {
            let a = std::fs::read(runs[0].join(&name));
            let b = std::fs::read(runs[1].join(&name));
            assert!(a.is_ok(), "missing {name}");
            assert_eq!(a.unwrap(), b.unwrap(), "{name} differs between identical runs");
        }
    }

    let plots = dir.path().join("plots");
    assert!(smat(&["export-plots", s(&runs[0]), "--out", s(&plots)]).status.success());
    let mut updates = 0;
    for stage in 1..=4 {
        let f = std::fs::File::open(runs[0].join(format!("stage{stage}_metrics.csv"))).unwrap();
        updates += read_metrics_csv(f).unwrap().len();
    }
    let mut rdr = csv::Reader::from_path(plots.join("reward_curve.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().get(0), Some("stage"));
    assert_eq!(rdr.records().count(), updates);

    let offline = dir.path().join("offline");
    let out = smat(&[
        "eval-offline",
        "--checkpoint",
        s(&runs[0].join("stage4.ckpt")),
        "--trace",
        s(&trace_file()),
        "--torque-limit",
        "15",
        "--out",
        s(&offline),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(&offline).unwrap().count() >= 3);
}

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const CONFIG: &str = r#"
[prepare]
train_window_samples = 3600

[balance]
targets = [120, 80, 80, 40, 0]

[model]
depth = 11

[train]
batch_size = 32
"#;

fn isenet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isenet"))
        .current_dir(dir)
        .args(args)
        .env_remove("ISENET_CACHE_DIR")
        .env_remove("ISENET_REPORT_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = isenet(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Working directory holding synthetic records, the config and a prepared
/// dataset. Shared across tests; each test writes into its own subdirs.
fn workspace() -> &'static Path {
    static WS: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &WS.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        common::write_mitdb_like(&root.join("data/mitdb"), 7200, 9);
        fs::write(root.join("isenet.toml"), CONFIG).unwrap();
        ok(&root, &["--config", "isenet.toml", "prepare"]);
        (tmp, root)
    })
    .1
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn help_lists_every_subcommand_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let top = ok(dir.path(), &["--help"]);
    for cmd in ["fetch", "prepare", "train", "eval", "analyze", "segment", "gradcheck"] {
        assert!(top.contains(cmd), "{cmd} missing from help");
    }
    let train = ok(dir.path(), &["train", "--help"]);
    for flag in ["--depth", "--attention", "--optimizer", "--schedule", "--lr", "--batch-size", "--max-epochs", "--patience", "--seed"] {
        assert!(train.contains(flag), "{flag} missing");
    }
    assert!(train.contains("[default: 200]") && train.contains("[default: 14]") && train.contains("[default: momentum]"));
    let prep = ok(dir.path(), &["prepare", "--help"]);
    assert!(prep.contains("--balance-targets") && prep.contains("10000,8000,8000,4000,0"));
}

#[test]
fn full_pipeline_writes_reports() {
    let ws = workspace();
    let c = ["--config", "isenet.toml"];
    let run = |extra: &[&str]| ok(ws, &[&c[..], extra].concat());
    run(&["train", "--out", "runs/full", "--max-epochs", "2"]);
    let ck = ws.join("runs/full");
    assert!(ck.join("selected.json").is_file());
    assert!(ck.join(isenet_effective()).is_file());

    let out = run(&["--report-dir", "reports/full", "eval", "--checkpoint", "runs/full"]);
    assert!(out.contains("ds2v"));
    let eval = ws.join("reports/full/eval");
    for f in ["metrics.csv", "metrics.json", "confusion_full.csv", "confusion_ds2.csv", "table4.txt", "effective_config.toml"] {
        assert!(eval.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);

    run(&["--report-dir", "reports/full", "analyze", "--checkpoint", "runs/full", "--per-class", "10", "--repeats", "2"]);
    let an = ws.join("reports/full/analyze");
    for f in ["excitation.csv", "msd.csv", "excitation_repeat1.csv", "drift.csv", "sampling.json"] {
        assert!(an.join(f).is_file(), "{f}");
    }
    let msd = fs::read_to_string(an.join("msd.csv")).unwrap();
    // depth 11 has three blocks, six class pairs each
    assert_eq!(msd.lines().count(), 1 + 3 * 6);

    run(&["--report-dir", "reports/full", "segment", "--checkpoint", "runs/full", "--max-epochs", "1"]);
    let seg = ws.join("reports/full/segment");
    assert!(seg.join("segment_VF_cut2.json").is_file());
    assert!(fs::read_to_string(seg.join("table4_VF_cut2.txt")).unwrap().contains('['));
}

fn isenet_effective() -> &'static str {
    "effective_config.toml"
}

#[test]
fn zero_epochs_selects_the_initial_state() {
    let ws = workspace();
    ok(ws, &["--config", "isenet.toml", "train", "--out", "runs/zero", "--max-epochs", "0"]);
    let log = fs::read_to_string(ws.join("runs/zero/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let sel: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("runs/zero/selected.json")).unwrap()).unwrap();
    assert_eq!(sel["epoch"], 0);
}

#[test]
fn reruns_are_byte_identical() {
    let ws = workspace();
    for name in ["a", "b"] {
        let args = ["--config", "isenet.toml", "train", "--out", &format!("runs/det_{name}"), "--max-epochs", "1", "--seed", "3"];
        ok(ws, &args);
        ok(ws, &["--config", "isenet.toml", "--report-dir", &format!("reports/det_{name}"), "eval", "--checkpoint", &format!("runs/det_{name}")]);
    }
    let strip = |mut t: BTreeMap<PathBuf, Vec<u8>>| {
        // the effective config records its own output paths
        t.retain(|p, _| !p.ends_with("effective_config.toml") && !p.ends_with("source.json"));
        t
    };
    assert_eq!(strip(tree(&ws.join("runs/det_a"))), strip(tree(&ws.join("runs/det_b"))));
    assert_eq!(strip(tree(&ws.join("reports/det_a"))), strip(tree(&ws.join("reports/det_b"))));
}

#[test]
fn prepare_is_deterministic() {
    let ws = workspace();
    ok(ws, &["--config", "isenet.toml", "prepare", "--dataset-dir", "data/again"]);
    let mut a = tree(&ws.join("data/dataset"));
    let mut b = tree(&ws.join("data/again"));
    a.remove(Path::new("effective_config.toml"));
    b.remove(Path::new("effective_config.toml"));
    assert_eq!(a, b);
}

#[test]
fn exit_codes_follow_error_kind() {
    let ws = workspace();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[train]\nno_such_key = 1\n").unwrap();
    assert_eq!(code(&isenet(dir.path(), &["--config", "bad.toml", "train"])), 2);
    assert_eq!(code(&isenet(dir.path(), &["--config", "missing.toml", "train"])), 2);
    assert_eq!(code(&isenet(dir.path(), &["prepare", "--lead", "v5"])), 2);
    assert_eq!(code(&isenet(dir.path(), &["train", "--lr=-1"])), 2);
    assert_eq!(code(&isenet(dir.path(), &["train"])), 3);
    assert_eq!(code(&isenet(dir.path(), &["prepare"])), 3);
    assert_eq!(code(&isenet(dir.path(), &["eval", "--checkpoint", "nowhere"])), 3);
    assert_eq!(code(&isenet(ws, &["--config", "isenet.toml", "train", "--out", "runs/x", "--batch-size", "0"])), 2);
    let unreachable = isenet(dir.path(), &["fetch", "100", "--base-url", "http://127.0.0.1:9"]);
    assert_eq!(code(&unreachable), 3);
}

#[test]
fn failed_eval_leaves_no_reports() {
    let ws = workspace();
    ok(ws, &["--config", "isenet.toml", "train", "--out", "runs/v1", "--max-epochs", "0"]);
    ok(ws, &["--config", "isenet.toml", "prepare", "--lead", "v1", "--dataset-dir", "data/v1"]);
    let out = isenet(ws, &["--report-dir", "reports/mismatch", "eval", "--checkpoint", "runs/v1", "--dataset-dir", "data/v1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!ws.join("reports/mismatch/eval").exists());
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gradcheck", "--cases", "3"]);
    assert!(out.contains("ise_block") && !out.contains("FAIL"));
    assert_eq!(code(&isenet(dir.path(), &["gradcheck", "--cases", "3", "--tolerance", "1e-16"])), 4);
}

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smoothgnn"));
    cmd.env_remove("SMOOTHGNN_OUT_DIR");
    cmd
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn generate(dir: &Path) {
    let out = run(
        &["generate", "--out", "data", "--nodes", "120", "--seed", "3"],
        dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const FAST: [&str; 6] = ["--epochs", "3", "--hops", "2", "--hidden", "8"];

fn train(dir: &Path, out: &str, extra: &[&str]) -> serde_json::Value {
    let mut args = vec!["train", "--data", "data", "--out", out, "--seed", "7"];
    args.extend(FAST);
    args.extend(extra);
    let o = run(&args, dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(dir.join(out).join("report.json")).unwrap())
        .unwrap()
}

#[test]
fn train_writes_checkpoint_scores_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let report = train(tmp.path(), "out", &[]);
    for f in ["model.ckpt", "scores.tsv", "report.json"] {
        assert!(tmp.path().join("out").join(f).is_file(), "missing {f}");
    }
    assert_eq!(report["training"]["epochs"].as_array().unwrap().len(), 3);
    assert_eq!(report["training"]["config"]["sc_enabled"], true);
    let auc = report["metrics"]["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let no_sc = train(tmp.path(), "ablation", &["--no-sc"]);
    assert_eq!(no_sc["training"]["config"]["sc_enabled"], false);
    assert_ne!(no_sc["training"]["scores"], report["training"]["scores"]);
}

#[test]
fn flags_override_size_class_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let report = train(tmp.path(), "out", &["--lr", "0.002", "--appnp", "0.3"]);
    let config = &report["training"]["config"];
    assert_eq!(config["lr"], 0.002);
    assert_eq!(config["hops"], 2);
    assert_eq!(config["init_std"], 0.01);
    assert_eq!(config["variant"]["kind"], "appnp");
    assert_eq!(config["variant"]["alpha"], 0.3);
}

#[test]
fn training_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let a = train(tmp.path(), "a", &[]);
    let b = train(tmp.path(), "b", &[]);
    assert_eq!(a["training"]["scores"], b["training"]["scores"]);
    let ckpt = |d: &str| std::fs::read(tmp.path().join(d).join("model.ckpt")).unwrap();
    assert_eq!(ckpt("a"), ckpt("b"));
}

#[test]
fn score_and_eval_reproduce_training_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let report = train(tmp.path(), "out", &[]);
    let o = run(
        &[
            "score",
            "--data",
            "data",
            "--checkpoint",
            "out/model.ckpt",
            "--out",
            "rescored.tsv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let read = |p: &str| std::fs::read(tmp.path().join(p)).unwrap();
    assert_eq!(read("rescored.tsv"), read("out/scores.tsv"));

    let o = run(
        &["eval", "--data", "data", "--scores", "rescored.tsv"],
        tmp.path(),
    );
    assert!(o.status.success());
    let metrics: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(metrics, report["metrics"]);
    let o = run(
        &[
            "eval",
            "--data",
            "data",
            "--scores",
            "rescored.tsv",
            "--k",
            "0",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_data_reports_path_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["train", "--data", "missing"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));

    let o = run(&["--json-errors", "train", "--data", "missing"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("missing"));
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["train", "--data", "d", "--bogus"], tmp.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"], tmp.path()).status.code(), Some(1));
    generate(tmp.path());
    let o = run(&["train", "--data", "data", "--hops", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_every_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["train", "--help"], tmp.path());
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--data",
        "--out",
        "--seed",
        "--size-class",
        "--hops",
        "--hidden",
        "--lr",
        "--eps",
        "--init-std",
        "--epochs",
        "--no-sc",
        "--appnp",
    ] {
        assert!(help.contains(flag), "train help lacks {flag}");
    }
    for sub in ["generate", "score", "eval", "analyze", "verify"] {
        assert!(run(&[sub, "--help"], tmp.path()).status.success());
    }
}

#[test]
fn env_var_sets_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["generate", "--nodes", "50"])
        .env("SMOOTHGNN_OUT_DIR", "from-env")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from-env/features.csv").is_file());
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let o = run(&["analyze", "--data", "data", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&tmp.path().join("a/distance_curves.csv"));
    assert_eq!(rows[0], ["hop", "anomalous_mean", "normal_mean"]);
    // medium defaults: T = 5
    assert_eq!(rows.len(), 1 + 6);
    let sc = csv_rows(&tmp.path().join("a/sc_quotients.csv"));
    assert_eq!(sc.len(), 1 + 16);

    let o = run(
        &["analyze", "--data", "data", "--out", "p", "--appnp", "1.0"],
        tmp.path(),
    );
    assert!(o.status.success());
    for row in &csv_rows(&tmp.path().join("p/distance_curves.csv"))[2..] {
        assert!(
            row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0),
            "{row:?}"
        );
    }

    std::fs::remove_file(tmp.path().join("data/labels.txt")).unwrap();
    let o = run(
        &["analyze", "--data", "data", "--out", "u", "--hops", "3"],
        tmp.path(),
    );
    assert!(o.status.success());
    let rows = csv_rows(&tmp.path().join("u/distance_curves.csv"));
    assert_eq!(rows[0], ["hop", "mean"]);
    assert_eq!(rows.len(), 1 + 4);
    let o = run(&["eval", "--data", "data", "--scores", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reduced_verify_passes_and_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let verify = |report: &str| {
        let o = run(
            &[
                "verify", "--trials", "5", "--max-n", "10", "--seed", "4", "--report", report,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join(report)).unwrap())
                .unwrap();
        v.as_object_mut().unwrap().remove("elapsed_secs");
        v
    };
    let a = verify("a.json");
    assert_eq!(a["checks"].as_array().unwrap().len(), 7);
    assert_eq!(a, verify("b.json"));
}

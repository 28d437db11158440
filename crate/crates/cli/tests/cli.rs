//! Drives the installed binary end to end: every subcommand, the exit-code
//! contract, and byte-level determinism of the model documents.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SLIM_CONFIG: &str = r#"
[model]
family = "slim"

[model.coefficients]
intercept = { min = -4, max = 4 }
default = { min = -2, max = 2 }

[penalty]
c0 = 0.05
"#;

const SEPARABLE_CSV: &str = "\
x1,x2,label
2,0.5,1
1,1.5,1
2,-0.5,1
1,0.25,1
2,1.0,1
-1,0.5,-1
-2,-0.5,-1
-1,-1.5,-1
-2,0.25,-1
-1,-1.0,-1
";

fn write_fixture(dir: &Path, config: &str, csv: &str) -> (String, String) {
    let cfg = dir.join("run.toml");
    let data = dir.join("train.csv");
    fs::write(&cfg, config).expect("write config");
    fs::write(&data, csv).expect("write data");
    (
        cfg.to_str().expect("utf8").to_string(),
        data.to_str().expect("utf8").to_string(),
    )
}

fn intscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn train_writes_the_advertised_outputs() {
    let tmp = TempDir::new().expect("tempdir");
    let (cfg, data) = write_fixture(tmp.path(), SLIM_CONFIG, SEPARABLE_CSV);
    let out_dir = tmp.path().join("out");
    let out = intscore(&[
        "train",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out-dir",
        out_dir.to_str().expect("utf8"),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).expect("utf8");
    assert!(stdout.contains("PREDICT +1 IF SCORE >"));
    assert!(stdout.contains("status optimal"));

    let doc = fs::read_to_string(out_dir.join("model.json")).expect("document");
    let parsed: serde_json::Value = serde_json::from_str(&doc).expect("valid json");
    assert_eq!(parsed["family"], "slim");
    assert!(parsed["coefficients"].as_array().expect("array").len() == 3);

    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).expect("metrics");
    assert!(metrics.starts_with("error,weighted_error,tpr,fpr,"));
    assert_eq!(metrics.lines().count(), 2);

    let text = fs::read_to_string(out_dir.join("model.txt")).expect("text form");
    assert!(stdout.starts_with(&text));
}

#[test]
fn identical_runs_produce_byte_identical_documents() {
    let tmp = TempDir::new().expect("tempdir");
    let (cfg, data) = write_fixture(tmp.path(), SLIM_CONFIG, SEPARABLE_CSV);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = intscore(&[
            "train",
            "--config",
            &cfg,
            "--data",
            &data,
            "--seed",
            "7",
            "--out-dir",
            dir.to_str().expect("utf8"),
        ]);
        assert_eq!(exit_code(&out), 0);
    }
    let da = fs::read(a.join("model.json")).expect("first document");
    let db = fs::read(b.join("model.json")).expect("second document");
    assert_eq!(da, db);
}

#[test]
fn configuration_problems_exit_2() {
    let tmp = TempDir::new().expect("tempdir");
    let no_penalty = "[model]\nfamily = \"slim\"\n";
    let (cfg, data) = write_fixture(tmp.path(), no_penalty, SEPARABLE_CSV);
    let out = intscore(&["train", "--config", &cfg, "--data", &data]);
    assert_eq!(exit_code(&out), 2);

    let missing = tmp.path().join("absent.toml");
    let out = intscore(&[
        "train",
        "--config",
        missing.to_str().expect("utf8"),
        "--data",
        &data,
    ]);
    assert_eq!(exit_code(&out), 2);

    // No data path configured or passed.
    let out = intscore(&["train", "--config", &cfg]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn impossible_constraints_exit_3() {
    let tmp = TempDir::new().expect("tempdir");
    let config = format!(
        "{SLIM_CONFIG}\n[constraints]\nmax_fpr = 0.0\nmax_fnr = 0.0\n"
    );
    let xor = "\
a,b,label
0,0,-1
1,1,-1
0,1,1
1,0,1
";
    let (cfg, data) = write_fixture(tmp.path(), &config, xor);
    let out = intscore(&["train", "--config", &cfg, "--data", &data]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn limit_without_incumbent_exits_4() {
    let tmp = TempDir::new().expect("tempdir");
    let config = format!("{SLIM_CONFIG}\n[solve]\nnode_limit = 0\nwarm_start = false\n");
    let (cfg, data) = write_fixture(tmp.path(), &config, SEPARABLE_CSV);
    let out = intscore(&["train", "--config", &cfg, "--data", &data]);
    assert_eq!(exit_code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cross_validation_writes_fold_table() {
    let tmp = TempDir::new().expect("tempdir");
    let (cfg, data) = write_fixture(tmp.path(), SLIM_CONFIG, SEPARABLE_CSV);
    let out_dir = tmp.path().join("out");
    let out = intscore(&[
        "cv",
        "--config",
        &cfg,
        "--data",
        &data,
        "--folds",
        "5",
        "--out-dir",
        out_dir.to_str().expect("utf8"),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).expect("utf8");
    assert!(stdout.contains("cv error"));
    assert!(stdout.contains("over 5 folds"));

    let table = fs::read_to_string(out_dir.join("cv_metrics.csv")).expect("table");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "fold,train_error,test_error,model_size,status,gap");
    assert_eq!(lines.len(), 6);
    assert!(out_dir.join("model.json").exists());
}

#[test]
fn sweep_writes_the_path_table() {
    let tmp = TempDir::new().expect("tempdir");
    let config = format!("{SLIM_CONFIG}\n[sweep]\npoints = 6\n");
    let (cfg, data) = write_fixture(tmp.path(), &config, SEPARABLE_CSV);
    let out_dir = tmp.path().join("out");
    let out = intscore(&[
        "sweep",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out-dir",
        out_dir.to_str().expect("utf8"),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("path.csv")).expect("table");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "c0,train_error,test_error,model_size");
    assert_eq!(lines.len(), 7);
    // Large penalties must drive the model to size zero.
    assert!(lines[6].ends_with(",0"));
}

#[test]
fn reduce_and_bounds_write_reports() {
    let tmp = TempDir::new().expect("tempdir");
    let (cfg, data) = write_fixture(tmp.path(), SLIM_CONFIG, SEPARABLE_CSV);
    let out_dir = tmp.path().join("out");
    let od = out_dir.to_str().expect("utf8");

    let out = intscore(&["reduce", "--config", &cfg, "--data", &data, "--out-dir", od]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("reduction_report.csv")).expect("report");
    assert!(report.starts_with("index,baseline_label,variant_objective,removed"));
    assert_eq!(report.lines().count(), 11);

    let train_out = intscore(&["train", "--config", &cfg, "--data", &data, "--out-dir", od]);
    assert_eq!(exit_code(&train_out), 0);
    let model_path = out_dir.join("model.json");
    let out = intscore(&[
        "bounds",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out-dir",
        od,
        "--model",
        model_path.to_str().expect("utf8"),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).expect("utf8");
    assert!(stdout.contains("hypothesis count"));
    assert!(stdout.contains("generalization gap"));
    assert!(stdout.contains("rank-1 margin grid bound"));
    let density = fs::read_to_string(out_dir.join("density_table.csv")).expect("density");
    assert!(density.starts_with("p,lambda,coprime_count,density,gap_improvement"));
}

#[test]
fn render_reloads_documents_exactly() {
    let tmp = TempDir::new().expect("tempdir");
    let (cfg, data) = write_fixture(tmp.path(), SLIM_CONFIG, SEPARABLE_CSV);
    let out_dir = tmp.path().join("out");
    let od = out_dir.to_str().expect("utf8");
    let out = intscore(&["train", "--config", &cfg, "--data", &data, "--out-dir", od]);
    assert_eq!(exit_code(&out), 0);
    let model_path = out_dir.join("model.json");
    let mp = model_path.to_str().expect("utf8");

    // The machine form round-trips byte for byte through a reload.
    let out = intscore(&["render", "--model", mp, "--format", "machine"]);
    assert_eq!(exit_code(&out), 0);
    let doc = fs::read(&model_path).expect("document");
    assert_eq!(out.stdout, doc);

    let out = intscore(&["render", "--model", mp, "--format", "score-function"]);
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .expect("utf8")
        .contains("score(x) ="));

    let out = intscore(&["render", "--model", mp, "--format", "latex"]);
    assert_eq!(exit_code(&out), 2);
}

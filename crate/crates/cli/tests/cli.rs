use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const ITEMS: [&str; 20] = [
    "P1_SLPN", "P1_SLPD", "P1_PAIN", "P1_URIN", "P1_CNST", "P1_LTHD", "P1_FATG", "P2_SPCH", "P2_SALV", "P2_SWAL",
    "P2_EAT", "P2_DRES", "P2_HYGN", "P2_HWRT", "P2_HOBB", "P2_TURN", "P2_TRMR", "P2_RISE", "P2_WALK", "P2_FREZ",
];

fn pqscreen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqscreen"))
        .args(args)
        .current_dir(dir)
        .env_remove("PQSCREEN_JOBS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Asserts a failure with a single `error: kind=<kind> msg=...` line.
fn failed(out: &Output, kind: &str) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error: kind={kind} msg=")), "{err}");
    err
}

fn synth(dir: &Path, name: &str, normals: &str, pd: &str) -> PathBuf {
    ok(&pqscreen(
        &["synth", "--normals", normals, "--pd", pd, "--visits-normal", "2", "--visits-pd", "3", "--seed", "42", "--out", name],
        dir,
    ));
    dir.join(name)
}

fn score_json(args: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let mut full = vec!["score"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(&pqscreen(&full, dir.path()))).unwrap()
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(synth(dir.path(), "a.csv", "10", "15")).unwrap();
    let b = std::fs::read(synth(dir.path(), "b.csv", "10", "15")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("SUBJECT_ID,VISIT,LABEL,P1_SLPN"));
    assert!(header.ends_with("P2_FREZ,GENDER,AGE"));
    assert!(dir.path().join("a.moments.csv").exists());
    let run: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 42);
    assert_eq!(run["toolkit_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn synth_rejects_zero_normals() {
    let dir = tempfile::tempdir().unwrap();
    let out = pqscreen(&["synth", "--normals", "0", "--pd", "5", "--seed", "1", "--out", "x.csv"], dir.path());
    failed(&out, "usage");
    assert_eq!(out.status.code(), Some(2));
    let out = pqscreen(&["synth", "--normals", "5", "--pd", "5", "--out", "x.csv"], dir.path());
    failed(&out, "usage");
}

#[test]
fn score_builtin_model_cases() {
    let v = score_json(&["--model", "paper-eq1", "--set", "P2_TRMR=4", "--age", "66", "--gender", "1"]);
    assert!(v["probability"].as_f64().unwrap() > 0.9999);
    let v = score_json(&["--model", "paper-eq1"]);
    assert_eq!(v["linear_score"].as_f64().unwrap(), 0.54813);
    assert!((v["probability"].as_f64().unwrap() - 0.6337).abs() < 1e-4);
    assert_eq!(v["run_config"]["command"], "score");
    assert_eq!(v["toolkit_version"], env!("CARGO_PKG_VERSION"));
    let v = score_json(&["--json", r#"{"features": {"P2_EAT": 2}, "age": 66.42}"#]);
    let expected = 0.54813 + 2.0 * 2.2193 - 0.031956 * 66.42;
    assert!((v["linear_score"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn score_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = failed(&pqscreen(&["score", "--set", "P1_PAIN=7"], dir.path()), "validation");
    assert!(err.contains("features.P1_PAIN"));
    failed(&pqscreen(&["score", "--set", "P9_XYZ=1"], dir.path()), "validation");
    failed(&pqscreen(&["score", "--model", "missing.json"], dir.path()), "io");
    std::fs::write(dir.path().join("bad.json"), r#"{"schema_version": 99}"#).unwrap();
    failed(&pqscreen(&["score", "--model", "bad.json"], dir.path()), "artifact");
}

#[test]
fn cv_record_logistic_ten_reps() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "c.csv", "20", "30");
    let out = pqscreen(
        &[
            "cv", "--data", data.to_str().unwrap(), "--scheme", "record", "--selector", "wilcoxon", "--model",
            "logistic", "--reps", "10", "--seed", "7", "--out-dir", "out",
        ],
        dir.path(),
    );
    let stdout = ok(&out);
    assert!(stdout.contains("total-score baseline AUC"));
    let report: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/cv_record_wise_wilcoxon_logistic.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["report"]["records"].as_array().unwrap().len(), 100);
    assert_eq!(report["run_config"]["repetitions"], 10);
    assert_eq!(report["run_config"]["seed"], 7);
    let csv = std::fs::read_to_string(dir.path().join("out/cv_record_wise_wilcoxon_logistic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(dir.path().join("out/cv_record_wise_wilcoxon_logistic.csv.run.json").exists());
}

#[test]
fn cv_subject_scheme_on_tiny_cohort_is_fold_plan_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("SUBJECT_ID,VISIT,LABEL");
    for i in ITEMS {
        csv.push(',');
        csv.push_str(i);
    }
    csv.push_str(",GENDER,AGE\n");
    for (id, label) in [("n1", 0), ("p1", 1)] {
        for visit in 0..3 {
            csv.push_str(&format!("{id},{visit},{label}"));
            for _ in ITEMS {
                csv.push_str(&format!(",{label}"));
            }
            csv.push_str(",0,60\n");
        }
    }
    std::fs::write(dir.path().join("tiny.csv"), csv).unwrap();
    let out = pqscreen(&["cv", "--data", "tiny.csv", "--scheme", "subject", "--seed", "1"], dir.path());
    failed(&out, "fold_plan");
}

#[test]
fn cv_full_grid_writes_twelve_reports_and_compare_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "c.csv", "15", "20");
    ok(&pqscreen(
        &[
            "cv", "--data", data.to_str().unwrap(), "--scheme", "subject", "--selector", "all", "--model", "all",
            "--reps", "1", "--k", "3", "--inner-k", "3", "--tune-budget", "4", "--seed", "3", "--out-dir", "grid",
        ],
        dir.path(),
    ));
    let reports: Vec<PathBuf> = std::fs::read_dir(dir.path().join("grid"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && !p.to_string_lossy().ends_with(".run.json"))
        .collect();
    assert_eq!(reports.len(), 12);

    let mut args = vec!["compare".to_string(), "--reports".into()];
    args.extend(reports.iter().map(|p| p.to_string_lossy().into_owned()));
    args.extend(["--metric".into(), "auc".into(), "--out".into(), "cmp.csv".into()]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&pqscreen(&argv, dir.path()));
    let table = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert_eq!(table.lines().count(), 13);
    assert!(dir.path().join("cmp.pairwise.csv").exists());
    assert!(dir.path().join("cmp.csv.run.json").exists());
}

#[test]
fn train_importance_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "c.csv", "20", "30");
    let d = data.to_str().unwrap();
    ok(&pqscreen(&["train", "--data", d, "--model", "forest", "--n-trees", "60", "--seed", "2", "--out", "f.json"], dir.path()));
    let artifact: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(artifact["schema_version"], 1);
    assert_eq!(artifact["model_type"], "forest");
    assert_eq!(artifact["training"]["run_config"]["command"], "train");

    ok(&pqscreen(&["importance", "--model", "f.json", "--seed", "4", "--out", "imp.csv"], dir.path()));
    let imp = std::fs::read_to_string(dir.path().join("imp.csv")).unwrap();
    assert_eq!(imp.lines().count(), 23);

    let mut stripped = artifact.clone();
    stripped["training"]["data_path"] = Value::Null;
    std::fs::write(dir.path().join("nodata.json"), stripped.to_string()).unwrap();
    let err = failed(&pqscreen(&["importance", "--model", "nodata.json", "--seed", "4", "--out", "x.csv"], dir.path()), "missing_data");
    assert!(err.contains("--data"));
    ok(&pqscreen(&["importance", "--model", "nodata.json", "--data", d, "--seed", "4", "--out", "x.csv"], dir.path()));

    let other = synth(dir.path(), "other.csv", "21", "30");
    failed(
        &pqscreen(&["importance", "--model", "f.json", "--data", other.to_str().unwrap(), "--seed", "4", "--out", "y.csv"], dir.path()),
        "artifact",
    );

    ok(&pqscreen(&["train", "--data", d, "--model", "logistic", "--selector", "wilcoxon", "--seed", "2", "--out", "l.json"], dir.path()));
    let v: Value = serde_json::from_str(&ok(&pqscreen(&["score", "--model", "l.json", "--set", "P2_TRMR=3"], dir.path()))).unwrap();
    let p = v["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    failed(&pqscreen(&["importance", "--model", "l.json", "--seed", "1", "--out", "z.csv"], dir.path()), "usage");
}

#[test]
fn jobs_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "c.csv", "12", "12");
    let out = Command::new(env!("CARGO_BIN_EXE_pqscreen"))
        .args(["cv", "--data", data.to_str().unwrap(), "--reps", "1", "--k", "3", "--seed", "1", "--out-dir", "o"])
        .current_dir(dir.path())
        .env("PQSCREEN_JOBS", "2")
        .output()
        .unwrap();
    ok(&out);
    let out = Command::new(env!("CARGO_BIN_EXE_pqscreen"))
        .args(["score"])
        .env("PQSCREEN_JOBS", "0")
        .output()
        .unwrap();
    failed(&out, "usage");
}

#[test]
fn correlate_requires_hy() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "c.csv", "5", "5");
    failed(&pqscreen(&["correlate", "--data", data.to_str().unwrap(), "--out", "r.csv"], dir.path()), "missing_column");
}

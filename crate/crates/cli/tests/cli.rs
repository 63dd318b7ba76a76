//! Command-line behaviour: exit codes, output formats and small runs.

use std::path::Path;
use std::process::{Command, Output};

fn cac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cac")).args(args).env_remove("CAC_SEED").output().expect("spawn cac")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, n: usize) -> String {
    let o = cac(&["synth", "--n", &n.to_string(), "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("manifest.csv").to_str().unwrap().to_owned()
}

#[test]
fn triage_table_and_csv() {
    let o = cac(&["triage", "--sens", "0.9", "--spec", "0.31", "--prev", "0.01,0.05,0.10,0.30"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for gain in ["+44%", "+43%", "+41%", "+33%"] {
        assert!(text.contains(gain), "{gain} missing from:\n{text}");
    }
    let o = cac(&["triage", "--sens", "0.9", "--spec", "0.31", "--prev", "0.3", "--csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prevalence,sensitivity,specificity,lift,gain_percent"));
    assert!(lines.next().unwrap().ends_with(",33"));
}

#[test]
fn input_errors_exit_with_2() {
    assert_eq!(cac(&["triage", "--sens", "0.9", "--spec", "1.0", "--prev", "0.0"]).status.code(), Some(2));
    assert_eq!(cac(&["triage", "--sens", "1.5", "--spec", "0.3", "--prev", "0.1"]).status.code(), Some(2));
    assert_eq!(cac(&["synth"]).status.code(), Some(2));
    assert_eq!(cac(&["frobnicate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("manifest.csv");
    std::fs::write(&bad, "individual_id,facility\nx,F1\n").unwrap();
    let o = cac(&["train", "--manifest", bad.to_str().unwrap(), "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn synth_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, mb) = (synth(a.path(), 30), synth(b.path(), 30));
    assert_eq!(std::fs::read(ma).unwrap(), std::fs::read(mb).unwrap());
    assert_eq!(std::fs::read_dir(a.path().join("audio")).unwrap().count(), 90);
}

#[test]
fn untrained_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("data"), 120);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = cac(&["train", "--manifest", &manifest, "--out", run_s, "--epochs", "0", "--models", "conv_ls,linear"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in 0..5 {
        assert!(run.join(format!("checkpoints/fold{f}_conv_ls.cmdl")).is_file());
    }
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["epochs"], 0);

    // A single random network is a fixed random function of its input and
    // can correlate with the labels either way on ten-individual folds; the
    // expectation over initialisations is what sits at chance.
    let mut means = Vec::new();
    for seed in 1..=8 {
        let r = dir.path().join(format!("untrained{seed}"));
        let o = cac(&["train", "--manifest", &manifest, "--out", r.to_str().unwrap(), "--epochs", "0", "--models", "conv_ls", "--seed", &seed.to_string()]);
        assert!(o.status.success());
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(r.join("metrics.json")).unwrap()).unwrap();
        let aucs: Vec<f64> = m["folds"].as_array().unwrap().iter().map(|f| f["models"]["conv_ls"]["auc"].as_f64().unwrap()).collect();
        means.push(aucs.iter().sum::<f64>() / aucs.len() as f64);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!((mean - 0.5).abs() <= 0.1, "untrained AUC over seeds {means:?}");

    let o = cac(&["eval", "--run", run_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    for key in ["auc_mean", "auc_std", "spec_at_90sens"] {
        assert!(summary[key].is_number(), "{key}");
    }
    // One row per distinct threshold plus the two endpoints.
    let scores = run.join("predictions/conv_ls_individuals.csv");
    let mut rdr = csv::Reader::from_path(&scores).unwrap();
    let mut distinct: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let roc_rows = csv::Reader::from_path(run.join("roc/conv_ls.csv")).unwrap().records().count();
    assert_eq!(roc_rows, distinct.len() + 2);

    let out = dir.path().join("ens");
    std::fs::create_dir_all(&out).unwrap();
    let o = cac(&[
        "ensemble",
        "--pred",
        scores.to_str().unwrap(),
        run.join("predictions/linear_individuals.csv").to_str().unwrap(),
        "--folds",
        run.join("folds.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("stacked_individuals.csv").is_file());

    let o = cac(&["triage", "--scores", scores.to_str().unwrap(), "--prev", "0.05"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("prevalence"));

    let inf = dir.path().join("inf");
    std::fs::create_dir_all(&inf).unwrap();
    let ck = run.join("checkpoints/fold0_conv_ls.cmdl");
    let o = cac(&["infer", "--checkpoint", ck.to_str().unwrap(), "--manifest", &manifest, "--out", inf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv::Reader::from_path(inf.join("individuals.csv")).unwrap().records().count(), 120);
}

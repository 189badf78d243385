use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlt::io::{matrix_to_csv, read_matrix, read_params};

fn mlt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlt"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("MLT_THREADS", "1")
        .output()
        .expect("run mlt")
}

fn ok(args: &[&str]) {
    let out = mlt(args);
    assert!(
        out.status.success(),
        "mlt {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--n-regions", "20", "--n-subjects", "24", "--seed", seed, "--out", s(dir)]);
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, "11");
    synth(&b, "11");
    let fa = files(&a);
    assert!(fa.len() >= 9, "{fa:?}");
    for p in &fa {
        let q = b.join(p.file_name().unwrap());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(&q).unwrap(), "{}", p.display());
    }
    let c = t.path().join("c");
    synth(&c, "12");
    assert_ne!(std::fs::read(a.join("scans.jsonl")).unwrap(), std::fs::read(c.join("scans.jsonl")).unwrap());
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(mlt(&["--help"]).status.code(), Some(0));
    assert_eq!(mlt(&["fit", "--bogus"]).status.code(), Some(64));
    assert_eq!(mlt(&["frobnicate"]).status.code(), Some(64));
    let missing = t.path().join("nothing");
    let out = s(&t.path().join("o")).to_string();
    assert_eq!(mlt(&["fit", "--data", s(&missing), "--out", &out]).status.code(), Some(2));

    let data = t.path().join("d");
    synth(&data, "1");
    let cfg = t.path().join("bad.json");
    std::fs::write(&cfg, "{\"no_such_key\": 1}").unwrap();
    let code = mlt(&["fit", "--data", s(&data), "--config", s(&cfg), "--out", &out]).status.code();
    assert_eq!(code, Some(2));

    // A runaway coupling makes the flow blow up: a numerical failure.
    let mut p = read_params(data.join("truth_params.json")).unwrap();
    p.lambda_s = 400.0;
    p.lambda_f = 400.0;
    let bad = t.path().join("unstable.json");
    mlt::io::write_params(&bad, &p).unwrap();
    let o = mlt(&["predict", "--data", s(&data), "--params", s(&bad), "--out", &out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sc_only_fit_ignores_fc_file() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    synth(&data, "2");
    let fc = read_matrix(data.join("fc.csv")).unwrap();
    let other = t.path().join("fc_other.csv");
    std::fs::write(&other, matrix_to_csv(&fc.map(|v| (v * 2.0).min(1.0)))).unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let common = ["--ablation", "sc", "--folds", "0", "--max-iters", "10", "--data", s(&data)];
    let mut args_a = vec!["fit"];
    args_a.extend(common);
    args_a.extend(["--out", s(&a)]);
    ok(&args_a);
    let mut args_b = vec!["fit"];
    args_b.extend(common);
    args_b.extend(["--fc", s(&other), "--out", s(&b)]);
    ok(&args_b);
    assert_eq!(std::fs::read(a.join("params.json")).unwrap(), std::fs::read(b.join("params.json")).unwrap());
    assert_eq!(std::fs::read(a.join("fit.json")).unwrap(), std::fs::read(b.join("fit.json")).unwrap());
}

#[test]
fn full_pipeline_produces_report_tables() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, "3");
    let d = s(&data);
    let fit = t.path().join("fit");
    ok(&["fit", "--data", d, "--folds", "2", "--max-iters", "5", "--out", s(&fit)]);
    let params = fit.join("params.json");
    let an = t.path().join("an");
    ok(&["predict", "--data", d, "--params", s(&params), "--trajectory", "S0001", "--out", s(&an)]);
    ok(&["decompose", "--data", d, "--params", s(&params), "--out", s(&an)]);
    let dec = an.join("decomposition.json");
    ok(&["analyze", "autocorr", "--data", d, "--out", s(&an)]);
    ok(&["analyze", "spin", "--data", d, "--n-perm", "50", "--out", s(&an)]);
    ok(&["analyze", "dominance", "--data", d, "--decomp", s(&dec), "--out", s(&an)]);
    ok(&["analyze", "rates", "--data", d, "--out", s(&an)]);
    ok(&["analyze", "gam", "--data", d, "--out", s(&an)]);
    ok(&["lasso", "--data", d, "--decomp", s(&dec), "--n-boot", "10", "--out", s(&an)]);
    ok(&["mediate", "--data", d, "--decomp", s(&dec), "--n-boot", "50", "--out", s(&an)]);
    let rep = t.path().join("rep");
    ok(&["report", "--in", s(&fit), "--in", s(&an), "--out", s(&rep)]);
    for (table, _) in mlt::cli::REPORT_TABLES {
        let text = std::fs::read_to_string(rep.join(table)).unwrap();
        assert!(text.lines().count() >= 2, "{table} is empty");
    }
    for name in ["predictions.csv", "errors.json", "trajectory.csv", "spin.json", "gam.csv", "mediation.json"] {
        assert!(an.join(name).is_file(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(an.join("predict.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 5);
}

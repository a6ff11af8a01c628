use std::path::Path;
use std::process::{Command, Output};

use gmje::eval::distance_to_branches;
use gmje::synth::DatasetKind;

fn gmje(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmje")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = gmje(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null)
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn rows(path: impl AsRef<Path>) -> Vec<Vec<f64>> {
    read(path).lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn gen_data_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--out", "a"]);
    ok(d, &["gen-data", "--out", "b"]);
    let csv = read(d.join("a/dataset.csv"));
    assert_eq!(csv.lines().count(), 3001);
    assert_eq!(csv.lines().next().unwrap(), "x_c,x_t,branch_id");
    assert_eq!(csv, read(d.join("b/dataset.csv")));
    let meta: serde_json::Value = serde_json::from_str(&read(d.join("a/dataset.json"))).unwrap();
    assert_eq!(meta["seed"], 111);
    let cfg = read(d.join("a/config.txt"));
    assert!(cfg.contains("seed = 111") && cfg.contains("n = 3000"));
}

#[test]
fn noiseless_data_lies_on_the_curves() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--kind", "B", "--noise", "0", "--n", "500", "--out", "d"]);
    for r in rows(dir.path().join("d/dataset.csv")) {
        assert!((r[1] - DatasetKind::B.branch(r[2] as usize, r[0])).abs() < 1e-12);
    }
}

#[test]
fn config_file_layers_under_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.txt"), "# small run\nn = 40\nnoise = 0.1\n").unwrap();
    ok(d, &["gen-data", "--config", "c.txt", "--set", "n=25", "--out", "x"]);
    assert_eq!(read(d.join("x/dataset.csv")).lines().count(), 26);
    assert!(read(d.join("x/config.txt")).contains("noise = 0.1"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(gmje(d, &["gen-data", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(gmje(d, &["gen-data", "--kind", "Z"]).status.code(), Some(1));
    assert_eq!(gmje(d, &["fit", "--model", "nope"]).status.code(), Some(1));
    assert_eq!(gmje(d, &["fit", "--data", "missing.csv"]).status.code(), Some(1));
    assert_eq!(gmje(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(gmje(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn every_variant_fits_predicts_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--n", "400", "--out", "data"]);
    for model in ["jepa-mse", "gje-dual-rbf", "gmje-em-1", "gmje-em-3", "gmje-gng", "gmje-mdn"] {
        let fit_dir = format!("fit-{model}");
        let m = ok(
            d,
            &["fit", "--model", model, "--data", "data/dataset.csv", "--epochs", "30", "--set", "gng_steps=2000", "--out", &fit_dir],
        );
        assert_eq!(m["model"], model);
        for f in ["model.json", "metrics.json", "config.txt"] {
            assert!(d.join(&fit_dir).join(f).exists(), "{model}: missing {f}");
        }
        let pred_dir = format!("pred-{model}");
        ok(d, &["predict", "--model-file", &format!("{fit_dir}/model.json"), "--grid", "50", "--out", &pred_dir]);
        let p = rows(d.join(&pred_dir).join("predictions.csv"));
        assert_eq!(p.len(), 50);
        assert!(p.iter().flatten().all(|v| v.is_finite()));
        let sampled = gmje(d, &["sample", "--model-file", &format!("{fit_dir}/model.json"), "--n", "20", "--out", "s"]);
        let expect = if matches!(model, "jepa-mse" | "gje-dual-rbf") { 1 } else { 0 };
        assert_eq!(sampled.status.code(), Some(expect), "{model}");
    }
    let m: serde_json::Value = serde_json::from_str(&read(d.join("fit-gmje-em-1/metrics.json"))).unwrap();
    assert!(m["cov_trace"][0].as_f64().unwrap() > 0.2);
}

#[test]
fn jepa_predictions_have_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--n", "200", "--out", "data"]);
    ok(d, &["fit", "--model", "jepa-mse", "--data", "data/dataset.csv", "--epochs", "10", "--out", "f"]);
    ok(d, &["predict", "--model-file", "f/model.json", "--out", "p"]);
    let p = rows(d.join("p/predictions.csv"));
    assert_eq!(p.len(), 300);
    assert!(p.iter().all(|r| r.len() == 2));
}

#[test]
fn em3_samples_are_gaussian_and_near_the_branches() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--out", "data"]);
    ok(d, &["fit", "--model", "gmje-em-3", "--data", "data/dataset.csv", "--out", "f"]);
    ok(d, &["sample", "--model-file", "f/model.json", "--n", "5000", "--out", "s1"]);
    ok(d, &["sample", "--model-file", "f/model.json", "--n", "5000", "--out", "s2"]);
    assert_eq!(read(d.join("s1/samples.csv")), read(d.join("s2/samples.csv")));

    let model: serde_json::Value = serde_json::from_str(&read(d.join("f/model.json"))).unwrap();
    let mixture: gmje::mixture::JointMixture = serde_json::from_value(model["mixture"].clone()).unwrap();
    let samples = rows(d.join("s1/samples.csv"));
    let mut inside = 0;
    let mut dist = 0.0;
    for s in &samples {
        let comp = &mixture.components()[s[2] as usize];
        let factor = gmje::linalg::factor_with_policy(&comp.full_cov()).unwrap();
        let z = nalgebra::DVector::from_vec(vec![s[0], s[1]]) - comp.full_mean();
        if factor.mahalanobis(&z).sqrt() <= 3.0 {
            inside += 1;
        }
        dist += distance_to_branches(DatasetKind::A, s[0], s[1]);
    }
    assert!(inside as f64 / samples.len() as f64 >= 0.95);
    assert!(dist / samples.len() as f64 <= 0.2);
}

#[test]
fn smc_sim_outputs_and_uniform_stream_ess() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = ok(d, &["smc-sim", "--steps", "300", "--set", "rare_freq=0.1", "--out", "u"]);
    assert!(s["mean_ess"].as_f64().unwrap() >= 0.7 * 256.0);
    assert_eq!(s["bank_ess_reset"], true);
    let csv = read(d.join("u/metrics.csv"));
    assert_eq!(csv.lines().count(), 301);
    ok(d, &["smc-sim", "--steps", "300", "--set", "rare_freq=0.1", "--out", "v"]);
    assert_eq!(csv, read(d.join("v/metrics.csv")));
    assert!(d.join("u/summary.json").exists() && d.join("u/config.txt").exists());
    assert_eq!(gmje(d, &["smc-sim", "--set", "resample=sometimes"]).status.code(), Some(1));
    ok(d, &["smc-sim", "--steps", "50", "--set", "resample=ess_below:0.5", "--out", "e"]);
}

#[test]
fn diagnostics_pass_and_injection_fails_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let clean = gmje(d, &["diagnostics", "--out", "r"]);
    assert_eq!(clean.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&read(d.join("r/report.json"))).unwrap();
    assert_eq!(report["all_pass"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["residual"].is_number() && c["tolerance"].is_number()));

    let bad = gmje(d, &["diagnostics", "--inject", "asymmetric_cov"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("asymmetric"));
}

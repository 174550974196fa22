use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logshift"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn logshift")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "logshift {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

/// Simulates p = 8, K = 2 data with a validation sample into `dir`.
fn simulate(dir: &Path) -> (Vec<PathBuf>, Vec<PathBuf>) {
    ok(&["simulate", "--p", "8", "--k", "2", "--n", "60,50", "--n-validation", "40,40", "--seed", "3", "--out", s(dir)]);
    let g = (1..=2).map(|k| dir.join(format!("group_{k}.csv"))).collect();
    let v = (1..=2).map(|k| dir.join(format!("validation_{k}.csv"))).collect();
    (g, v)
}

#[test]
fn simulate_writes_groups_and_truth() {
    let d = tempfile::tempdir().unwrap();
    let (groups, vals) = simulate(d.path());
    let g1 = fs::read_to_string(&groups[0]).unwrap();
    assert_eq!(g1.lines().count(), 61);
    assert_eq!(g1.lines().next().unwrap().split(',').count(), 8);
    assert_eq!(fs::read_to_string(&groups[1]).unwrap().lines().count(), 51);
    assert_eq!(fs::read_to_string(&vals[0]).unwrap().lines().count(), 41);

    let truth = json(&d.path().join("truth.json"));
    assert_eq!(truth["schema_version"], 1);
    let support = truth["support"].as_array().unwrap();
    assert!(support.iter().all(|e| {
        let (i, j) = (e[0].as_u64().unwrap(), e[1].as_u64().unwrap());
        j == i + 1
    }));

    let again = tempfile::tempdir().unwrap();
    simulate(again.path());
    assert_eq!(fs::read(&groups[0]).unwrap(), fs::read(again.path().join("group_1.csv")).unwrap());
}

#[test]
fn fit_is_deterministic_and_reports() {
    let d = tempfile::tempdir().unwrap();
    let (groups, _) = simulate(d.path());
    let a = d.path().join("a");
    let b = d.path().join("b");
    for out in [&a, &b] {
        ok(&["fit", s(&groups[0]), s(&groups[1]), "--gamma", "6", "--beta", "0.5", "--out", s(out)]);
    }
    for f in ["precision_1.csv", "precision_2.csv", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let rep = json(&a.join("report.json"));
    assert_eq!(rep["schema_version"], 1);
    let trace = rep["report"]["objective_trace"].as_array().unwrap();
    assert!(trace.windows(2).all(|w| w[1].as_f64().unwrap() <= w[0].as_f64().unwrap() + 1e-9));
}

#[test]
fn graphical_lasso_fit_reports_small_kkt_residual() {
    let d = tempfile::tempdir().unwrap();
    ok(&["simulate", "--p", "6", "--k", "1", "--n", "80", "--seed", "1", "--out", s(d.path())]);
    let out = d.path().join("fit");
    ok(&[
        "fit",
        s(&d.path().join("group_1.csv")),
        "--gamma", "5", "--beta", "inf", "--nu", "1",
        "--tol", "1e-9", "--max-iter", "20000", "--mm-tol", "1e-12",
        "--out", s(&out),
    ]);
    let kkt = json(&out.join("report.json"))["report"]["kkt_residual"].as_f64().unwrap();
    assert!(kkt <= 1e-4, "kkt residual {kkt}");
}

#[test]
fn saturated_model_warns() {
    let d = tempfile::tempdir().unwrap();
    ok(&["simulate", "--p", "6", "--k", "1", "--n", "4", "--seed", "1", "--out", s(d.path())]);
    let out = run(&["fit", s(&d.path().join("group_1.csv")), "--gamma", "0", "--out", s(&d.path().join("fit"))]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("saturated"));
}

#[test]
fn screen_matches_library_partition() {
    let d = tempfile::tempdir().unwrap();
    let (groups, _) = simulate(d.path());
    let out = ok(&["screen", s(&groups[0]), s(&groups[1]), "--gamma", "10", "--nu", "0.5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);

    let obs = logshift::dataio::load_csv(&groups, true).unwrap();
    let cov = logshift::dataio::sample_covariance(&obs);
    let hp = logshift::Hyperparams::new(10.0, f64::INFINITY, 0.5, 2).unwrap();
    let part = logshift::screening::screen(&cov, &hp);
    let blocks: Vec<Vec<usize>> = serde_json::from_value(v["blocks"].clone()).unwrap();
    assert_eq!(blocks, part.blocks);
    assert_eq!(v["edges_screened_out"].as_u64().unwrap() as usize, part.edges_screened_out());
}

#[test]
fn screen_diagonal_covariance_gives_singletons() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("cov.csv");
    fs::write(&f, "a,b,c\n2,0,0\n0,1,0\n0,0,3\n").unwrap();
    let out = ok(&["screen", s(&f), "--from-covariance", "--n", "50", "--gamma", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["blocks"], serde_json::json!([[0], [1], [2]]));
    assert_eq!(v["edges_screened_out"], 3);
}

#[test]
fn single_point_path_matches_fit() {
    let d = tempfile::tempdir().unwrap();
    let (groups, vals) = simulate(d.path());
    let grid = d.path().join("grid.json");
    fs::write(&grid, r#"[{"gamma": 6, "beta": 0.5}]"#).unwrap();
    let path_out = d.path().join("path");
    ok(&[
        "path", s(&groups[0]), s(&groups[1]), "--grid", s(&grid),
        "--validation", s(&vals[0]), s(&vals[1]), "--out", s(&path_out),
    ]);
    let fit_out = d.path().join("fit");
    ok(&["fit", s(&groups[0]), s(&groups[1]), "--gamma", "6", "--beta", "0.5", "--out", s(&fit_out)]);
    for f in ["precision_1.csv", "precision_2.csv"] {
        assert_eq!(
            fs::read(path_out.join("point_000").join(f)).unwrap(),
            fs::read(fit_out.join(f)).unwrap()
        );
    }
    let frontier = fs::read_to_string(path_out.join("frontier.tsv")).unwrap();
    assert_eq!(frontier.lines().count(), 2);
    assert!(frontier.starts_with("index\tgamma\tbeta"));
    let p = json(&path_out.join("path.json"));
    assert_eq!(p["schema_version"], 1);
    assert_eq!(p["selected"], 0);
}

#[test]
fn eval_scores_estimate() {
    let d = tempfile::tempdir().unwrap();
    let (groups, vals) = simulate(d.path());
    let fit_out = d.path().join("fit");
    ok(&["fit", s(&groups[0]), s(&groups[1]), "--gamma", "6", "--out", s(&fit_out)]);
    let out = ok(&[
        "eval",
        "--estimate", s(&fit_out.join("precision_1.csv")), s(&fit_out.join("precision_2.csv")),
        "--validation", s(&vals[0]), s(&vals[1]),
        "--truth", s(&d.path().join("truth.json")),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["negloglik"].as_f64().unwrap().is_finite());
    let re = v["relative_error"].as_f64().unwrap();
    assert!(re > 0.0 && re < 1.0);
    assert!(v["tp"].as_u64().is_some());
}

#[test]
fn prox_curve_prints_tsv() {
    let out = ok(&["prox-curve", "--gamma", "1", "--beta", "inf", "--y-min", "-2", "--y-max", "2", "--points", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split('\t').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(-2.0, -1.0), (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]);
}

#[test]
fn errors_exit_nonzero_without_partial_output() {
    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("nope.csv");
    let out = d.path().join("fit");
    let r = run(&["fit", s(&missing), "--gamma", "1", "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));
    assert!(!out.join("report.json").exists());

    let (groups, _) = simulate(d.path());
    let r = run(&["fit", s(&groups[0]), s(&groups[1]), "--gamma", "-1", "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(!out.join("precision_1.csv").exists());

    assert!(!run(&["prox-curve", "--gamma", "1", "--beta", "0"]).status.success());
}

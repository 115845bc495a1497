use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mapsieve"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = csv_rows(path);
    let c = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BOOT: &[&str] = &["--h-draws", "100", "--c-draws", "100", "--grid-t", "8", "--grid-x", "9"];

/// Simulated setup-2 series of length `n` in `dir`.
fn simulate(dir: &Path, delta: &str, n: &str) -> std::path::PathBuf {
    ok(&["--seed", "4", "--out-dir", s(dir), "simulate", "--setup", "2", "--delta", delta, "-n", n]);
    dir.join("simulated.csv")
}

#[test]
fn simulate_writes_requested_rows() {
    let dir = TempDir::new().unwrap();
    let path = simulate(dir.path(), "1", "100");
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["index", "t", "X"]);
    assert_eq!(rows.len(), 100);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[99][1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn simulate_with_lags_drops_leading_rows() {
    let dir = TempDir::new().unwrap();
    ok(&["--out-dir", s(dir.path()), "simulate", "-n", "50", "--lags", "2"]);
    let path = dir.path().join("simulated.csv");
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["index", "t", "X", "X_lag1", "X_lag2"]);
    assert_eq!(rows.len(), 48);
    let (x, lag2) = (column(&path, "X"), column(&path, "X_lag2"));
    assert_eq!(lag2[2], x[0]);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    simulate(a.path(), "0.5", "200");
    simulate(b.path(), "0.5", "200");
    for name in ["simulated.csv", "simulate.json"] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        if name.ends_with(".csv") {
            assert_eq!(x, y, "{name}");
        } else {
            let (mut x, mut y): (Value, Value) = (serde_json::from_slice(&x).unwrap(), serde_json::from_slice(&y).unwrap());
            x.as_object_mut().unwrap().remove("output");
            y.as_object_mut().unwrap().remove("output");
            assert_eq!(x, y);
        }
    }
}

#[test]
fn manifest_records_delta_and_seed() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "0.25", "60");
    let m = json(&dir.path().join("simulate.json"));
    assert_eq!(m["config"]["scenario"]["delta"], 0.25);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn pipeline_on_homogeneous_setup() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path());
    let data = simulate(dir.path(), "0", "400");
    let input = ["--input", s(&data), "--ar-lags", "1"];

    ok(&[&["--out-dir", out, "fit"][..], &input, &["--grid-t", "5", "--grid-x", "6"]].concat());
    let (header, rows) = csv_rows(&dir.path().join("fit_grid.csv"));
    assert_eq!(header, ["component", "t", "x", "m_hat"]);
    assert_eq!(rows.len(), 30);
    let fit = json(&dir.path().join("fit.json"));
    assert_eq!(fit["rows"], 399);
    assert_eq!(fit["beta"].as_array().unwrap().len(), fit["param_count"].as_u64().unwrap() as usize);
    assert!(fit["residual_variance"].as_f64().unwrap() > 0.0);

    ok(&[&["--out-dir", out, "scr"][..], &input, BOOT].concat());
    let scr = dir.path().join("scr.csv");
    let (header, rows) = csv_rows(&scr);
    assert_eq!(header, ["t", "x", "m_hat", "h_hat", "lower", "upper"]);
    assert_eq!(rows.len(), 72);
    let (lo, m, hi) = (column(&scr, "lower"), column(&scr, "m_hat"), column(&scr, "upper"));
    for k in 0..lo.len() {
        assert!(lo[k] <= m[k] && m[k] <= hi[k]);
    }
    let manifest = json(&dir.path().join("scr.json"));
    assert!(manifest["c_alpha"].as_f64().unwrap() > 0.0);

    ok(&[&["--out-dir", out, "test"][..], &input, BOOT, &["--kind", "homogeneity"]].concat());
    let report = &json(&dir.path().join("test.json"))["report"];
    assert_eq!(report["kind"], "homogeneity");
    let p = report["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(report["reject"].as_bool().unwrap(), report["statistic"].as_f64() > report["c_alpha"].as_f64());
    let (header, rows) = csv_rows(&dir.path().join("test_surface.csv"));
    assert_eq!(header, ["t", "x", "m_hat", "restricted", "lower", "upper"]);
    assert_eq!(rows.len(), 72);
}

#[test]
fn exact_test_of_fitted_surface_accepts() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "0", "300");
    let args = [&["--out-dir", s(dir.path()), "test", "--input", s(&data), "--ar-lags", "1"][..], BOOT].concat();
    ok(&[&args[..], &["--kind", "exact", "--m0-spec", "fitted"]].concat());
    let report = &json(&dir.path().join("test.json"))["report"];
    assert_eq!(report["statistic"], 0.0);
    assert_eq!(report["reject"], false);
    assert_eq!(report["p_value"], 1.0);
}

#[test]
fn exact_targets_from_expression_and_table_agree() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "0", "300");
    let args = [&["--out-dir", s(dir.path()), "test", "--input", s(&data), "--ar-lags", "1"][..], BOOT].concat();
    ok(&[&args[..], &["--m0-spec", "expr:0.3 * math::sin(2 * pi * t) * x"]].concat());
    let by_expr = json(&dir.path().join("test.json"))["report"].clone();

    let surface = dir.path().join("test_surface.csv");
    let (t, x) = (column(&surface, "t"), column(&surface, "x"));
    let mut table = String::from("t,x,m0\n");
    for k in 0..t.len() {
        let v = 0.3 * (2.0 * std::f64::consts::PI * t[k]).sin() * x[k];
        table.push_str(&format!("{:e},{:e},{:e}\n", t[k], x[k], v));
    }
    let target = dir.path().join("m0.csv");
    fs::write(&target, table).unwrap();
    let spec = format!("csv:{}", target.display());
    ok(&[&args[..], &["--m0-spec", &spec]].concat());
    let by_table = &json(&dir.path().join("test.json"))["report"];
    let (a, b) = (by_expr["statistic"].as_f64().unwrap(), by_table["statistic"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    assert_eq!(by_expr["reject"], by_table["reject"]);
}

#[test]
fn missing_covariate_column_is_an_ingest_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("data.csv");
    fs::write(&path, "Y,Z1\n1,2\n3,4\n").unwrap();
    let out = run(&["--out-dir", s(dir.path()), "fit", "--input", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "ingest");
    assert_eq!(err["error"]["column"], "X1");
}

#[test]
fn bad_cell_reports_row_and_column() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("data.csv");
    fs::write(&path, "Y,X1\n1,2\n3,nan\n").unwrap();
    let out = run(&["fit", "--input", s(&path)]);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["row"], 2);
    assert_eq!(err["error"]["column"], "X1");
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let out = run(&["fit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    let out = run(&["test", "--kind", "exact", "--m0-spec", "nonsense", "--input", "x.csv"]);
    assert_ne!(out.status.code(), Some(0));

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 1\n[sieve]\nwidth = 3\n").unwrap();
    let out = run(&["--config", s(&cfg), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!("seed = 9\nout_dir = \"{}\"\n[scenario]\nsetup = \"3\"\ndelta = 0.5\nn = 80\n", out.display()),
    )
    .unwrap();
    ok(&["--config", s(&cfg), "simulate", "-n", "70"]);
    let m = json(&out.join("simulate.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["scenario"]["setup"], "3");
    assert_eq!(m["config"]["scenario"]["n"], 70);
    assert_eq!(csv_rows(&out.join("simulated.csv")).1.len(), 70);
}

#[test]
fn emitted_floats_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "1", "300");
    ok(&["--out-dir", s(dir.path()), "fit", "--input", s(&data), "--ar-lags", "1", "--grid-t", "4", "--grid-x", "4"]);
    for path in [data, dir.path().join("fit_grid.csv")] {
        let (_, rows) = csv_rows(&path);
        for cell in rows.iter().flatten().filter(|c| c.contains('e')) {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(&format!("{v:.16e}"), cell);
        }
    }
}

#[test]
fn tune_writes_scores_and_selection() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "1", "400");
    ok(&[
        "--out-dir", s(dir.path()), "tune", "--input", s(&data), "--ar-lags", "1",
        "--c-grid", "2,3", "--d-grid", "2,3", "--m-grid", "3,4,5,6,7,8,10",
    ]);
    let (header, rows) = csv_rows(&dir.path().join("tune_cd.csv"));
    assert_eq!(header, ["c", "d", "score"]);
    assert_eq!(rows.len(), 4);
    let (_, rows) = csv_rows(&dir.path().join("tune_m.csv"));
    assert_eq!(rows.len(), 7);
    let m = json(&dir.path().join("tune.json"));
    let c = m["selection"]["c"].as_u64().unwrap();
    assert!(c == 2 || c == 3);
    let mm = m["selection"]["m"].as_u64().unwrap();
    assert!([3, 4, 5, 6, 7, 8, 10].contains(&mm));
}

const STUDY: &[&str] = &[
    "--seed", "2", "study", "--setup", "2", "--delta", "0", "-n", "200", "--mode", "homogeneity",
    "--h-draws", "100", "--c-draws", "100", "--grid-t", "6", "--grid-x", "6", "--centering-samples", "2000",
];

fn study(dir: &Path, extra: &[&str]) -> Output {
    ok(&[&["--out-dir", s(dir)][..], STUDY, extra].concat())
}

#[test]
fn single_replicate_study() {
    let dir = TempDir::new().unwrap();
    study(dir.path(), &["--replicates", "1"]);
    let (header, rows) = csv_rows(&dir.path().join("study.csv"));
    assert_eq!(header[0], "record");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "replicate");
    assert_eq!(rows[1][0], "summary");
    let m = json(&dir.path().join("study.json"));
    assert_eq!(m["summary"]["replicates"], 1);
}

#[test]
fn study_output_does_not_depend_on_workers() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    study(a.path(), &["--replicates", "4", "--workers", "1"]);
    study(b.path(), &["--replicates", "4", "--workers", "3"]);
    assert_eq!(fs::read(a.path().join("study.csv")).unwrap(), fs::read(b.path().join("study.csv")).unwrap());
}

#[test]
fn shards_merge_into_the_full_study() {
    let (full, s1, s2, merged) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    study(full.path(), &["--replicates", "3"]);
    study(s1.path(), &["--replicates", "3", "--first", "0", "--count", "2"]);
    study(s2.path(), &["--replicates", "3", "--first", "2", "--count", "1"]);
    let (a, b) = (s1.path().join("study.csv"), s2.path().join("study.csv"));
    ok(&["--out-dir", s(merged.path()), "study", "--merge", s(&a), s(&b)]);
    assert_eq!(
        fs::read(full.path().join("study.csv")).unwrap(),
        fs::read(merged.path().join("study.csv")).unwrap()
    );

    let other = TempDir::new().unwrap();
    ok(&[&["--out-dir", s(other.path())][..], STUDY, &["--replicates", "3", "--first", "2", "--count", "1", "--alpha", "0.1"]].concat());
    let c = other.path().join("study.csv");
    let out = run(&["--out-dir", s(merged.path()), "study", "--merge", s(&a), s(&c)]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("different configuration"));

    let out = run(&["--out-dir", s(merged.path()), "study", "--merge", s(&a), s(&a)]);
    assert!(!out.status.success());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfbreak_cli::artifacts::read_frontier_csv;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_rice.csv")
}

fn sfbreak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfbreak")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_pipeline(out: &Path, extra: &[&str]) -> Output {
    let data = fixture();
    let mut args = vec!["run", "--data-path", data.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sfbreak(&args)
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = run_pipeline(dir.path(), &["--bootstrap-b", "40", "--seed", "11", "--grid-size", "25"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["fit.json", "frontier.csv", "frontier.svg"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }

    let rows = read_frontier_csv(&a.path().join("frontier.csv")).unwrap();
    assert_eq!(rows.len(), 25);
    for r in &rows {
        assert_eq!(r.bf, r.b_raw.max(0.0));
        let (lo, hi) = r.ci.expect("bootstrap ran");
        assert!(lo <= r.soft_bf && r.soft_bf <= hi, "{r:?}");
    }
    let svg = std::fs::read_to_string(a.path().join("frontier.svg")).unwrap();
    assert!(svg.contains("stroke-dasharray") && svg.contains("<polygon"));
}

#[test]
fn zero_replications_leave_ci_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_pipeline(dir.path(), &["--bootstrap-b", "0", "--grid-size", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("bootstrap:"));
    let text = std::fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "c,b_raw,bf,soft_bf,se_soft_bf,ci_lo,ci_hi");
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",,")));
}

#[test]
fn weaker_conclusion_has_positive_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let data = fixture();
    let o = sfbreak(&["fit", "--data", data.to_str().unwrap(), "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sfbreak(&["frontier", "--e0", "0.8", "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_frontier_csv(&dir.path().join("frontier.csv")).unwrap();
    assert_eq!(rows[0].c, 0.0);
    assert!(rows[0].b_raw > 0.0, "{:?}", rows[0]);
    assert!(rows.iter().all(|r| r.ci.is_none()));

    // bootstrap re-reads the data recorded in fit.json
    let o = sfbreak(&["bootstrap", "--e0", "0.8", "--bootstrap-b", "20", "--grid-size", "5", "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_frontier_csv(&dir.path().join("frontier.csv")).unwrap();
    assert!(rows.iter().all(|r| r.ci.is_some()));
}

#[test]
fn bonferroni_critical_value_for_five_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sfbreak(&["fit", "--data", fixture().to_str().unwrap(), "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sfbreak(&["test", "--alpha", "0.05", "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("= 2.3263"), "{}", stdout(&o));
    let text = std::fs::read_to_string(dir.path().join("tests.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "c,t,critical_value,reject");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("2.32634787404")));
}

#[test]
fn missing_fit_is_explained() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfbreak(&["frontier", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run `sfbreak fit` first"), "{}", stderr(&o));
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("blank.csv");
    std::fs::write(&csv, "PROD,AREA,LABOR,NPK\n1,2,3,4\n2,3,,5\n").unwrap();
    let o = sfbreak(&["fit", "--data", csv.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("blank cell at row 3, column 'LABOR'"), "{}", stderr(&o));

    let o = sfbreak(&["fit", "--alpha", "1.5", "--data", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn toy_two_column_fit() {
    use rand::SeedableRng;
    use sfbreak::sampling::simulate_with;
    use sfbreak::Theta;

    let dir = tempfile::tempdir().unwrap();
    let truth = Theta::new(vec![0.5, 1.0], 0.3, 0.3, 0.5).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let data = simulate_with(&truth, 400, &mut rng, |r, _| rand::Rng::random_range(r, -1.0..1.0)).unwrap();
    let mut text = String::from("y,x1\n");
    for o in data.observations() {
        text.push_str(&format!("{},{}\n", o.y, o.x[1]));
    }
    let csv = dir.path().join("toy.csv");
    std::fs::write(&csv, text).unwrap();
    let o = sfbreak(&[
        "fit",
        "--data",
        csv.to_str().unwrap(),
        "--output-column",
        "y",
        "--input-columns",
        "x1",
        "--log-transform",
        "false",
        "--inefficiency",
        "truncated-normal",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["columns"], serde_json::json!(["const", "x1"]));
    assert_eq!(fit["theta"]["theta_x"].as_array().unwrap().len(), 2);
    let slope = fit["theta"]["theta_x"][1].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let body = serde_json::json!({
        "data_path": fixture(),
        "bootstrap_B": 0,
        "grid_size": 7,
        "out_dir": dir.path().join("from-file"),
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = sfbreak(&["run", "--config", cfg.to_str().unwrap(), "--grid-size", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_frontier_csv(&dir.path().join("from-file/frontier.csv")).unwrap();
    assert_eq!(rows.len(), 9);
}

#[test]
fn check_deltas_table() {
    let o = sfbreak(&["check-deltas", "--grid", "100", "--draws", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("100 of 100 points pass"), "{out}");
    assert_eq!(out.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 100);
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qswarm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qswarm"))
        .args(args)
        .env("QSWARM_OUT", out)
        .output()
        .expect("binary runs")
}

fn only_subdir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn single_run_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(
        &["run", "--objective", "sphere", "--dim", "2", "--particles", "6", "--runs", "1", "--seed", "42", "--variant", "qs"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_subdir(tmp.path());
    let (header, rows) = read_csv(&dir.join("runs.csv"));
    assert_eq!(
        header,
        ["run_index", "seed", "variant", "objective", "final_value", "evaluations", "wall_time_s"]
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "42");
    assert_eq!(rows[0][2], "qs");
    let v: f64 = rows[0][4].parse().unwrap();
    assert!((0.0..1e-6).contains(&v));
    assert!(dir.join("config.echo.json").exists());
    assert!(dir.join("trace_qs.csv").exists());
    assert!(!dir.join("comparison.csv").exists());
}

#[test]
fn unknown_objective_exits_2_with_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(&["run", "--objective", "rosenbrok"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["sphere", "flower", "ackley", "griewank"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn invalid_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"objective": "ackley", "params": {"tau": 1.2, "omega": 0.7}}"#).unwrap();
    let out = qswarm(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.omega"));

    std::fs::write(&cfg, r#"{"objective": "ackley", "runs": 0}"#).unwrap();
    let out = qswarm(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`runs`"));

    let out = qswarm(&["run", "--dim", "2"], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("objective"));
}

#[test]
fn missing_config_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(&["run", "--config", "/nonexistent/cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_batch_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("ackley2d.json");
    std::fs::write(
        &cfg,
        r#"{"objective": "ackley", "dimension": 2, "particles": 6, "iterations": 200, "runs": 400, "seed": 0, "variant": "qs"}"#,
    )
    .unwrap();
    let out = qswarm(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "4"], &tmp.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_subdir(&tmp.path().join("out"));
    let (_, runs) = read_csv(&dir.join("runs.csv"));
    assert_eq!(runs.len(), 400);
    let seeds: Vec<u64> = runs.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(seeds, (0..400).collect::<Vec<u64>>());
    let (header, trace) = read_csv(&dir.join("trace_qs.csv"));
    assert_eq!(header, ["iteration", "mean", "q25", "q75"]);
    assert_eq!(trace.len(), 200);
    // Final mean of the trace equals the mean of the final values.
    let mean: f64 = runs.iter().map(|r| r[4].parse::<f64>().unwrap()).sum::<f64>() / 400.0;
    let last: f64 = trace[199][1].parse().unwrap();
    assert!((mean - last).abs() <= 1e-12 * mean.abs().max(1e-300));
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn echo_reproduces_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = qswarm(
        &["run", "--objective", "flower", "--dim", "3", "--runs", "12", "--seed", "7", "--iterations", "60", "--no-timing"],
        &first,
    );
    assert!(out.status.success());
    let dir_a = only_subdir(&first);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Rel. Diff."), "{stdout}");

    let echo = dir_a.join("config.echo.json");
    let second = tmp.path().join("second");
    let out = qswarm(&["run", "--config", echo.to_str().unwrap(), "--no-timing", "--jobs", "3"], &second);
    assert!(out.status.success());
    let dir_b = only_subdir(&second);
    let (a, b) = (files(&dir_a), files(&dir_b));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert_eq!(bytes, &b[name], "{name} differs");
    }
    assert!(a.contains_key("comparison.csv"));
    assert!(a.contains_key("trace_standard.csv"));
}

#[test]
fn csv_numbers_parse_back_losslessly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(&["run", "--objective", "griewank", "--runs", "5", "--iterations", "30"], tmp.path());
    assert!(out.status.success());
    let dir = only_subdir(tmp.path());
    let (_, rows) = read_csv(&dir.join("runs.csv"));
    for row in rows {
        for cell in [&row[4], &row[6]] {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), *cell);
        }
    }
}

#[test]
fn paper_table_reduced_with_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(&["paper-table", "--runs", "5", "--emit-traces", "--jobs", "2"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("REDUCED"), "{stdout}");
    let dir = only_subdir(tmp.path());
    let (header, rows) = read_csv(&dir.join("comparison.csv"));
    assert_eq!(rows.len(), 6);
    assert!(header.contains(&"check_pass".to_string()));
    for row in &rows {
        assert!(row[18] == "pass" || row[18] == "fail");
        assert_eq!(row[16], "5");
    }
    for id in ["ackley_2d", "griewank_2d", "sphere_2d", "sphere_3d", "flower_2d", "flower_3d"] {
        let row_dir = dir.join(id);
        assert!(row_dir.join("trace_qs.csv").exists(), "{id}");
        assert!(row_dir.join("trace_standard.csv").exists(), "{id}");
        let (_, runs) = read_csv(&row_dir.join("runs.csv"));
        assert_eq!(runs.len(), 10);
    }
}

#[test]
fn paper_table_without_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qswarm(&["paper-table", "--runs", "2", "--out", tmp.path().to_str().unwrap()], Path::new("/nonexistent"));
    assert!(out.status.success());
    let dir = only_subdir(tmp.path());
    assert!(!dir.join("ackley_2d").join("trace_qs.csv").exists());
    assert!(dir.join("comparison.txt").exists());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BETA: [f64; 3] = [-0.0007, 0.01858, -0.000117];

fn curve(x: f64) -> f64 {
    BETA[0] + BETA[1] * x + BETA[2] * x * x
}

fn dyncal(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dyncal"));
    cmd.args(args).env_remove("DYNCAL_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Noise-free data on four references with a slow sinusoidal drift.
fn write_inputs(dir: &Path, t_len: usize) -> (String, String) {
    let refs = [20.0, 60.0, 90.0, 100.0];
    let mut first = String::from("t,20,60,90,100\n");
    let mut second = String::from("t,y0\n");
    for t in 1..=t_len {
        let k = 1.0 + 0.02 * (t as f64 / 7.0).sin();
        let row: Vec<String> = refs.iter().map(|&x| (k * curve(x)).to_string()).collect();
        first += &format!("{t},{}\n", row.join(","));
        second += &format!("{t},{}\n", k * curve(25.0));
    }
    let (a, b) = (dir.join("first.csv"), dir.join("second.csv"));
    fs::write(&a, first).unwrap();
    fs::write(&b, second).unwrap();
    (path_str(&a).to_string(), path_str(&b).to_string())
}

#[test]
fn calibrate_writes_posterior_and_manifest() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 30);
    let out = dir.path().join("out");
    let o = dyncal(
        &["calibrate", "--first-stage", &a, "--second-stage", &b, "--seed", "5", "--out", path_str(&out)],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("posterior.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,median,lo95,hi95,flags"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 30);
    for r in &rows[1..] {
        let med: f64 = r[1].parse().unwrap();
        assert!((med - 25.0).abs() < 0.5, "median {med}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "calibrate");
    assert_eq!(manifest["config"]["calibrate"]["seed"], 5);
    assert!(!csv.contains('\r'));
}

#[test]
fn single_zero_noise_step() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 1);
    let out = dir.path().join("out");
    let o = dyncal(&["calibrate", "--first-stage", &a, "--second-stage", &b, "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("posterior.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let med: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((med - 25.0).abs() < 0.05, "median {med}");
}

#[test]
fn corrupted_row_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 10);
    let text = fs::read_to_string(&a).unwrap();
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 6 { l.replacen(',', ",oops", 1) } else { l.to_string() })
        .collect();
    fs::write(&a, broken.join("\n") + "\n").unwrap();
    let o = dyncal(&["calibrate", "--first-stage", &a, "--second-stage", &b], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 7") && err.contains("column 2"), "{err}");
}

#[test]
fn out_of_order_time_exits_2() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 5);
    let text = fs::read_to_string(&b).unwrap().replace("\n4,", "\n1,");
    fs::write(&b, text).unwrap();
    let o = dyncal(&["calibrate", "--first-stage", &a, "--second-stage", &b], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not follow"));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[campaign]\nreplicates = 3\n").unwrap();
    let o = dyncal(&["simulate", "--config", path_str(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));

    let o = dyncal(&["calibrate", "--first-stage", "/nonexistent.csv", "--second-stage", "/x.csv"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = dyncal(&["example", "nope"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_rerun_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 40);
    let first = dir.path().join("first");
    let o = dyncal(
        &["calibrate", "--first-stage", &a, "--second-stage", &b, "--seed", "77", "--out", path_str(&first)],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let again = dir.path().join("again");
    let o = dyncal(
        &["manifest-rerun", path_str(&first.join("manifest.json")), "--out", path_str(&again), "--threads", "3"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["posterior.csv", "manifest.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_count_never_changes_results() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[example]\nt_len = 120\ncandidates = 300\nresample = 100\n").unwrap();
    let run = |threads: &str, via_env: bool| {
        let out = dir.path().join(format!("t{threads}{via_env}"));
        let mut args = vec!["example", "radiometer-5pt", "--config", path_str(&cfg), "--out", path_str(&out)];
        let o = if via_env {
            dyncal(&args, &[("DYNCAL_THREADS", threads)])
        } else {
            args.extend(["--threads", threads]);
            dyncal(&args, &[])
        };
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("series.csv")).unwrap()
    };
    let one = run("1", false);
    assert_eq!(one, run("8", false));
    assert_eq!(one, run("4", true));
}

#[test]
fn example_inputs_round_trip_through_calibrate() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[example]\nt_len = 60\ncandidates = 200\nresample = 100\n").unwrap();
    let ex = dir.path().join("ex");
    let o = dyncal(&["example", "cd", "--config", path_str(&cfg), "--out", path_str(&ex)], &[]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["series.csv", "summary.json", "first_stage.csv", "second_stage.csv", "manifest.json"] {
        assert!(ex.join(f).exists(), "{f}");
    }
    let cal = dir.path().join("cal");
    let o = dyncal(
        &[
            "calibrate",
            "--first-stage",
            path_str(&ex.join("first_stage.csv")),
            "--second-stage",
            path_str(&ex.join("second_stage.csv")),
            "--out",
            path_str(&cal),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(cal.join("posterior.csv")).unwrap().lines().count(), 61);
}

#[test]
fn simulate_prints_na_for_three_references() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "mode = \"simulate\"\n[campaign]\nschemes = [[20.0, 90.0, 100.0]]\nsigma2_e = [1e-4]\nsigma2_w = [5e-5]\nt_len = 30\nreplications = 2\ncandidates = 50\nresample = 20\n",
    )
    .unwrap();
    let out = dir.path().join("sim");
    let o = dyncal(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tables = fs::read_to_string(out.join("tables.txt")).unwrap();
    assert_eq!(tables.matches("N/A").count(), 2, "{tables}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("SC RAMSE"));

    let o = dyncal(&["calibrate", "--config", path_str(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2), "declared mode must match the subcommand");
}

#[test]
fn compare_and_plot_script() {
    let dir = TempDir::new().unwrap();
    let (a, b) = write_inputs(dir.path(), 20);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[calibrate]\nx0_true = 25.0\ncandidates = 200\nresample = 100\n").unwrap();
    let out = dir.path().join("cmp");
    let o = dyncal(
        &["compare", "--config", path_str(&cfg), "--first-stage", &a, "--second-stage", &b, "--out", path_str(&out)],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.starts_with("t,dc_median,dc_lo95,dc_hi95,sc_estimate,sc_lo,sc_hi\n"));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("compare_metrics.json")).unwrap()).unwrap();
    assert!(metrics["static"]["mse"].as_f64().unwrap() < 1e-12);

    let o = dyncal(&["plot-script", "--out", path_str(&out)], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(out.join("plot_series.py")).unwrap().contains("fill_between"));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lbdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbdp"))
        .args(args)
        .env_remove("LBDP_THREADS")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = path(dir, name);
    let mut args = vec!["simulate", "--lambda", "7", "--mu", "5", "--z0", "10", "-o", &out];
    args.extend_from_slice(extra);
    let o = lbdp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Benchmark CSV without the wall-time column.
fn strip_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--dt", "0.1", "--n-obs", "30", "--replicates", "20", "--seed", "42"];
    let a = simulate(dir.path(), "a.csv", &flags);
    let b = simulate(dir.path(), "b.csv", &flags);
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    assert!(ta.starts_with("# schema: lbdp.panel.v1\ntrajectory_id,time,count\n"));
    let rows = data_rows(&ta);
    assert_eq!(rows.len(), 20 * 31);
    let ids: std::collections::BTreeSet<_> = rows.iter().map(|r| r[0].clone()).collect();
    assert_eq!(ids.len(), 20);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(a + ".meta.json").unwrap()).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["seed_was_generated"], false);
    assert_eq!(meta["rejections"].as_array().unwrap().len(), 20);
}

#[test]
fn pure_birth_counts_never_fall() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "p.csv");
    let o = lbdp(&[
        "simulate", "--lambda", "2", "--mu", "0", "--z0", "3", "--dt", "0.2", "--n-obs", "15",
        "--replicates", "5", "--seed", "1", "-o", &out,
    ]);
    assert!(o.status.success());
    let rows = data_rows(&std::fs::read_to_string(out).unwrap());
    for w in rows.windows(2) {
        if w[0][0] == w[1][0] {
            assert!(w[1][2].parse::<u64>().unwrap() >= w[0][2].parse::<u64>().unwrap());
        }
    }
}

#[test]
fn missing_seed_is_generated_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), "s.csv", &["--times", "0.1,0.3,0.7"]);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out + ".meta.json").unwrap()).unwrap();
    assert_eq!(meta["seed_was_generated"], true);
    assert!(meta["seed"].is_u64());
}

#[test]
fn usage_errors_exit_2() {
    let o = lbdp(&["simulate", "--lambda", "7", "--mu", "5", "--z0", "10", "--dt", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lbdp(&["simulate", "--lambda", "-1", "--mu", "5", "--z0", "10", "--times", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulation_cap_exits_3() {
    let o = lbdp(&[
        "simulate", "--lambda", "5", "--mu", "0", "--z0", "10", "--times", "5", "--max-pop", "100",
        "--seed", "0",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("population"));
}

#[test]
fn estimate_all_gw_matches_qg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(
        dir.path(),
        "p.csv",
        &["--dt", "0.1", "--n-obs", "30", "--replicates", "20", "--seed", "42", "--condition-nonextinct"],
    );
    let out = path(dir.path(), "r.json");
    let o = lbdp(&["estimate", "-i", &csv, "--method", "all", "-o", &out]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    let names: Vec<_> = arr.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(names, ["gw", "qg", "spmle", "spmle-adjusted", "mle", "mv-spmle"]);
    for r in arr {
        assert_eq!(r["schema"], "lbdp.result.v1");
        assert!(r.get("error").is_none(), "{r}");
    }
    let gw = arr[0]["lambda"].as_f64().unwrap();
    let qg = arr[1]["lambda"].as_f64().unwrap();
    assert!((gw - qg).abs() < 1e-6, "{gw} vs {qg}");
}

#[test]
fn estimate_recovers_rates_within_reported_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(
        dir.path(),
        "p.csv",
        &["--dt", "0.1", "--n-obs", "30", "--replicates", "200", "--seed", "7", "--condition-nonextinct"],
    );
    let o = lbdp(&["estimate", "-i", &csv, "-m", "spmle", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let (l, se) = (r["lambda"].as_f64().unwrap(), r["se_lambda"].as_f64().unwrap());
    assert!((l - 7.0).abs() < 3.0 * se, "lambda {l} se {se}");
    assert_eq!(r["seed"], 3);
    let again = lbdp(&["estimate", "-i", &csv, "-m", "spmle", "--seed", "3"]);
    let r2: Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(r["lambda"], r2["lambda"]);
    assert_eq!(r["cov"], r2["cov"]);
}

#[test]
fn malformed_csv_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "bad.csv");
    std::fs::write(&csv, "trajectory_id,time,count\na,0,3\na,0.1,4\na,0.2,many\n").unwrap();
    let o = lbdp(&["estimate", "-i", &csv, "-m", "qg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 4"));
    std::fs::write(&csv, "trajectory_id,time,count\na,0,3\na,0,4\n").unwrap();
    let o = lbdp(&["estimate", "-i", &csv, "-m", "qg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate"));
}

#[test]
fn gw_on_unequal_spacing_points_to_qg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(dir.path(), "u.csv", &["--times", "0.1,0.25,0.5,0.6", "--seed", "2"]);
    let o = lbdp(&["estimate", "-i", &csv, "-m", "gw"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("qg"));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["error"].as_str().unwrap().contains("qg"));
}

#[test]
fn unknown_method_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulate(dir.path(), "p.csv", &["--dt", "0.1", "--n-obs", "5", "--seed", "1"]);
    assert_eq!(lbdp(&["estimate", "-i", &csv, "-m", "bogus"]).status.code(), Some(2));
}

fn pmf_table(extra: &[&str]) -> Vec<Vec<String>> {
    let mut args = vec!["pmf", "--lambda", "7", "--mu", "5", "--t", "1", "--a", "20"];
    args.extend_from_slice(extra);
    let o = lbdp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# schema: lbdp.pmf.v1"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "k,exact,spa,spa_normalized,spa_conditional,ratio_spa,ratio_spa_normalized,ratio_spa_conditional"
    );
    data_rows(&text)
}

#[test]
fn pmf_ratios_on_high_mass_region() {
    let rates = lbdp::Rates::new(7.0, 5.0).unwrap();
    let k_max = lbdp::process::support_limit(1.0, 20, rates).unwrap();
    let rows = pmf_table(&["--k-max", &k_max.to_string()]);
    assert_eq!(rows.len() as u64, k_max + 1);
    let exact: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for c in 2..5 {
        assert_eq!(rows[0][1], rows[0][c], "k = 0 must be exact");
    }
    let total: f64 = exact.iter().sum();
    assert!((1.0 - 1e-6..=1.0 + 1e-12).contains(&total), "{total}");
    let mut cum = 0.0;
    let (mut lo, mut hi) = (None, None);
    for (k, p) in exact.iter().enumerate() {
        cum += p;
        if lo.is_none() && cum >= 0.5 {
            lo = Some(k);
        }
        if hi.is_none() && cum >= 0.99 {
            hi = Some(k);
        }
    }
    for r in &rows[lo.unwrap()..=hi.unwrap()] {
        let ratio: f64 = r[5].parse().unwrap();
        assert!((0.96..=1.04).contains(&ratio), "k = {}: {ratio}", r[0]);
    }
}

#[test]
fn pmf_exact_column_respects_cost_cap() {
    let rows = pmf_table(&["--k-max", "50", "--exact-cost-cap", "10"]);
    assert!(rows.iter().all(|r| r[1] == "NA" && r[5] == "NA"));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().is_ok()));
}

#[test]
fn benchmark_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.toml");
    std::fs::write(&cfg, "[fit]\nrestarts = 2\n[benchmark]\nmu = [5.0]\nn_transitions = [10]\ndt = 0.1\n").unwrap();
    let run = |out: &str| {
        let o = lbdp(&[
            "benchmark", "--config", &cfg, "--lambda", "7", "--z0", "1,10", "--replicates", "8",
            "--seed", "5", "--methods", "gw,qg,spmle", "--out-dir", out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (path(dir.path(), "a"), path(dir.path(), "b"));
    run(&a);
    run(&b);
    let csv = std::fs::read_to_string(Path::new(&a).join("benchmark.csv")).unwrap();
    let other = std::fs::read_to_string(Path::new(&b).join("benchmark.csv")).unwrap();
    assert_eq!(strip_timing(&csv), strip_timing(&other));
    assert!(csv.starts_with("# schema: lbdp.benchmark-csv.v1"));
    assert_eq!(data_rows(&csv).len(), 2 * 3 * 3);
    for cell in ["cell_000.json", "cell_001.json"] {
        let v: Value =
            serde_json::from_str(&std::fs::read_to_string(Path::new(&a).join(cell)).unwrap()).unwrap();
        assert_eq!(v["schema"], "lbdp.benchmark.v1");
        assert_eq!(v["n_replicates"], 8);
    }
}

#[test]
fn thread_count_does_not_change_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_lbdp"))
            .args([
                "benchmark", "--lambda", "7", "--mu", "5", "--z0", "5", "--n-transitions", "8",
                "--gap-uniform", "0.05,0.2", "--replicates", "6", "--seed", "9", "--methods", "qg",
                "--out-dir", out,
            ])
            .env("LBDP_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        strip_timing(&std::fs::read_to_string(Path::new(out).join("benchmark.csv")).unwrap())
    };
    assert_eq!(run("1", &path(dir.path(), "one")), run("3", &path(dir.path(), "three")));
}

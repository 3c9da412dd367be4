mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use logopt::synthetic::{binomial_toy, random_panel};

use common::prices_csv;

fn logopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Single risky coin paying +/-50% with 12 wins in 20 periods.
fn write_toy(dir: &Path) -> std::path::PathBuf {
    let toy = binomial_toy(12, 20, 0.5, 0.5, 1).unwrap();
    let risky: Vec<Vec<f64>> = toy.samples().iter().map(|r| vec![r[1]]).collect();
    let file = dir.join("toy.csv");
    fs::write(&file, prices_csv(&["COIN"], &risky)).unwrap();
    file
}

fn write_random(dir: &Path, periods: usize, seed: u64) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let panel = random_panel(&mut rng, periods, 2, 0.05);
    let file = dir.join(format!("random_{seed}.csv"));
    fs::write(&file, prices_csv(&["AAA", "BBB"], panel.samples())).unwrap();
    file
}

#[test]
fn optimize_recovers_kelly_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy(dir.path());
    let out = dir.path().join("out");
    let o = logopt(&["optimize", "--input", path(&input), "--n", "1", "--cost", "0", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let exact = read_json(&out.join("exact.json"));
    assert_eq!(exact["assets"][0], "COIN");
    let k = exact["weight"][0].as_f64().unwrap();
    assert!((k - 2.0 * (2.0 * 0.6 - 1.0)).abs() < 1e-3, "{k}");
    assert_eq!(exact["status"], "converged");
    for f in ["approx.json", "dominance.json", "survival.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("exact:")));
    assert!(stdout.lines().any(|l| l.starts_with("approx:")));
}

#[test]
fn prohibitive_cost_holds_cash() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy(dir.path());
    let out = dir.path().join("out");
    let o = logopt(&["optimize", "--input", path(&input), "--cost", "COIN=0.4", "--out", path(&out)]);
    assert!(o.status.success());
    let exact = read_json(&out.join("exact.json"));
    assert!((exact["weight"][1].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let dom = read_json(&out.join("dominance.json"));
    assert_eq!(dom["dominant_assets"], serde_json::json!(["CASH"]));
}

#[test]
fn malformed_row_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "timestamp,symbol,price\n0,A,1\n1,A,oops\n2,A,1.1\n").unwrap();
    let o = logopt(&["optimize", "--input", path(&input), "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn oversized_window_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 30, 1);
    let o = logopt(&["online", "--input", path(&input), "--window", "100", "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window of 100 blocks"));
}

#[test]
fn bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 30, 1);
    for args in [
        vec!["optimize", "--input", path(&input), "--cost", "0.995"],
        vec!["optimize", "--input", path(&input), "--cost", "NOPE=0.1"],
        vec!["optimize", "--input", path(&input), "--n", "0"],
        vec!["backtest", "--input", path(&input), "--split", "1.5"],
        vec!["optimize", "--input", path(&input), "--blocks", "sideways"],
        vec!["optimize", "--unknown"],
        vec!["optimize"],
    ] {
        let o = logopt(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 40, 2);
    let out = dir.path().join("from_file");
    let cfg = dir.path().join("cfg.json");
    let body = serde_json::json!({
        "input": path(&input),
        "n": 4,
        "cost": {"AAA": 0.01},
        "out": path(&out),
        "format": "csv",
        "mode": "approx"
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let o = logopt(&["analyze", "--config", path(&cfg), "--n", "2", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_json(&out.join("analysis.json"));
    assert_eq!(a["n"], 2);
    assert_eq!(a["costs"], serde_json::json!([0.01, 0.0, 0.0]));

    fs::write(&cfg, r#"{"input": "x.csv", "colour": "red"}"#).unwrap();
    assert_eq!(logopt(&["analyze", "--config", path(&cfg)]).status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 60, 3);
    for cmd in ["optimize", "frontier", "backtest", "online", "analyze"] {
        for format in ["json", "csv"] {
            let mut snapshots = Vec::new();
            for run in 0..2 {
                let out = dir.path().join(format!("{cmd}_{format}_{run}"));
                let o = logopt(&[
                    cmd, "--input", path(&input), "--n", "2", "--cost", "0.002", "--window", "5",
                    "--samples", "50", "--trials", "200", "--format", format, "--out", path(&out),
                ]);
                assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
                let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
                    .unwrap()
                    .map(|e| {
                        let e = e.unwrap();
                        (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
                    })
                    .collect();
                files.sort();
                assert!(!files.is_empty());
                snapshots.push((files, o.stdout));
            }
            assert_eq!(snapshots[0], snapshots[1], "{cmd} {format}");
        }
    }
}

#[test]
fn frontier_file_contents() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 60, 4);
    let out = dir.path().join("f");
    let o = logopt(&["frontier", "--input", path(&input), "--samples", "200", "--format", "csv", "--out", path(&out)]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_path(out.join("frontier.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["kind", "alpha", "elg", "log_variance", "on_frontier", "kkt_residual", "w_AAA", "w_BBB", "w_CASH"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let elg = |r: &csv::StringRecord| r[2].parse::<f64>().unwrap();
    let best = rows.iter().map(elg).fold(f64::NEG_INFINITY, f64::max);
    let optimum = rows.iter().find(|r| &r[0] == "optimum").expect("optimum row");
    assert!(elg(optimum) >= best - 1e-12);
    assert_eq!(&optimum[4], "true");
    let half = rows
        .iter()
        .find(|r| &r[0] == "combination" && &r[1] == "0.5")
        .expect("alpha = 0.5 row");
    assert!(half[5].parse::<f64>().unwrap() >= 0.0);
    assert!(rows.iter().any(|r| &r[0] == "approx_optimum"));
}

#[test]
fn single_asset_frontier_is_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy(dir.path());
    let out = dir.path().join("f");
    let o = logopt(&["frontier", "--input", path(&input), "--no-riskless", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_json(&out.join("frontier.json"));
    assert_eq!(f["points"].as_array().unwrap().len(), 1);
    assert_eq!(f["points"][0]["kind"], "vertex");
}

#[test]
fn backtest_fits_on_the_first_part_only() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 100, 5);
    let out = dir.path().join("b");
    let o = logopt(&["backtest", "--input", path(&input), "--split", "0.5", "--out", path(&out)]);
    assert!(o.status.success());
    let b = read_json(&out.join("backtest.json"));
    assert_eq!(b["split_index"], 50);
    for part in ["in_sample", "out_of_sample"] {
        for r in b[part].as_array().unwrap() {
            assert_eq!(r["trajectory"].as_array().unwrap().len(), 51, "{part}");
        }
    }
    let names: Vec<&str> = b["out_of_sample"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["strategy"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["exact", "approx", "buy_and_hold"]);
}

#[test]
fn costs_lower_buy_and_hold_terminal_value() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 80, 6);
    let terminal = |cost: &str| {
        let out = dir.path().join(format!("c{cost}"));
        let o = logopt(&["backtest", "--input", path(&input), "--cost", cost, "--seed", "9", "--out", path(&out)]);
        assert!(o.status.success());
        let b = read_json(&out.join("backtest.json"));
        let r = b["out_of_sample"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["strategy"] == "buy_and_hold")
            .unwrap()
            .clone();
        r["trajectory"].as_array().unwrap().last().unwrap().as_f64().unwrap()
    };
    assert!(terminal("0") > terminal("0.01"));
}

#[test]
fn csv_formats_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_random(dir.path(), 60, 7);
    let out = dir.path().join("o");
    assert!(logopt(&["online", "--input", path(&input), "--window", "4", "--format", "csv", "--out", path(&out)])
        .status
        .success());
    let metrics = fs::read_to_string(out.join("metrics_out_of_sample.csv")).unwrap();
    let first: Vec<&str> = metrics.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        first,
        ["metric", "cumulative_return", "log_growth", "volatility", "max_drawdown", "sharpe", "bankrupt"]
    );
    assert!(metrics.lines().next().unwrap().starts_with("metric,online_exact,online_approx,exact,approx,buy_and_hold"));
    let sched = fs::read_to_string(out.join("schedule_exact.csv")).unwrap();
    assert!(sched.starts_with("rebalance_index,asset,weight\n"));

    let out = dir.path().join("a");
    assert!(logopt(&["analyze", "--input", path(&input), "--format", "csv", "--out", path(&out)])
        .status
        .success());
    assert!(fs::read_to_string(out.join("compound.csv")).unwrap().starts_with("block,asset,raw,fee_adjusted\n"));
    assert!(fs::read_to_string(out.join("moments.csv")).unwrap().starts_with("asset,mean,m_AAA,m_BBB,m_CASH\n"));
}

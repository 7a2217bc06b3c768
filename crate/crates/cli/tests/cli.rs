use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use onc_cli::policy_file::read_policy;
use onc_core::{optimal_policy, validate_policy, StateSpace, SystemParams};
use tempfile::TempDir;

fn onc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onc"))
        .current_dir(dir)
        .env("ONC_LOG", "error")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = onc(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const QUICK: &str = "[sim]\nhorizon = 20000\nseeds = [1, 2]\n\n[sweep]\nstart = 0.3\nstop = 0.5\nstep = 0.1\n";

/// Rows of a CSV file keyed by column name.
fn records(path: &Path) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            header
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn golden_headers() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "quick.toml", QUICK);
    ok(dir, &["solve", "--config", "quick.toml", "--out", "o"]);
    ok(dir, &["power", "--config", "quick.toml", "--out", "o", "--policy", "o/policy.txt"]);
    ok(dir, &["simulate", "--config", "quick.toml", "--out", "o", "--scheme", "combined-ma"]);
    ok(dir, &["sweep", "--config", "quick.toml", "--out", "o"]);
    let golden = [
        ("solve.csv", "lambda_a,lambda_b,n_a,n_b,d_max,status,mu1,mu2,mu_tot,mean_queue,mean_delay,lp_objective,duality_gap,max_balance_residual,normalization_residual,pi_consistency,unvisited_states,verified,diagnostics"),
        ("thresholds.csv", "i,j,pi,reachable,p,q,h_th_a,h_th_b,power_a,power_b,factorization_residual"),
        ("power.csv", "lambda_a,lambda_b,n_a,n_b,rate_r,scale_a,scale_b,mu1,mu2,mean_delay,avg_power_a,avg_power_b,avg_power_total,max_factorization_residual"),
        ("simulate.csv", "seed,scheme,mode,lambda_a,lambda_b,n_a,n_b,d_max,measured_slots,mu1,mu1_se,mu2,mu2_se,mu_tot,mu_tot_se,mean_delay,mean_delay_se,mean_queue,mean_queue_se,avg_power_a,avg_power_a_se,avg_power_b,avg_power_b_se,avg_power_total,clipped_fraction"),
        ("sweep.csv", "variable,value,scheme,source,lambda_a,lambda_b,n_a,n_b,d_max,seeds,mu1,mu1_se,mu2,mu2_se,mu_tot,mu_tot_se,mean_delay,mean_delay_se,mean_queue,mean_queue_se,avg_power_a,avg_power_a_se,avg_power_b,avg_power_b_se,avg_power_total,clipped_fraction,error"),
    ];
    for (file, header) in golden {
        assert_eq!(first_line(&dir.join("o").join(file)), header, "{file}");
    }
}

#[test]
fn solve_writes_full_policy_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["solve", "--out", "o"]);
    let text = std::fs::read_to_string(dir.join("o/policy.txt")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('n')).count();
    assert_eq!(rows, 256);
    let row = &records(&dir.join("o/solve.csv"))[0];
    assert!((num(row, "mu1") - 1.0).abs() < 1e-6);
    assert_eq!(row["verified"], "true");
}

#[test]
fn policy_file_round_trips_bit_exactly() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "c.toml", "[system]\nlambda_a = 0.3\nlambda_b = 0.6\nn_a = 6\nn_b = 9\nd_max = 4.0\n");
    ok(dir, &["solve", "--config", "c.toml", "--out", "o"]);
    let table = read_policy(&std::fs::read_to_string(dir.join("o/policy.txt")).unwrap()).unwrap();
    let p = SystemParams::new(0.3, 0.6, 6, 9, 4.0).unwrap();
    let (_, policy, pi) = optimal_policy(&p).unwrap();
    assert_eq!(table.policy, policy);
    assert_eq!(table.pi.unwrap(), pi.pi);
    assert!(validate_policy(&table.policy, &StateSpace::new(6, 9)).unwrap().passed());
}

#[test]
fn idle_fraction_grows_with_the_delay_budget() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mu2 = |d: f64| {
        let name = format!("d{d}.toml");
        write_config(dir, &name, &format!("[system]\nlambda_a = 0.2\nlambda_b = 0.2\nd_max = {d:?}\n"));
        ok(dir, &["solve", "--config", &name, "--out", &format!("o{d}")]);
        num(&records(&dir.join(format!("o{d}/solve.csv")))[0], "mu2")
    };
    assert!(mu2(10.0) >= mu2(2.0));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "tight.toml", "[system]\nd_max = 0.1\n");
    let out = onc(dir, &["solve", "--config", "tight.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    write_config(dir, "typo.toml", "[sim]\nhorizn = 5\n");
    assert_eq!(onc(dir, &["solve", "--config", "typo.toml"]).status.code(), Some(3));
    assert_eq!(onc(dir, &["simulate", "--out", "o"]).status.code(), Some(3));
    assert_eq!(onc(dir, &["sweep", "--mode", "psychic"]).status.code(), Some(3));
    assert_eq!(onc(dir, &["power", "--policy", "missing.txt"]).status.code(), Some(1));
}

#[test]
fn power_is_symmetric_at_equal_rates() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["solve", "--out", "o"]);
    ok(dir, &["power", "--out", "o", "--policy", "o/policy.txt"]);
    let row = &records(&dir.join("o/power.csv"))[0];
    assert!((num(row, "avg_power_a") - num(row, "avg_power_b")).abs() < 1e-9);
    assert!(num(row, "max_factorization_residual") < 1e-9);
}

#[test]
fn idle_policy_without_traffic_uses_no_power() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "c.toml", "[system]\nlambda_a = 0.0\nlambda_b = 0.0\nn_a = 1\nn_b = 1\n");
    let policy = "n_a 1\nn_b 1\n0 0 0 0 0 1\n0 1 0 1 0 0\n1 0 1 0 0 0\n1 1 0 0 1 0\n";
    std::fs::write(dir.join("idle.txt"), policy).unwrap();
    ok(dir, &["power", "--config", "c.toml", "--out", "o", "--policy", "idle.txt"]);
    let row = &records(&dir.join("o/power.csv"))[0];
    assert_eq!(num(row, "avg_power_total"), 0.0);
    assert_eq!(row["mean_delay"], "");
}

#[test]
fn simulate_aggregates_seeds() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "c.toml", "[sim]\nhorizon = 200000\n");
    ok(dir, &["simulate", "--config", "c.toml", "--out", "o", "--scheme", "random-ma", "--seeds", "1,2,3"]);
    let rows = records(&dir.join("o/simulate.csv"));
    let seeds: Vec<&str> = rows.iter().map(|r| r["seed"].as_str()).collect();
    assert_eq!(seeds, ["1", "2", "3", "mean"]);
    let mean = &rows[3];
    let avg: f64 = rows[..3].iter().map(|r| num(r, "mu2")).sum::<f64>() / 3.0;
    assert!((num(mean, "mu2") - avg).abs() < 1e-12);
    assert!((num(mean, "mu2") - 0.25).abs() < 0.01);
}

#[test]
fn outputs_are_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "quick.toml", QUICK);
    for out in ["a", "b"] {
        ok(dir, &["solve", "--config", "quick.toml", "--out", out]);
        ok(dir, &["sweep", "--config", "quick.toml", "--out", out, "--emit-plots"]);
        ok(dir, &["simulate", "--config", "quick.toml", "--out", out, "--policy", &format!("{out}/policy.txt")]);
    }
    for file in ["policy.txt", "sweep.csv", "simulate.csv", "throughput.svg"] {
        let a = std::fs::read(dir.join("a").join(file)).unwrap();
        let b = std::fs::read(dir.join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn sweep_rows_cover_every_scheme() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(dir, "quick.toml", QUICK);
    ok(dir, &["sweep", "--config", "quick.toml", "--out", "o"]);
    let rows = records(&dir.join("o/sweep.csv"));
    assert_eq!(rows.len(), 3 * 4);
    for chunk in rows.chunks(4) {
        let kinds: Vec<(&str, &str)> = chunk
            .iter()
            .map(|r| (r["scheme"].as_str(), r["source"].as_str()))
            .collect();
        assert_eq!(
            kinds,
            [
                ("optimal-policy", "analytic"),
                ("optimal-policy", "sim"),
                ("random-ma", "sim"),
                ("combined-ma", "sim")
            ]
        );
        assert!(chunk.iter().all(|r| r["error"].is_empty()));
    }
}

#[test]
fn sweep_reports_infeasible_points_in_rows() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_config(
        dir,
        "d.toml",
        "[sim]\nhorizon = 5000\n\n[sweep]\nvariable = \"d_max\"\nstart = 0.5\nstop = 1.5\nstep = 1.0\n",
    );
    ok(dir, &["sweep", "--config", "d.toml", "--out", "o"]);
    let rows = records(&dir.join("o/sweep.csv"));
    assert!(rows[0]["error"].contains("infeasible"));
    assert!(rows[1]["error"].contains("infeasible"));
    assert!(rows[2]["error"].is_empty() && rows[3]["error"].is_empty());
    assert!(rows[4..].iter().all(|r| r["error"].is_empty()));
}

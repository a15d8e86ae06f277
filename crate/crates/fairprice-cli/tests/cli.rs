//! End-to-end tests of the `fairprice` binary: spec'd outputs, exit codes,
//! format round trips, and the fit -> save -> reload pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairprice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field(v: &serde_json::Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("missing {key}: {v}"))
}

#[test]
fn solve_uniform_difference() {
    let v = run_json(&[
        "solve", "--dist", "uniform", "--a", "1", "--policy", "diff", "--eps", "0.5",
    ]);
    assert!((field(&v, "p_l") - 0.25).abs() < 1e-9);
    assert!((field(&v, "p_u") - 0.75).abs() < 1e-9);
    assert!((field(&v, "ps") - 0.4375).abs() < 1e-9);
    assert_eq!(v["policy"]["kind"], "diff");
    assert_eq!(v["binding"], true);
}

#[test]
fn solve_coke_ratio_one_is_its_uniform_price() {
    let v = run_json(&[
        "solve", "--preset", "coke", "--policy", "ratio", "--gamma", "1",
    ]);
    assert!((field(&v, "p_l") - 0.9205711668650889).abs() < 1e-6);
    assert_eq!(field(&v, "p_l"), field(&v, "p_u"));
}

#[test]
fn solve_exponential_with_cost_shifts_the_price() {
    let v = run_json(&[
        "solve",
        "--dist",
        "exponential",
        "--lambda",
        "1",
        "--policy",
        "diff",
        "--eps",
        "0",
        "--cost",
        "0.5",
    ]);
    assert!((field(&v, "p_l") - 1.5).abs() < 1e-9);
    assert!((field(&v, "p_u") - 1.5).abs() < 1e-9);
}

#[test]
fn solve_csv_round_trips_numbers() {
    let out = run(&[
        "solve",
        "--dist",
        "exponential",
        "--lambda",
        "1",
        "--policy",
        "ratio",
        "--gamma",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "policy,param,p_l,p_u,cs,ps,ts,foc_residual,binding");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let p_l: f64 = row[2].parse().unwrap();
    assert!((p_l - 0.852605502013725).abs() < 1e-9);
    // Reprinting the parsed value reproduces the cell text.
    assert_eq!(format!("{p_l}"), row[2]);
}

#[test]
fn sweep_produces_monotone_tradeoff_and_header() {
    let out = run(&[
        "sweep",
        "--dist",
        "uniform",
        "--a",
        "1",
        "--policy",
        "diff",
        "--params",
        "0,0.25,0.5,0.75,0.999",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# model=uniform(a=1)"));
    assert!(comment.contains("efficient_trade=0.5"));
    assert_eq!(lines.next().unwrap(), "param,p_l,p_u,cs,ps,ts,error");
    let cs: Vec<f64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(cs.len(), 5);
    assert!(
        cs.windows(2).all(|w| w[1] < w[0]),
        "cs not decreasing: {cs:?}"
    );
}

#[test]
fn sweep_exponential_header_reports_unit_efficient_trade() {
    let out = run(&[
        "sweep",
        "--dist",
        "exponential",
        "--lambda",
        "1",
        "--policy",
        "diff",
        "--from",
        "0",
        "--to",
        "2",
        "--steps",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(text.lines().next().unwrap().contains("efficient_trade=1"));
}

#[test]
fn sweep_ratio_log_grid_moves_band_edges_monotonically() {
    let out = run(&[
        "sweep", "--dist", "powerlaw", "--delta", "1", "--alpha", "2", "--policy", "ratio",
        "--from", "1", "--to", "32", "--steps", "24", "--log",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').take(6).map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 24);
    assert!(
        rows.windows(2).all(|w| w[1][1] < w[0][1]),
        "q_l not decreasing"
    );
    assert!(
        rows.windows(2).all(|w| w[1][2] > w[0][2]),
        "q_u not increasing"
    );
}

#[test]
fn sweep_rows_record_errors_without_aborting() {
    let out = run(&[
        "sweep",
        "--dist",
        "uniform",
        "--a",
        "1",
        "--policy",
        "diff",
        "--params",
        "0.5,0.9,2.0",
    ]);
    // One failing row, two good ones: still exit 0.
    assert!(out.status.success());
    let text = stdout_str(&out);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("2,"));
    assert!(last.contains("outside the valid range"));
}

#[test]
fn check_power_law_is_regular_not_mhr() {
    let v = run_json(&[
        "check", "--dist", "powerlaw", "--delta", "1", "--alpha", "2",
    ]);
    assert_eq!(v["is_mhr"], false);
    assert_eq!(v["w_monotone"], true);
    assert_eq!(v["k_strong_regular_up_to"], "inf");
    assert!(v["hazard_samples"].as_array().unwrap().len() > 100);
}

#[test]
fn check_presets_are_mhr() {
    for preset in ["coke", "cake"] {
        let v = run_json(&["check", "--preset", preset]);
        assert_eq!(v["is_mhr"], true, "{preset}");
    }
}

#[test]
fn check_exponential_certifies_any_k() {
    let v = run_json(&[
        "check",
        "--dist",
        "exponential",
        "--lambda",
        "1",
        "--k",
        "5",
    ]);
    assert_eq!(v["k_strong_regular_up_to"], "inf");
    assert_eq!(v["certifies_k"], true);
}

#[test]
fn threshold_closed_forms() {
    let v = run_json(&["threshold", "--dist", "exponential", "--lambda", "1"]);
    assert!((field(&v, "eps0") - 0.852605502013725).abs() < 1e-6);
    let v = run_json(&["threshold", "--dist", "uniform", "--a", "1"]);
    assert!((field(&v, "eps0") - 0.5).abs() < 1e-9);
    let v = run_json(&[
        "threshold",
        "--dist",
        "powerlaw",
        "--delta",
        "1",
        "--alpha",
        "2",
    ]);
    assert!(field(&v, "eps0") <= 2.0);
}

#[test]
fn dominance_closed_form_and_gamma_one() {
    let out = run(&["dominance", "--dist", "uniform", "--a", "1", "--gamma", "2"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let ps_diff: f64 = row[3].parse().unwrap();
    let ps_ratio: f64 = row[4].parse().unwrap();
    assert!((ps_diff - 0.46).abs() < 1e-8);
    assert!((ps_ratio - 0.40).abs() < 1e-8);

    let out = run(&[
        "dominance",
        "--dist",
        "exponential",
        "--lambda",
        "1",
        "--from",
        "1.5",
        "--to",
        "4",
        "--steps",
        "3",
    ]);
    assert!(out.status.success());
    for line in stdout_str(&out).lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        let ps_diff: f64 = cells[3].parse().unwrap();
        let ps_ratio: f64 = cells[4].parse().unwrap();
        let ts_diff: f64 = cells[5].parse().unwrap();
        let ts_ratio: f64 = cells[6].parse().unwrap();
        assert!(ps_diff >= ps_ratio - 1e-8);
        assert!(ts_diff >= ts_ratio - 1e-8);
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

/// Synthetic take-up data with deterministic per-price purchase fractions
/// equal to sigma(a + b p): the MLE then recovers (a, b) tightly.
fn synthetic_csv(a: f64, b: f64) -> String {
    let mut rows = String::from("price,bought\n");
    for i in 0..50 {
        let price = 0.05 * i as f64;
        let prob = 1.0 / (1.0 + (-(a + b * price)).exp());
        let buyers = (prob * 200.0).round() as usize;
        for j in 0..200 {
            rows.push_str(&format!("{price},{}\n", usize::from(j < buyers)));
        }
    }
    rows
}

#[test]
fn fit_recovers_and_round_trips_through_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "coke.csv", &synthetic_csv(3.94, -3.44));
    let model_path = dir.path().join("model.json");

    let v = run_json(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--save-model",
        model_path.to_str().unwrap(),
    ]);
    assert_eq!(v["converged"], true);
    assert!((field(&v, "intercept") - 3.94).abs() < 0.1);
    assert!((field(&v, "price_coef") + 3.44).abs() < 0.1);

    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(saved["form"], "truncated_logistic");

    // Reloading the model file must reproduce solve output bit for bit.
    let args = [
        "solve",
        "--model-file",
        model_path.to_str().unwrap(),
        "--policy",
        "ratio",
        "--gamma",
        "2",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn fit_balanced_data_fails_with_sign_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("price,bought\n");
    for _ in 0..50 {
        rows.push_str("0,1\n0,0\n1,1\n1,0\n");
    }
    let csv = write_file(dir.path(), "balanced.csv", &rows);
    let out = run(&["fit", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "data");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("not negative"));
}

#[test]
fn fit_with_loan_price_and_covariates_builds_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from("monthly_payment,term,loan_amount,bought,fico\n");
    // Loan price = payment * discounted term sum - amount; higher prices
    // should depress take-up for a recoverable negative slope.
    for i in 0..400 {
        let payment = 100.0 + (i % 20) as f64 * 40.0;
        let term = 24;
        let amount = 20000.0;
        let rate: f64 = 0.0012;
        let discount: f64 = (1..=term).map(|t| (1.0 + rate).powi(-t)).sum();
        let price = payment * discount - amount;
        let fico = 600.0 + (i % 5) as f64 * 50.0;
        let eta = 1.2 - 0.0008 * price + 0.001 * (fico - 700.0);
        let prob = 1.0 / (1.0 + (-eta).exp());
        let buy = usize::from((i as f64 * 0.618_033_988_749) % 1.0 < prob);
        rows.push_str(&format!("{payment},{term},{amount},{buy},{fico}\n"));
    }
    let csv = write_file(dir.path(), "loans.csv", &rows);
    let model_path = dir.path().join("loan_model.json");
    let out = run(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--loan-price",
        "--covariate-cols",
        "fico",
        "--save-model",
        model_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "fit failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(saved["form"], "mixture");
    assert!(saved["intercepts"].as_array().unwrap().len() <= 5);
}

#[test]
fn exit_codes_and_error_json() {
    // Unknown flag: clap exits 2.
    let out = run(&["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // Config error: missing family parameter.
    let out = run(&[
        "solve", "--dist", "uniform", "--policy", "diff", "--eps", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    // Config error: policy parameter out of range.
    let out = run(&[
        "solve", "--dist", "uniform", "--a", "1", "--policy", "diff", "--eps", "5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Numeric error: divergent mean rejects welfare evaluation.
    let out = run(&[
        "solve", "--dist", "powerlaw", "--delta", "1", "--alpha", "0.8", "--policy", "ratio",
        "--gamma", "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "numeric");

    // Data error: missing file.
    let out = run(&["fit", "--csv", "/nonexistent/x.csv"]);
    assert_eq!(out.status.code(), Some(4));

    // Two model sources conflict.
    let out = run(&[
        "solve", "--dist", "uniform", "--a", "1", "--preset", "coke", "--policy", "diff", "--eps",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_env_override_still_solves() {
    let out = Command::new(env!("CARGO_BIN_EXE_fairprice"))
        .env("FAIRPRICE_TOL", "1e-9")
        .args([
            "solve", "--dist", "uniform", "--a", "1", "--policy", "diff", "--eps", "0.5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["p_l"].as_f64().unwrap() - 0.25).abs() < 1e-7);

    let out = Command::new(env!("CARGO_BIN_EXE_fairprice"))
        .env("FAIRPRICE_TOL", "banana")
        .args([
            "solve", "--dist", "uniform", "--a", "1", "--policy", "diff", "--eps", "0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_writes_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "solve",
        "--dist",
        "uniform",
        "--a",
        "1",
        "--policy",
        "diff",
        "--eps",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["p_l"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    // No temp files left behind.
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() != "report.json")
        .collect();
    assert!(leftovers.is_empty());
}

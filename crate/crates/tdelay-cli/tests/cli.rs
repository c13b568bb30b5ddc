use std::process::{Command, Output};

use tempfile::tempdir;

fn tdelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdelay"))
        .args(args)
        .env_remove("TDELAY_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sample_wigner_mean_matches_sum_rule() {
    let dir = tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let o = tdelay(&[
        "sample", "--observable", "wigner", "--beta", "2", "--channels", "2", "--coupling", "1",
        "--samples", "100000", "--seed", "7", "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("bin_lo,bin_hi,count,pdf,cdf,ccdf\n"));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    let mean = s["mean"].as_f64().unwrap();
    let se = s["se_mean"].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 4.0 * se, "{mean} +- {se}");
    assert_eq!(s["count"].as_u64(), Some(100_000));
}

#[test]
fn sample_output_is_deterministic_across_workers() {
    let run = |workers: &str| {
        let o = tdelay(&[
            "sample", "--observable", "proper", "--channels", "3", "--transmission", "0.4",
            "--samples", "20000", "--seed", "3", "--workers", workers, "--bins", "log:1e-3:1e3:60",
        ]);
        assert!(o.status.success());
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("4"));
    assert_eq!(a, run("1"));
}

#[test]
fn histogram_pdf_integrates_to_interior_mass() {
    let o = tdelay(&[
        "sample", "--observable", "heuristic", "--channels", "2", "--transmission", "0.3",
        "--samples", "50000", "--bins", "log:1e-2:1e2:80",
    ]);
    assert!(o.status.success());
    let mut mass = 0.0;
    let mut count = 0u64;
    let mut last_cdf = 0.0;
    let mut first_cdf = None;
    let mut first_count = 0u64;
    for line in stdout(&o).lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        mass += f[3] * (f[1] - f[0]);
        count += f[2] as u64;
        if first_cdf.is_none() {
            first_cdf = Some(f[4]);
            first_count = f[2] as u64;
        }
        last_cdf = f[4];
    }
    let under = first_cdf.unwrap() - first_count as f64 / 50_000.0;
    let over = 1.0 - last_cdf;
    assert!((mass - (1.0 - under - over)).abs() < 1e-9);
    assert!((mass - count as f64 / 50_000.0).abs() < 1e-9);
}

#[test]
fn coupling_and_transmission_conflict() {
    let o = tdelay(&["sample", "--observable", "wigner", "--channels", "2", "--coupling", "1", "--transmission", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn matrix_sampling_at_beta_four_is_a_usage_error() {
    let o = tdelay(&["sample", "--observable", "wigner", "--beta", "4", "--channels", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tdelay(&["sample", "--observable", "partial", "--beta", "4", "--channels", "2", "--samples", "200"]);
    assert!(o.status.success());
}

#[test]
fn worker_env_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_tdelay"))
        .args(["sample", "--observable", "wigner", "--channels", "2", "--samples", "200"])
        .env("TDELAY_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_tdelay"))
        .args(["sample", "--observable", "wigner", "--channels", "2", "--samples", "200"])
        .env("TDELAY_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn dump_writes_raw_values() {
    let dir = tempdir().unwrap();
    let dump = dir.path().join("raw.txt");
    let o = tdelay(&[
        "sample", "--observable", "partial", "--channels", "2", "--samples", "500", "--dump", dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dump).unwrap();
    assert_eq!(text.lines().count(), 500);
    assert!(text.lines().all(|l| l.parse::<f64>().unwrap() > 0.0));
}

#[test]
fn exact_var_wigner() {
    let o = tdelay(&["exact", "--quantity", "var-wigner", "--beta", "2", "--channels", "2", "--transmission", "0.5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("# quantity=var-wigner"));
    let row = out.lines().last().unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 7.0 / 12.0).abs() < 1e-12);
}

#[test]
fn exact_tail_coefficients() {
    let o = tdelay(&["exact", "--quantity", "tail-coeffs", "--beta", "2", "--channels", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let get = |name: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{name},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("a") - 4.0).abs() < 1e-12);
    assert!((get("b") - 0.282095).abs() < 1e-6);
    assert!((get("c") - 0.564190).abs() < 1e-6);
}

#[test]
fn exact_unsupported_pair() {
    let o = tdelay(&["exact", "--quantity", "pdf-proper-exact", "--beta", "1", "--channels", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta = 2 only"));
}

#[test]
fn exact_density_grid() {
    let o = tdelay(&["exact", "--quantity", "pdf-perfect", "--channels", "2", "--grid", "lin:0.1:2:20"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn charfunc_records() {
    let o = tdelay(&["charfunc", "--channels", "1", "--perfect", "--p", "0,1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["z_ratio"].as_f64(), Some(1.0));
    assert_eq!(v[0]["se"].as_f64(), Some(0.0));
    let z = v[1]["z_ratio"].as_f64().unwrap();
    assert!((z - 0.5075).abs() < 1e-3);
    let o = tdelay(&["charfunc", "--beta", "1", "--channels", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn charfunc_monte_carlo_precision() {
    let o = tdelay(&["charfunc", "--channels", "2", "--coupling", "0.1", "--p", "0.1,1,10", "--samples", "1000000"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let recs = v.as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        let z = r["z_ratio"].as_f64().unwrap();
        assert!(r["se"].as_f64().unwrap() / z < 0.02);
        assert_eq!(r["method"], "mc");
    }
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let o = tdelay(&["verify", "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

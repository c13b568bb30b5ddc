//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use tdelay::verify::{run_criterion, CheckRecord};

const SEED: u64 = 1;

fn describe(r: &CheckRecord) -> String {
    format!(
        "    {} {} [{}]: observed {:.6e}, expected {:.6e}{}",
        if r.pass { "ok  " } else { "FAIL" },
        r.name,
        r.parameters,
        r.observed,
        r.expected,
        r.tolerance.map(|t| format!(", tolerance {t:.3e}")).unwrap_or_default()
    )
}

fn main() -> ExitCode {
    let verbose = std::env::var_os("TDELAY_ACCEPTANCE_VERBOSE").is_some();
    let mut failed = Vec::new();
    for id in 1..=12u8 {
        let start = Instant::now();
        let (pass, detail) = match run_criterion(id, SEED, None) {
            Ok(records) => {
                let pass = records.iter().all(|r| r.pass);
                let passed = records.iter().filter(|r| r.pass).count();
                let lines: Vec<String> = records
                    .iter()
                    .filter(|r| verbose || !r.pass)
                    .map(describe)
                    .collect();
                (pass, format!("{passed}/{} checks", records.len()) + &lines.iter().map(|l| format!("\n{l}")).collect::<String>())
            }
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {id:>2}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}

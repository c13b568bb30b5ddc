#![no_main]

use libfuzzer_sys::fuzz_target;
use tdelay::verify::VerificationReport;

fuzz_target!(|input: &str| {
    if let Ok(report) = VerificationReport::from_json(input) {
        let text = report.to_json().expect("serialisable");
        let _ = VerificationReport::from_json(&text);
    }
});

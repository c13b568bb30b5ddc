#![no_main]

use libfuzzer_sys::fuzz_target;
use tdelay::observables::EmpiricalDistribution;

fuzz_target!(|data: &[u8]| {
    if let Ok(dist) = EmpiricalDistribution::read_csv(data) {
        let mut out = Vec::new();
        dist.write_csv(&mut out).expect("writing to memory succeeds");
    }
});

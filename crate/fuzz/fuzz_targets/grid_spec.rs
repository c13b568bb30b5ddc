#![no_main]

use libfuzzer_sys::fuzz_target;
use tdelay::axis::AxisSpec;

fuzz_target!(|input: &str| {
    if let Ok(spec) = input.parse::<AxisSpec>() {
        let points = spec.points();
        assert!(points.iter().all(|x| x.is_finite()));
    }
});

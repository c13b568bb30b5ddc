#![no_main]

use libfuzzer_sys::fuzz_target;
use tdelay::axis::AxisSpec;
use tdelay::observables::EmpiricalDistribution;

fuzz_target!(|input: &str| {
    let Ok(spec) = input.parse::<AxisSpec>() else { return };
    let Ok(edges) = spec.edges() else { return };
    if let Ok(mut dist) = EmpiricalDistribution::new(edges) {
        dist.accumulate(&[0.0, 1.0, 1e-3, 1e3, f64::NAN]);
        assert_eq!(dist.total(), 5);
    }
});

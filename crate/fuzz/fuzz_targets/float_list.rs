#![no_main]

use libfuzzer_sys::fuzz_target;
use tdelay::axis::parse_float_list;

fuzz_target!(|input: &str| {
    if let Ok(values) = parse_float_list(input) {
        assert!(!values.is_empty() && values.iter().all(|x| x.is_finite()));
    }
});

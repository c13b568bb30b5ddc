#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use tdelay_cli::{validate, Cli};

fuzz_target!(|input: &str| {
    let args = std::iter::once("tdelay").chain(input.split_whitespace());
    if let Ok(cli) = Cli::try_parse_from(args) {
        let _ = validate(&cli);
    }
});

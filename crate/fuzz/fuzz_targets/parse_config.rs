#![no_main]

use libfuzzer_sys::fuzz_target;
use soliton_cumulants::cli::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text, &[]) {
        for s in cfg.orderings() {
            let _ = cfg.resolve(s);
        }
    }
});

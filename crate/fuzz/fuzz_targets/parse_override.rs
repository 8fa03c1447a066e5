#![no_main]

use libfuzzer_sys::fuzz_target;
use soliton_cumulants::cli::{parse_config, parse_override};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_override(text);
    if let Ok(cfg) = parse_config(r#"{"gamma_t": 0.0, "t_end": 1.0}"#, &[text.to_string()]) {
        let _ = cfg.resolve(cfg.s);
    }
});

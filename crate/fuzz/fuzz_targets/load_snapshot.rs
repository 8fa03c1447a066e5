#![no_main]

use libfuzzer_sys::fuzz_target;
use soliton_cumulants::cli::output::{load_snapshot, write_snapshot};

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = load_snapshot(data) {
        // anything accepted must survive a second round trip unchanged
        let mut a = Vec::new();
        write_snapshot(&mut a, &snap.state, &snap.x).unwrap();
        let again = load_snapshot(a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_snapshot(&mut b, &again.state, &again.x).unwrap();
        assert_eq!(a, b);
    }
});

#![no_main]

use cocycle_core::io::parse_usize_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_usize_list(s);
    }
});

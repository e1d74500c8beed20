#![no_main]

use cocycle_core::io::{parse_cocycle_json, CocycleFile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = parse_cocycle_json(text) {
        // anything accepted must survive a write and re-read
        let again = parse_cocycle_json(&CocycleFile::from(&c).to_string()).expect("re-parse");
        assert_eq!(c.generators(), again.generators());
    }
});

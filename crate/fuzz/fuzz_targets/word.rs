#![no_main]

use cocycle_core::Word;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = Word::parse(s) {
        assert_eq!(Word::parse(&w.to_string()).unwrap(), w);
    }
});

//! Runs the checked-in fuzz corpus through the parsers.

use std::fs;
use std::path::PathBuf;

use cocycle_core::io::{parse_cocycle_json, parse_real_list, parse_usize_list, CocycleFile};
use cocycle_core::Word;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn cocycle_json_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("cocycle_json") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(c) = parse_cocycle_json(text) {
            let again = parse_cocycle_json(&CocycleFile::from(&c).to_string()).expect(&name);
            assert_eq!(c.generators(), again.generators(), "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 6);
}

#[test]
fn real_list_seeds() {
    for (_, bytes) in seeds("real_list") {
        if let Ok(v) = parse_real_list(&String::from_utf8_lossy(&bytes)) {
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }
}

#[test]
fn usize_list_seeds() {
    for (_, bytes) in seeds("usize_list") {
        let _ = parse_usize_list(&String::from_utf8_lossy(&bytes));
    }
}

#[test]
fn word_seeds() {
    for (name, bytes) in seeds("word") {
        if let Ok(w) = Word::parse(&String::from_utf8_lossy(&bytes)) {
            assert_eq!(Word::parse(&w.to_string()).unwrap(), w, "{name}");
        }
    }
}

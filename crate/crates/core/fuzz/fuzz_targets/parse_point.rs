#![no_main]

use libfuzzer_sys::fuzz_target;
use relstab::point::{parse_list, parse_names, parse_point};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let names: Vec<String> = ["q1", "q2", "th", "p1", "p2", "pth"].iter().map(|s| s.to_string()).collect();
    if let Ok(p) = parse_point(text, &names) {
        assert_eq!(p.len(), names.len());
        assert!(p.iter().all(|x| x.is_finite()));
    }
    let _ = parse_list(text);
    let _ = parse_names(text, &names);
});

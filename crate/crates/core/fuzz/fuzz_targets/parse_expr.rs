#![no_main]

use libfuzzer_sys::fuzz_target;
use relstab::expr::parse;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let names: Vec<String> = ["q1", "q2", "p1", "p2"].iter().map(|s| s.to_string()).collect();
    if let Ok(e) = parse(text, &names) {
        // Printing must re-parse, and derivatives must stay evaluable.
        let back = parse(&e.to_text(&names), &names).expect("printed form re-parses");
        let z = [0.5, -0.25, 1.0, 0.125];
        let _ = (e.eval(&z), back.eval(&z), e.differentiate(0).eval(&z));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(loaded) = relstab::load_system(text) {
        let dim = loaded.system.dim();
        let _ = loaded.system.energy(&vec![0.1; dim]);
    }
});

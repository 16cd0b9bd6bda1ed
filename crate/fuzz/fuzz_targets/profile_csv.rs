#![no_main]
use libfuzzer_sys::fuzz_target;
use sonic_core::profile_1d::parse_profile_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_profile_csv(text) {
        for w in rows.windows(2) {
            assert!(w[0][0] < w[1][0]);
        }
        assert!(rows.iter().all(|r| r[1] > 0.0 && r[3] > 0.0));
    }
});

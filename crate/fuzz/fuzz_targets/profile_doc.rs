#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::registry::load_profiles;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = load_profiles(text) {
            assert_eq!(load_profiles(&set.to_document()).unwrap(), set);
        }
    }
});

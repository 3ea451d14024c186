#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::netsim::Descriptor;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(desc) = Descriptor::parse(text) {
            assert_eq!(Descriptor::parse(&desc.to_text()).unwrap(), desc);
        }
    }
});

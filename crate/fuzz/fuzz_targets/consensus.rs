#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::netsim::ConsensusDoc;

// Only canonical text parses.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = ConsensusDoc::parse(text) {
            assert_eq!(doc.to_text(), text);
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::cells::{parse_extend2, parse_extended2, RelayFormat, RelayMsg};

fuzz_target!(|data: &[u8]| {
    for format in [RelayFormat::Fragmented, RelayFormat::Standard] {
        if let Ok(msg) = RelayMsg::decode(format, data) {
            assert_eq!(RelayMsg::decode(format, &msg.encode()).unwrap(), msg);
        }
    }
    let _ = parse_extend2(data);
    let _ = parse_extended2(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::cells::{reassemble, HandshakeAssembler, ReassemblyBuffer, RelayFormat, RelayMsg, PAYLOAD_LEN};

// Input is a sequence of 509-byte relay payloads.
fuzz_target!(|data: &[u8]| {
    let mut frags = Vec::new();
    let mut buf = ReassemblyBuffer::new();
    for chunk in data.chunks(PAYLOAD_LEN) {
        if let Ok(msg) = RelayMsg::decode(RelayFormat::Fragmented, chunk) {
            if let Some(f) = msg.fragment() {
                frags.push(f.clone());
                if let Ok(Some(whole)) = buf.push(f.clone()) {
                    assert!(!whole.is_empty() || f.total == 1);
                }
            }
        }
    }
    let _ = reassemble(&frags);

    let mut create = HandshakeAssembler::new();
    let mut created = HandshakeAssembler::new();
    for chunk in data.chunks(PAYLOAD_LEN) {
        let _ = create.push_create2(chunk);
        let _ = created.push_created2(chunk);
    }
});

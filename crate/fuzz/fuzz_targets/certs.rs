#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::cells::CertsCell;

fuzz_target!(|data: &[u8]| {
    if let Ok(certs) = CertsCell::parse(data) {
        let again = certs.encode_payload().unwrap();
        assert_eq!(CertsCell::parse(&again).unwrap(), certs);
        let _ = certs.check(&[0u8; 32], 0);
    }
});

#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use onionsim::handshake::{
    client_finish, client_init, default_suites, server_respond, ClientState, ServerKeys, SuiteSpec,
};
use onionsim::registry::ProfileSet;

struct Fixture {
    suite: SuiteSpec,
    server: ServerKeys,
    client: ClientState,
}

const NODE_ID: [u8; 20] = [7; 20];

fn fixtures() -> &'static [Fixture] {
    static F: OnceLock<Vec<Fixture>> = OnceLock::new();
    F.get_or_init(|| {
        default_suites(&ProfileSet::default_set())
            .unwrap()
            .into_iter()
            .map(|suite| {
                let server = ServerKeys::generate([&suite], NODE_ID, &[1; 32]).unwrap();
                let pk = server.public(&suite).unwrap().static_pk;
                let (client, _) = client_init(&suite, &NODE_ID, &pk, &[2; 32]).unwrap();
                Fixture { suite, server, client }
            })
            .collect()
    })
}

// First byte picks the suite; the rest is fed as both onionskin and reply.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, msg)) = data.split_first() else { return };
    let fx = fixtures();
    let f = &fx[pick as usize % fx.len()];
    let _ = server_respond(&f.suite, &f.server, msg, &[3; 32]);
    if let Ok(keys) = client_finish(f.client.clone(), msg) {
        assert!(!keys.auth_ok || msg.len() == f.suite.reply_len(0));
    }
});

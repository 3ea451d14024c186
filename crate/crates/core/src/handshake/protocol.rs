use super::{HandshakeError, SuiteSpec, AUTH_LEN, KEYID_LEN, NODE_ID_LEN};
use crate::toy_crypto::{
    derive_seed, dh_agree, dh_keygen, kdf, mac, sha256, sim_kem_decaps, sim_kem_encaps, sim_kem_keygen, stream_xor,
    KeyPair, Seed,
};
use std::collections::BTreeMap;

/// Per-hop symmetric material shared by client and relay.
#[derive(Clone, PartialEq, Eq)]
pub struct HandshakeKeys {
    pub kf: [u8; 32],
    pub kb: [u8; 32],
    pub df: [u8; 32],
    pub db: [u8; 32],
    pub nonce_f: [u8; 16],
    pub nonce_b: [u8; 16],
    pub auth_ok: bool,
}

impl std::fmt::Debug for HandshakeKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HandshakeKeys")
            .field("kf", &hex::encode(&self.kf[..4]))
            .field("auth_ok", &self.auth_ok)
            .finish_non_exhaustive()
    }
}

impl HandshakeKeys {
    fn from_kdf(out: &[u8]) -> HandshakeKeys {
        let mut k = HandshakeKeys {
            kf: [0; 32],
            kb: [0; 32],
            df: [0; 32],
            db: [0; 32],
            nonce_f: [0; 16],
            nonce_b: [0; 16],
            auth_ok: true,
        };
        k.kf.copy_from_slice(&out[0..32]);
        k.kb.copy_from_slice(&out[32..64]);
        k.df.copy_from_slice(&out[64..96]);
        k.db.copy_from_slice(&out[96..128]);
        k.nonce_f.copy_from_slice(&out[128..144]);
        k.nonce_b.copy_from_slice(&out[144..160]);
        k
    }

    /// The same keys seen from the opposite end: forward and backward swap.
    pub fn mirrored(&self) -> HandshakeKeys {
        HandshakeKeys {
            kf: self.kb,
            kb: self.kf,
            df: self.db,
            db: self.df,
            nonce_f: self.nonce_b,
            nonce_b: self.nonce_f,
            auth_ok: self.auth_ok,
        }
    }
}

const KEYS_LEN: usize = 160;

/// Long-term secrets of one relay: a DH key for classical suites and one
/// static key per KEM used by pure-KEM suites.
#[derive(Clone, Debug)]
pub struct ServerKeys {
    pub node_id: [u8; NODE_ID_LEN],
    pub dh: Option<KeyPair>,
    pub kem_static: BTreeMap<String, KeyPair>,
}

/// What a client needs to know about a relay for one suite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerPublic {
    pub node_id: [u8; NODE_ID_LEN],
    pub static_pk: Vec<u8>,
}

impl ServerKeys {
    /// Keys for every suite in `suites`, derived from `seed`.
    pub fn generate<'a>(
        suites: impl IntoIterator<Item = &'a SuiteSpec>,
        node_id: [u8; NODE_ID_LEN],
        seed: &Seed,
    ) -> Result<ServerKeys, HandshakeError> {
        let mut keys = ServerKeys {
            node_id,
            dh: None,
            kem_static: BTreeMap::new(),
        };
        for suite in suites {
            if suite.classical.is_some() && keys.dh.is_none() {
                keys.dh = Some(dh_keygen(&derive_seed(seed, "onion-dh", 0)));
            }
            if let (true, Some(kem)) = (suite.is_pure_kem(), &suite.pq_kem) {
                if !keys.kem_static.contains_key(&kem.id) {
                    let s = derive_seed(seed, &format!("onion-kem/{}", kem.id), 0);
                    keys.kem_static.insert(kem.id.clone(), sim_kem_keygen(kem, &s)?);
                }
            }
        }
        Ok(keys)
    }

    fn static_pair(&self, suite: &SuiteSpec) -> Result<&KeyPair, HandshakeError> {
        let pair = if suite.is_pure_kem() {
            suite.pq_kem.as_ref().and_then(|k| self.kem_static.get(&k.id))
        } else {
            self.dh.as_ref()
        };
        pair.ok_or_else(|| HandshakeError::InvalidSuite(format!("relay has no key for {}", suite.id)))
    }

    pub fn public(&self, suite: &SuiteSpec) -> Result<ServerPublic, HandshakeError> {
        Ok(ServerPublic {
            node_id: self.node_id,
            static_pk: self.static_pair(suite)?.public_key.clone(),
        })
    }
}

/// Client side of a pending handshake. Consumed by [`client_finish`].
#[derive(Clone, Debug)]
pub struct ClientState {
    suite: SuiteSpec,
    node_id: [u8; NODE_ID_LEN],
    static_pk: Vec<u8>,
    x: Option<KeyPair>,
    kem_eph: Option<KeyPair>,
    ss_static_kem: Option<Vec<u8>>,
    static_ct: Vec<u8>,
    onionskin: Vec<u8>,
}

impl ClientState {
    pub fn suite(&self) -> &SuiteSpec {
        &self.suite
    }

    pub fn onionskin(&self) -> &[u8] {
        &self.onionskin
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), HandshakeError> {
    if expected != actual {
        return Err(HandshakeError::BadLength { what, expected, actual });
    }
    Ok(())
}

fn msg_cipher(secret: &[u8], label: &[u8]) -> ([u8; 32], [u8; 16]) {
    let out = kdf(secret, label, 48);
    let mut key = [0u8; 32];
    let mut nonce = [0u8; 16];
    key.copy_from_slice(&out[..32]);
    nonce.copy_from_slice(&out[32..]);
    (key, nonce)
}

/// Key for the client message, available before the server's share.
fn client_msg_cipher(
    suite: &SuiteSpec,
    phase1: &[u8],
    node_id: &[u8],
    static_pk: &[u8],
    x_pub: &[u8],
) -> ([u8; 32], [u8; 16]) {
    let mut s = phase1.to_vec();
    s.extend_from_slice(node_id);
    s.extend_from_slice(static_pk);
    s.extend_from_slice(x_pub);
    s.extend_from_slice(&suite.protoid);
    msg_cipher(&s, b"msg-c")
}

fn append_message(out: &mut Vec<u8>, key: &([u8; 32], [u8; 16]), msg: &[u8]) -> Result<(), HandshakeError> {
    let len = u16::try_from(msg.len()).map_err(|_| HandshakeError::MessageTooLong(msg.len()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend(stream_xor(&key.0, &key.1, 0, msg));
    Ok(())
}

/// Splits `buf` at `n`, or reports a short message.
fn take<'a>(buf: &mut &'a [u8], n: usize, what: &'static str) -> Result<&'a [u8], HandshakeError> {
    if buf.len() < n {
        return Err(HandshakeError::Parse(what));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn take_message<'a>(buf: &mut &'a [u8], reserve: usize) -> Result<&'a [u8], HandshakeError> {
    let len = take(buf, 2, "message length")?;
    let len = u16::from_be_bytes([len[0], len[1]]) as usize;
    if buf.len() != len + reserve {
        return Err(HandshakeError::Parse("message length disagrees with total"));
    }
    take(buf, len, "message body")
}

struct SecretParts<'a> {
    ss_eph: Option<&'a [u8]>,
    ss_static: &'a [u8],
    ss_pq: Option<&'a [u8]>,
}

fn secret_input(
    suite: &SuiteSpec,
    parts: &SecretParts<'_>,
    node_id: &[u8],
    static_pk: &[u8],
    public_values: &[&[u8]],
) -> Vec<u8> {
    let mut s = Vec::new();
    if let Some(e) = parts.ss_eph {
        s.extend_from_slice(e);
    }
    s.extend_from_slice(parts.ss_static);
    if let Some(p) = parts.ss_pq {
        s.extend_from_slice(p);
    }
    s.extend_from_slice(node_id);
    s.extend_from_slice(static_pk);
    for v in public_values {
        s.extend_from_slice(v);
    }
    s.extend_from_slice(&suite.protoid);
    s
}

fn auth_tag(secret: &[u8], onionskin: &[u8], reply_body: &[u8]) -> [u8; AUTH_LEN] {
    let mut transcript = onionskin.to_vec();
    transcript.extend_from_slice(reply_body);
    mac(&kdf(secret, b"verify", AUTH_LEN), &transcript)
}

pub fn client_init(
    suite: &SuiteSpec,
    node_id: &[u8; NODE_ID_LEN],
    server_static_pk: &[u8],
    seed: &Seed,
) -> Result<(ClientState, Vec<u8>), HandshakeError> {
    client_init_with_message(suite, node_id, server_static_pk, seed, &[])
}

/// Starts a handshake. Suites that carry messages encrypt `client_msg` to
/// the relay; others require it to be empty.
pub fn client_init_with_message(
    suite: &SuiteSpec,
    node_id: &[u8; NODE_ID_LEN],
    server_static_pk: &[u8],
    seed: &Seed,
    client_msg: &[u8],
) -> Result<(ClientState, Vec<u8>), HandshakeError> {
    check_len("server static key", suite.static_pk_len(), server_static_pk.len())?;
    if !client_msg.is_empty() && !suite.variant.carries_messages() {
        return Err(HandshakeError::NoMessageSupport(suite.id.clone()));
    }
    let mut skin = Vec::with_capacity(suite.onionskin_len(client_msg.len()));
    skin.extend_from_slice(node_id);
    skin.extend_from_slice(&sha256(server_static_pk));

    let x = suite
        .classical
        .as_ref()
        .map(|_| dh_keygen(&derive_seed(seed, "hs-x", 0)));
    if let Some(x) = &x {
        skin.extend_from_slice(&x.public_key);
    }
    let kem_eph = match &suite.pq_kem {
        Some(k) => Some(sim_kem_keygen(k, &derive_seed(seed, "hs-kem", 0))?),
        None => None,
    };
    if let Some(e) = &kem_eph {
        skin.extend_from_slice(&e.public_key);
    }
    let mut ss_static_kem = None;
    let mut static_ct = Vec::new();
    let phase1 = match (&x, &suite.pq_kem) {
        (Some(x), _) => dh_agree(&x.secret_key, server_static_pk)?.to_vec(),
        (None, Some(k)) => {
            let enc = sim_kem_encaps(k, server_static_pk, &derive_seed(seed, "hs-static", 0))?;
            skin.extend_from_slice(&enc.ciphertext);
            static_ct = enc.ciphertext;
            ss_static_kem = Some(enc.shared_secret.clone());
            enc.shared_secret
        }
        (None, None) => unreachable!("suite validated at construction"),
    };
    if suite.variant.carries_messages() {
        let x_pub = x.as_ref().map(|k| k.public_key.as_slice()).unwrap_or(&[]);
        let key = client_msg_cipher(suite, &phase1, node_id, server_static_pk, x_pub);
        append_message(&mut skin, &key, client_msg)?;
    }
    let state = ClientState {
        suite: suite.clone(),
        node_id: *node_id,
        static_pk: server_static_pk.to_vec(),
        x,
        kem_eph,
        ss_static_kem,
        static_ct,
        onionskin: skin.clone(),
    };
    Ok((state, skin))
}

pub fn server_respond(
    suite: &SuiteSpec,
    keys: &ServerKeys,
    onionskin: &[u8],
    seed: &Seed,
) -> Result<(Vec<u8>, HandshakeKeys), HandshakeError> {
    server_respond_with_message(suite, keys, onionskin, seed, &[]).map(|(r, k, _)| (r, k))
}

/// Answers an onionskin. Returns the reply, the derived keys and the
/// decrypted client message.
pub fn server_respond_with_message(
    suite: &SuiteSpec,
    keys: &ServerKeys,
    onionskin: &[u8],
    seed: &Seed,
    server_msg: &[u8],
) -> Result<(Vec<u8>, HandshakeKeys, Vec<u8>), HandshakeError> {
    if !server_msg.is_empty() && !suite.variant.carries_messages() {
        return Err(HandshakeError::NoMessageSupport(suite.id.clone()));
    }
    let static_pair = keys.static_pair(suite)?;
    let static_pk = static_pair.public_key.as_slice();
    let mut rest = onionskin;
    let node_id = take(&mut rest, NODE_ID_LEN, "node id")?;
    if node_id != keys.node_id {
        return Err(HandshakeError::UnknownNodeId);
    }
    if take(&mut rest, KEYID_LEN, "key id")? != sha256(static_pk) {
        return Err(HandshakeError::UnknownKeyId);
    }
    let x_pub = match &suite.classical {
        Some(c) => take(&mut rest, c.pk_len, "client share")?,
        None => &[],
    };
    let kem_pk = match &suite.pq_kem {
        Some(k) => take(&mut rest, k.pk_len, "client KEM key")?,
        None => &[],
    };
    let static_ct = match (&suite.pq_kem, suite.is_pure_kem()) {
        (Some(k), true) => take(&mut rest, k.ct_len, "static ciphertext")?,
        _ => &[],
    };

    let (ss_eph, ss_static, y_pub) = match &suite.classical {
        Some(_) => {
            let y = dh_keygen(&derive_seed(seed, "hs-y", 0));
            let ss_eph = dh_agree(&y.secret_key, x_pub)?.to_vec();
            let ss_static = dh_agree(&static_pair.secret_key, x_pub)?.to_vec();
            (Some(ss_eph), ss_static, y.public_key)
        }
        None => {
            let kem = suite.pq_kem.as_ref().expect("pure-KEM suite has a KEM");
            (
                None,
                sim_kem_decaps(kem, &static_pair.secret_key, static_ct)?,
                Vec::new(),
            )
        }
    };

    let client_msg = if suite.variant.carries_messages() {
        let enc = take_message(&mut rest, 0)?;
        let key = client_msg_cipher(suite, &ss_static, node_id, static_pk, x_pub);
        stream_xor(&key.0, &key.1, 0, enc)
    } else {
        Vec::new()
    };
    if !rest.is_empty() {
        return Err(HandshakeError::Parse("trailing bytes after onionskin"));
    }

    let (ct, ss_pq) = match &suite.pq_kem {
        Some(k) => {
            let enc = sim_kem_encaps(k, kem_pk, &derive_seed(seed, "hs-encaps", 0))?;
            (enc.ciphertext, Some(enc.shared_secret))
        }
        None => (Vec::new(), None),
    };
    let si = secret_input(
        suite,
        &SecretParts {
            ss_eph: ss_eph.as_deref(),
            ss_static: &ss_static,
            ss_pq: ss_pq.as_deref(),
        },
        node_id,
        static_pk,
        &[x_pub, &y_pub, kem_pk, &ct, static_ct],
    );

    let mut reply = Vec::with_capacity(suite.reply_len(server_msg.len()));
    reply.extend_from_slice(&y_pub);
    reply.extend_from_slice(&ct);
    if suite.variant.carries_messages() {
        append_message(&mut reply, &msg_cipher(&si, b"msg-s"), server_msg)?;
    }
    let auth = auth_tag(&si, onionskin, &reply);
    reply.extend_from_slice(&auth);
    let keys = HandshakeKeys::from_kdf(&kdf(&si, b"keys", KEYS_LEN));
    Ok((reply, keys, client_msg))
}

pub fn client_finish(state: ClientState, reply: &[u8]) -> Result<HandshakeKeys, HandshakeError> {
    client_finish_with_message(state, reply).map(|(k, _)| k)
}

/// Completes a handshake, authenticating the relay. Returns the keys and the
/// decrypted server message.
pub fn client_finish_with_message(
    state: ClientState,
    reply: &[u8],
) -> Result<(HandshakeKeys, Vec<u8>), HandshakeError> {
    let suite = &state.suite;
    if reply.len() < AUTH_LEN {
        return Err(HandshakeError::Parse("reply shorter than AUTH"));
    }
    let (body, auth) = reply.split_at(reply.len() - AUTH_LEN);
    let mut rest = body;
    let y_pub = match &suite.classical {
        Some(c) => take(&mut rest, c.pk_len, "server share")?,
        None => &[],
    };
    let ct = match &suite.pq_kem {
        Some(k) => take(&mut rest, k.ct_len, "KEM ciphertext")?,
        None => &[],
    };
    let enc_msg = if suite.variant.carries_messages() {
        Some(take_message(&mut rest, 0)?)
    } else {
        None
    };
    if !rest.is_empty() {
        return Err(HandshakeError::Parse("reply length does not match suite"));
    }

    let (ss_eph, ss_static, x_pub) = match &state.x {
        Some(x) => (
            Some(dh_agree(&x.secret_key, y_pub)?.to_vec()),
            dh_agree(&x.secret_key, &state.static_pk)?.to_vec(),
            x.public_key.as_slice(),
        ),
        None => (
            None,
            state
                .ss_static_kem
                .clone()
                .expect("pure-KEM state keeps its static secret"),
            &[][..],
        ),
    };
    let (kem_pk, ss_pq) = match (&suite.pq_kem, &state.kem_eph) {
        (Some(k), Some(e)) => (e.public_key.as_slice(), Some(sim_kem_decaps(k, &e.secret_key, ct)?)),
        _ => (&[][..], None),
    };
    let static_ct = state.static_ct.as_slice();
    let si = secret_input(
        suite,
        &SecretParts {
            ss_eph: ss_eph.as_deref(),
            ss_static: &ss_static,
            ss_pq: ss_pq.as_deref(),
        },
        &state.node_id,
        &state.static_pk,
        &[x_pub, y_pub, kem_pk, ct, static_ct],
    );
    if auth_tag(&si, &state.onionskin, body) != auth {
        return Err(HandshakeError::AuthFailure);
    }
    let server_msg = match enc_msg {
        Some(enc) => {
            let (k, n) = msg_cipher(&si, b"msg-s");
            stream_xor(&k, &n, 0, enc)
        }
        None => Vec::new(),
    };
    Ok((HandshakeKeys::from_kdf(&kdf(&si, b"keys", KEYS_LEN)), server_msg))
}

#[cfg(test)]
mod tests {
    use super::super::{default_suites, suite_by_id};
    use super::*;
    use crate::registry::ProfileSet;

    fn exchange(suite: &SuiteSpec, tag: u8) -> (HandshakeKeys, HandshakeKeys) {
        let server = ServerKeys::generate([suite], [tag; 20], &[tag; 32]).unwrap();
        let public = server.public(suite).unwrap();
        let (state, skin) = client_init(suite, &public.node_id, &public.static_pk, &[tag ^ 1; 32]).unwrap();
        assert_eq!(skin.len(), suite.onionskin_len(0));
        let (reply, skeys) = server_respond(suite, &server, &skin, &[tag ^ 2; 32]).unwrap();
        assert_eq!(reply.len(), suite.reply_len(0));
        (client_finish(state, &reply).unwrap(), skeys)
    }

    #[test]
    fn all_default_suites_agree() {
        for suite in default_suites(&ProfileSet::default_set()).unwrap() {
            let (c, s) = exchange(&suite, 3);
            assert_eq!(c, s, "{}", suite.id);
            assert!(c.auth_ok);
        }
    }

    #[test]
    fn messages_round_trip() {
        let p = ProfileSet::default_set();
        for id in ["ntor-v3", "hs-ntor"] {
            let suite = suite_by_id(&p, id).unwrap();
            let server = ServerKeys::generate([&suite], [1; 20], &[1; 32]).unwrap();
            let pk = server.public(&suite).unwrap().static_pk;
            let (st, skin) = client_init_with_message(&suite, &[1; 20], &pk, &[2; 32], b"hello relay").unwrap();
            assert_eq!(skin.len(), suite.onionskin_len(11));
            let (reply, sk, cmsg) = server_respond_with_message(&suite, &server, &skin, &[3; 32], b"hi").unwrap();
            assert_eq!(cmsg, b"hello relay");
            let (ck, smsg) = client_finish_with_message(st, &reply).unwrap();
            assert_eq!((ck, smsg), (sk, b"hi".to_vec()));
        }
        let ntor = suite_by_id(&p, "ntor").unwrap();
        assert!(matches!(
            client_init_with_message(&ntor, &[1; 20], &[2; 32], &[0; 32], b"x"),
            Err(HandshakeError::NoMessageSupport(_))
        ));
    }

    #[test]
    fn flipped_auth_bit_fails() {
        let suite = suite_by_id(&ProfileSet::default_set(), "hybrid-ml-kem-512").unwrap();
        let server = ServerKeys::generate([&suite], [7; 20], &[7; 32]).unwrap();
        let pk = server.public(&suite).unwrap().static_pk;
        let (st, skin) = client_init(&suite, &[7; 20], &pk, &[8; 32]).unwrap();
        let (mut reply, _) = server_respond(&suite, &server, &skin, &[9; 32]).unwrap();
        let last = reply.len() - 1;
        reply[last] ^= 0x01;
        assert_eq!(client_finish(st, &reply), Err(HandshakeError::AuthFailure));
    }

    #[test]
    fn server_checks_identity() {
        let suite = suite_by_id(&ProfileSet::default_set(), "ntor").unwrap();
        let server = ServerKeys::generate([&suite], [7; 20], &[7; 32]).unwrap();
        let pk = server.public(&suite).unwrap().static_pk;
        let (_, skin) = client_init(&suite, &[6; 20], &pk, &[8; 32]).unwrap();
        assert_eq!(
            server_respond(&suite, &server, &skin, &[9; 32]).unwrap_err(),
            HandshakeError::UnknownNodeId
        );
        let other = ServerKeys::generate([&suite], [7; 20], &[1; 32]).unwrap();
        let other_pk = other.public(&suite).unwrap().static_pk;
        let (_, skin) = client_init(&suite, &[7; 20], &other_pk, &[8; 32]).unwrap();
        assert_eq!(
            server_respond(&suite, &server, &skin, &[9; 32]).unwrap_err(),
            HandshakeError::UnknownKeyId
        );
        assert!(matches!(
            client_init(&suite, &[7; 20], &pk[..31], &[8; 32]),
            Err(HandshakeError::BadLength { .. })
        ));
    }

    #[test]
    fn impostor_without_static_secret_is_rejected() {
        let p = ProfileSet::default_set();
        for id in ["ntor", "kem-ml-kem-512"] {
            let suite = suite_by_id(&p, id).unwrap();
            let real = ServerKeys::generate([&suite], [7; 20], &[7; 32]).unwrap();
            let fake_src = ServerKeys::generate([&suite], [7; 20], &[99; 32]).unwrap();
            let mut impostor = real.clone();
            if let Some(dh) = &mut impostor.dh {
                dh.secret_key = fake_src.dh.clone().unwrap().secret_key;
            }
            for (kem, pair) in impostor.kem_static.iter_mut() {
                pair.secret_key = fake_src.kem_static[kem].secret_key.clone();
            }
            let pk = real.public(&suite).unwrap().static_pk;
            let (st, skin) = client_init(&suite, &[7; 20], &pk, &[8; 32]).unwrap();
            let (reply, _) = server_respond(&suite, &impostor, &skin, &[9; 32]).unwrap();
            assert_eq!(client_finish(st, &reply), Err(HandshakeError::AuthFailure), "{id}");
        }
    }

    #[test]
    fn mirrored_swaps_directions() {
        let suite = suite_by_id(&ProfileSet::default_set(), "hs-ntor").unwrap();
        let (c, _) = exchange(&suite, 5);
        let m = c.mirrored();
        assert_eq!((m.kf, m.db, m.nonce_b), (c.kb, c.df, c.nonce_f));
        assert_eq!(m.mirrored(), c);
    }
}

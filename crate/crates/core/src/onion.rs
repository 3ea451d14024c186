//! Layered relay-cell encryption with running-digest recognition.
//!
//! The client holds one [`HopState`] per hop; each relay holds the state for
//! its own hop. Every 509-byte payload passing a hop in either direction
//! consumes [`BLOCKS_PER_CELL`] keystream blocks of that hop's counter, so
//! the two ends stay in step without sending counters.

use crate::cells::{CellError, RelayFormat, RelayMsg, PAYLOAD_LEN};
use crate::handshake::HandshakeKeys;
use crate::toy_crypto::{hash_parts, keystream_blocks, stream_xor_in_place};

pub type Payload = [u8; PAYLOAD_LEN];

/// Most layers a circuit endpoint can hold (a spliced onion-service path).
pub const MAX_HOPS: usize = 6;

pub const BLOCKS_PER_CELL: u64 = PAYLOAD_LEN.div_ceil(32) as u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OnionError {
    #[error("hop {hop} out of range for a {hops}-hop circuit")]
    BadHop { hop: usize, hops: usize },
    #[error("circuit already has {MAX_HOPS} hops")]
    TooManyHops,
    #[error("no layer recognised the cell")]
    Unrecoverable,
    #[error(transparent)]
    Cell(#[from] CellError),
}

/// Symmetric state of one hop: keys, running digests and keystream counters.
#[derive(Clone, Debug)]
pub struct HopState {
    keys: HandshakeKeys,
    fwd_digest: [u8; 32],
    bwd_digest: [u8; 32],
    fwd_counter: u64,
    bwd_counter: u64,
}

impl HopState {
    pub fn new(keys: HandshakeKeys) -> HopState {
        HopState {
            fwd_digest: keys.df,
            bwd_digest: keys.db,
            keys,
            fwd_counter: 0,
            bwd_counter: 0,
        }
    }

    pub fn keys(&self) -> &HandshakeKeys {
        &self.keys
    }

    /// `(forward, backward)` keystream block counters.
    pub fn counters(&self) -> (u64, u64) {
        (self.fwd_counter, self.bwd_counter)
    }

    fn xor_forward(&mut self, p: &mut Payload) {
        stream_xor_in_place(&self.keys.kf, &self.keys.nonce_f, self.fwd_counter, p);
        self.fwd_counter += keystream_blocks(PAYLOAD_LEN);
    }

    fn xor_backward(&mut self, p: &mut Payload) {
        stream_xor_in_place(&self.keys.kb, &self.keys.nonce_b, self.bwd_counter, p);
        self.bwd_counter += keystream_blocks(PAYLOAD_LEN);
    }
}

/// Next running-digest state for a plaintext payload, computed with the
/// digest field zeroed.
fn next_digest(state: &[u8; 32], format: RelayFormat, p: &Payload) -> [u8; 32] {
    let mut zeroed = *p;
    zeroed[format.digest_range()].fill(0);
    hash_parts(&[state, &zeroed])
}

fn stamp(state: &mut [u8; 32], format: RelayFormat, p: &mut Payload) {
    let d = next_digest(state, format, p);
    let range = format.digest_range();
    let width = range.len();
    p[range].copy_from_slice(&d[..width]);
    *state = d;
}

/// Checks recognition of a plaintext; advances `state` only on success.
fn recognise(state: &mut [u8; 32], format: RelayFormat, p: &Payload) -> Option<RelayMsg> {
    if format == RelayFormat::Standard && (p[1] != 0 || p[2] != 0) {
        return None;
    }
    let d = next_digest(state, format, p);
    let range = format.digest_range();
    if p[range.clone()] != d[..range.len()] {
        return None;
    }
    let msg = RelayMsg::decode(format, p).ok()?;
    *state = d;
    Some(msg)
}

/// Client-side layers of a circuit; index 0 is the first hop.
#[derive(Clone, Debug)]
pub struct CircuitKeys {
    format: RelayFormat,
    hops: Vec<HopState>,
}

impl CircuitKeys {
    pub fn new(format: RelayFormat) -> CircuitKeys {
        CircuitKeys {
            format,
            hops: Vec::new(),
        }
    }

    pub fn format(&self) -> RelayFormat {
        self.format
    }

    pub fn push_hop(&mut self, keys: HandshakeKeys) -> Result<(), OnionError> {
        if self.hops.len() >= MAX_HOPS {
            return Err(OnionError::TooManyHops);
        }
        self.hops.push(HopState::new(keys));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn hop(&self, i: usize) -> Option<&HopState> {
        self.hops.get(i)
    }

    /// Stamps the digest for `target` and adds layers `target..=0`.
    pub fn client_wrap_forward(&mut self, msg: &RelayMsg, target: usize) -> Result<Payload, OnionError> {
        if target >= self.hops.len() {
            return Err(OnionError::BadHop {
                hop: target,
                hops: self.hops.len(),
            });
        }
        let mut p = msg.encode();
        stamp(&mut self.hops[target].fwd_digest, self.format, &mut p);
        for hop in self.hops[..=target].iter_mut().rev() {
            hop.xor_forward(&mut p);
        }
        Ok(p)
    }

    /// Removes backward layers from hop 0 outwards until one recognises the
    /// cell. Returns the originating hop and the message.
    pub fn client_peel_backward(&mut self, payload: &Payload) -> Result<(usize, RelayMsg), OnionError> {
        let mut p = *payload;
        let format = self.format;
        for (i, hop) in self.hops.iter_mut().enumerate() {
            hop.xor_backward(&mut p);
            if let Some(msg) = recognise(&mut hop.bwd_digest, format, &p) {
                return Ok((i, msg));
            }
        }
        Err(OnionError::Unrecoverable)
    }
}

/// Result of removing one forward layer at a relay.
#[derive(Clone, Debug)]
pub struct Unwrapped {
    pub recognized: bool,
    pub payload: Payload,
    pub msg: Option<RelayMsg>,
}

/// Removes this hop's forward layer and tests recognition.
pub fn relay_unwrap_forward(hop: &mut HopState, format: RelayFormat, payload: &Payload) -> Unwrapped {
    let mut p = *payload;
    hop.xor_forward(&mut p);
    let msg = recognise(&mut hop.fwd_digest, format, &p);
    Unwrapped {
        recognized: msg.is_some(),
        payload: p,
        msg,
    }
}

/// Adds this hop's backward layer to a cell travelling towards the client.
pub fn relay_wrap_backward(hop: &mut HopState, payload: &Payload) -> Payload {
    let mut p = *payload;
    hop.xor_backward(&mut p);
    p
}

/// Creates a cell at this hop for the client: stamps the backward digest,
/// then adds this hop's layer.
pub fn relay_originate_backward(hop: &mut HopState, format: RelayFormat, msg: &RelayMsg) -> Payload {
    let mut p = msg.encode();
    stamp(&mut hop.bwd_digest, format, &mut p);
    hop.xor_backward(&mut p);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::RelayCommand;
    use crate::toy_crypto::prf_expand;

    pub(crate) fn keys(tag: u8) -> HandshakeKeys {
        let b = prf_expand(b"test-keys", &[tag], 160);
        let mut k = HandshakeKeys {
            kf: [0; 32],
            kb: [0; 32],
            df: [0; 32],
            db: [0; 32],
            nonce_f: [0; 16],
            nonce_b: [0; 16],
            auth_ok: true,
        };
        k.kf.copy_from_slice(&b[..32]);
        k.kb.copy_from_slice(&b[32..64]);
        k.df.copy_from_slice(&b[64..96]);
        k.db.copy_from_slice(&b[96..128]);
        k.nonce_f.copy_from_slice(&b[128..144]);
        k.nonce_b.copy_from_slice(&b[144..]);
        k
    }

    fn circuit(format: RelayFormat, n: usize) -> (CircuitKeys, Vec<HopState>) {
        let mut c = CircuitKeys::new(format);
        let mut relays = Vec::new();
        for i in 0..n {
            c.push_hop(keys(i as u8)).unwrap();
            relays.push(HopState::new(keys(i as u8)));
        }
        (c, relays)
    }

    #[test]
    fn forward_recognised_only_at_target() {
        for format in [RelayFormat::Standard, RelayFormat::Fragmented] {
            let (mut c, mut relays) = circuit(format, 3);
            let msg = RelayMsg::single(format, RelayCommand::Data, b"GET /").unwrap();
            let mut p = c.client_wrap_forward(&msg, 2).unwrap();
            for (i, r) in relays.iter_mut().enumerate() {
                let u = relay_unwrap_forward(r, format, &p);
                assert_eq!(u.recognized, i == 2);
                p = u.payload;
                if i == 2 {
                    assert_eq!(u.msg.unwrap(), {
                        let mut m = msg.clone();
                        match &mut m {
                            RelayMsg::Standard(s) => s.digest.copy_from_slice(&p[5..9]),
                            RelayMsg::Fragmented(f) => f.digest.copy_from_slice(&p[..14]),
                        }
                        m
                    });
                }
            }
        }
    }

    #[test]
    fn backward_origin_depth() {
        let format = RelayFormat::Fragmented;
        let (mut c, mut relays) = circuit(format, 3);
        let msg = RelayMsg::single(format, RelayCommand::Data, b"200 OK").unwrap();
        for origin in [2usize, 0, 1] {
            let mut p = relay_originate_backward(&mut relays[origin], format, &msg);
            for r in relays[..origin].iter_mut().rev() {
                p = relay_wrap_backward(r, &p);
            }
            let (hop, got) = c.client_peel_backward(&p).unwrap();
            assert_eq!(hop, origin);
            assert_eq!(got.data(), b"200 OK");
        }
    }

    #[test]
    fn garbage_is_unrecoverable() {
        let (mut c, _) = circuit(RelayFormat::Standard, 3);
        assert_eq!(
            c.client_peel_backward(&[0x5A; PAYLOAD_LEN]).unwrap_err(),
            OnionError::Unrecoverable
        );
    }

    #[test]
    fn hop_limits() {
        let (mut c, _) = circuit(RelayFormat::Standard, 6);
        assert_eq!(c.push_hop(keys(9)), Err(OnionError::TooManyHops));
        let msg = RelayMsg::single(RelayFormat::Standard, RelayCommand::Data, b"").unwrap();
        assert!(matches!(c.client_wrap_forward(&msg, 6), Err(OnionError::BadHop { .. })));
    }

    #[test]
    fn counters_advance_per_cell() {
        let (mut c, _) = circuit(RelayFormat::Standard, 2);
        let msg = RelayMsg::single(RelayFormat::Standard, RelayCommand::Data, b"x").unwrap();
        c.client_wrap_forward(&msg, 1).unwrap();
        c.client_wrap_forward(&msg, 0).unwrap();
        assert_eq!(c.hop(0).unwrap().counters(), (32, 0));
        assert_eq!(c.hop(1).unwrap().counters(), (16, 0));
    }
}

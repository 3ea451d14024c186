//! One-way authenticated key exchange between a client and a relay.
//!
//! Every suite combines an optional classical Diffie-Hellman share with an
//! optional KEM. Wire layouts (all lengths in bytes, `?` marks optional
//! parts):
//!
//! ```text
//! onionskin = node_id:20 ‖ keyid:32 ‖ X:32? ‖ kem_pk:pk_len? ‖ static_ct:ct_len?
//!             ‖ (msg_len:2 ‖ enc_msg)?          (ntor-v3 and hs-ntor only)
//! reply     = Y:32? ‖ kem_ct:ct_len? ‖ (msg_len:2 ‖ enc_msg)? ‖ AUTH:32
//! ```
//!
//! `static_ct` appears only in pure-KEM suites, which authenticate the relay
//! by encapsulating to its static KEM key instead of a static DH key.

mod cost;
mod protocol;
mod suite;

pub use cost::{cost_of, step_cost, Role, Step};
pub use protocol::{
    client_finish, client_finish_with_message, client_init, client_init_with_message, server_respond,
    server_respond_with_message, ClientState, HandshakeKeys, ServerKeys, ServerPublic,
};
pub use suite::{default_suites, suite_by_id, SuiteSpec, Variant, DEFAULT_SUITE_IDS};

use crate::registry::RegistryError;
use crate::toy_crypto::CryptoError;

pub const NODE_ID_LEN: usize = 20;
pub const KEYID_LEN: usize = 32;
pub const AUTH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HandshakeError {
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("{what}: expected {expected} bytes, got {actual}")]
    BadLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("malformed handshake message: {0}")]
    Parse(&'static str),
    #[error("onionskin addressed to another relay")]
    UnknownNodeId,
    #[error("onionskin names an unknown key id")]
    UnknownKeyId,
    #[error("server authentication failed")]
    AuthFailure,
    #[error("suite {0} cannot carry handshake messages")]
    NoMessageSupport(String),
    #[error("handshake message of {0} bytes is too long")]
    MessageTooLong(usize),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl HandshakeError {
    /// True for failures caused by an unauthenticated or tampered reply, as
    /// opposed to malformed input.
    pub fn is_auth_failure(&self) -> bool {
        matches!(self, HandshakeError::AuthFailure)
    }
}

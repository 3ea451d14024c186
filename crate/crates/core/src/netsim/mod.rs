//! Discrete-event simulation of a small onion-routing network.
//!
//! Every node hangs off one switch. A transmission serialises on the
//! sender's uplink, crosses the switch, then serialises on the receiver's
//! downlink; each segment adds its node's one-way latency. Handshake costs
//! run on a per-node CPU queue. Symmetric cell crypto costs no time.
//!
//! All randomness comes from one seeded generator, so a `(config, seed)`
//! pair fixes the event trace byte for byte.

mod circuit;
mod config;
mod consensus;
mod service;
mod stream;
mod world;

pub use circuit::{CircStatus, CircuitHandle, CircuitInfo, HopStats};
pub use config::{
    parse_config, NetConfig, NodeConfig, NodeFlag, NodeRole, ServiceConfig, DEFAULT_NETSIM_DOCUMENT, NETSIM_HEADER,
};
pub use consensus::{verify_consensus, ConsensusDoc, RouterEntry, CONSENSUS_HEADER};
pub use service::{blind_service_key, Descriptor, OsConnection};
pub use stream::{FetchResult, WEB_HEADER_LEN, WEB_MSS};
pub use world::{Fault, Node, PathConstraints, World};

use crate::cells::CellError;
use crate::handshake::HandshakeError;
use crate::onion::OnionError;
use crate::registry::RegistryError;
use crate::toy_crypto::CryptoError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no eligible node for the {0} position")]
    NoEligible(&'static str),
    #[error("invalid path: {0}")]
    BadPath(String),
    #[error("unsupported suite: {0}")]
    UnsupportedSuite(String),
    #[error("circuit {circuit} failed: {reason}")]
    CircuitFailed { circuit: usize, reason: String },
    #[error("circuit {0} is not open")]
    CircuitNotOpen(usize),
    #[error("unknown circuit {0}")]
    UnknownCircuit(usize),
    #[error("unknown onion service `{0}`")]
    UnknownService(String),
    #[error("service descriptor rejected: {0}")]
    Descriptor(String),
    #[error("no rendezvous-capable relay")]
    NoRendezvous,
    #[error("consensus does not verify")]
    InvalidConsensus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("event queue drained before the experiment finished")]
    Stalled,
    #[error(transparent)]
    Handshake(#[from] HandshakeError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Onion(#[from] OnionError),
}

/// Operation categories counted per node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpCategory {
    HandshakeClient,
    HandshakeServer,
    RelayUnwrapForward,
    RelayWrapBackward,
    ConsensusSign,
    ConsensusVerify,
    CellTx,
}

impl OpCategory {
    pub const ALL: [OpCategory; 7] = [
        OpCategory::HandshakeClient,
        OpCategory::HandshakeServer,
        OpCategory::RelayUnwrapForward,
        OpCategory::RelayWrapBackward,
        OpCategory::ConsensusSign,
        OpCategory::ConsensusVerify,
        OpCategory::CellTx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpCategory::HandshakeClient => "handshake_client",
            OpCategory::HandshakeServer => "handshake_server",
            OpCategory::RelayUnwrapForward => "relay_unwrap_forward",
            OpCategory::RelayWrapBackward => "relay_wrap_backward",
            OpCategory::ConsensusSign => "consensus_sign",
            OpCategory::ConsensusVerify => "consensus_verify",
            OpCategory::CellTx => "cell_tx",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

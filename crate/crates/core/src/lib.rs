//! Deterministic onion-routing simulator with pluggable classical, hybrid and
//! post-quantum circuit-extension handshakes.

pub mod bench;
pub mod cells;
pub mod cli;
pub mod handshake;
pub mod netsim;
pub mod onion;
pub mod registry;
pub mod time;
pub mod toy_crypto;

pub use time::VirtualTime;

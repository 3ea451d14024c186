//! Wire formats: link cells, relay messages in the standard and fragmenting
//! layouts, CERTS cells, and fragmentation of payloads too large for one cell.
//!
//! ```text
//! fixed cell     [ circ_id:4 ][ command:1 ][ payload:509 ]            514 bytes
//! variable cell  [ circ_id:4 ][ command:1 ][ length:2 ][ payload ]
//!
//! relay (standard)   [ cmd:1 ][ recognized:2 ][ stream:2 ][ digest:4 ][ len:2 ][ data:498 ]
//! relay (fragmenting)[ digest:14 ][ cmd:1 ][ flags:1 ][ body:493 ]
//!     body, flags bit0 set:   [ msg_id:2 ][ index:1 ][ total:1 ][ len:2 ][ data:487 ]
//!     body, flags bit0 clear: [ len:2 ][ data:491 ]
//! ```
//!
//! All integers are big-endian. Decoders take byte slices and never index
//! past them; every malformed input yields a [`CellError`].

mod cell;
mod certs;
mod create;
mod dump;
mod fragment;
mod relay;

pub use cell::{Cell, Command};
pub use certs::{encode_certs, verify_certs, Cert, CertError, CertsCell, CERT_TYPE_SIGNING};
pub use create::{
    create2_cell_count, create2_cells, created2_cell_count, created2_cells, extend2_body, extended2_body,
    parse_extend2, parse_extended2, HandshakeAssembler, CREATED2_HDATA_MAX,
};
pub use dump::{dump_cells, hex_dump};
pub use fragment::{fragment_count, fragment_payload, reassemble, MsgIdCounter, ReassemblyBuffer, REASSEMBLY_WINDOW};
pub use relay::{Fragment, FragmentedBody, RelayCommand, RelayFormat, RelayMessage, RelayMessageF, RelayMsg};

/// Length of a fixed cell on the wire.
pub const CELL_LEN: usize = 514;
/// Payload bytes in a fixed cell.
pub const PAYLOAD_LEN: usize = 509;
/// `circ_id` + `command` + `length` of a variable cell.
pub const VAR_HEADER_LEN: usize = 7;

pub const RELAY_HEADER_LEN: usize = 11;
/// Data capacity of a standard relay message.
pub const RELAY_DATA_LEN: usize = 498;

pub const FRAG_DIGEST_LEN: usize = 14;
pub const FRAG_BODY_LEN: usize = 493;
pub const FRAG_HEADER_LEN: usize = 6;
/// Data capacity of one fragment.
pub const FRAG_DATA_LEN: usize = 487;
/// Data capacity of an unfragmented message in the fragmenting layout.
pub const FRAG_WHOLE_DATA_LEN: usize = 491;

/// Largest handshake payload (`HDATA`) a CREATE2 cell can carry after its
/// 4-byte `HTYPE`/`HLEN` header.
pub const CREATE2_HDATA_MAX: usize = 505;

/// CREATE2 handshake types.
pub const HTYPE_NTOR: u16 = 0x0002;
pub const HTYPE_NTOR_V3: u16 = 0x0003;
pub const HTYPE_HYBRID: u16 = 0x01FE;
pub const HTYPE_PURE_KEM: u16 = 0x01FF;

/// Largest message the fragment layer will carry (the HLEN field is 16 bits).
pub const MAX_MESSAGE_LEN: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CellError {
    #[error("bad length: expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("unknown cell command {0}")]
    UnknownCommand(u8),
    #[error("truncated input: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    Oversize { len: usize, max: usize },
    #[error("command {0:?} uses the other cell layout")]
    WrongLayout(Command),
    #[error("unknown relay command {0}")]
    UnknownRelayCommand(u8),
    #[error("relay length field {len} exceeds capacity {max}")]
    RelayLength { len: usize, max: usize },
    #[error("reserved relay flag bits set: {0:#04x}")]
    ReservedFlags(u8),
    #[error("empty payload cannot be fragmented")]
    EmptyPayload,
    #[error("fragment index {index} not below total {total}")]
    FragmentIndex { index: u8, total: u8 },
    #[error("no fragments supplied")]
    NoFragments,
    #[error("fragments belong to different messages")]
    MixedMessages,
    #[error("fragments disagree on the fragment total")]
    TotalMismatch,
    #[error("duplicate fragment index {0}")]
    DuplicateIndex(u8),
    #[error("missing fragment index {0}")]
    MissingIndex(u8),
    #[error("reassembled length exceeds {MAX_MESSAGE_LEN} bytes")]
    ReassemblyOverflow,
    #[error("reassembly window of {REASSEMBLY_WINDOW} messages is full")]
    WindowFull,
    #[error("malformed certificate entry")]
    MalformedCert,
    #[error("trailing bytes after the last entry")]
    TrailingBytes,
}

/// Reads a big-endian `u16` at `at`, or reports truncation.
pub(crate) fn read_u16(buf: &[u8], at: usize) -> Result<u16, CellError> {
    buf.get(at..at + 2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .ok_or(CellError::Truncated {
            needed: at + 2,
            available: buf.len(),
        })
}

use super::{
    read_u16, CellError, FRAG_BODY_LEN, FRAG_DATA_LEN, FRAG_DIGEST_LEN, FRAG_HEADER_LEN, FRAG_WHOLE_DATA_LEN,
    PAYLOAD_LEN, RELAY_DATA_LEN, RELAY_HEADER_LEN,
};
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum RelayCommand {
    Begin = 1,
    Data = 2,
    End = 3,
    Connected = 4,
    Drop = 10,
    Extend2 = 14,
    Extended2 = 15,
    EstablishRendezvous = 33,
    Introduce1 = 34,
    Introduce2 = 35,
    Rendezvous1 = 36,
    Rendezvous2 = 37,
    RendezvousEstablished = 39,
}

impl RelayCommand {
    pub const ALL: [RelayCommand; 13] = [
        RelayCommand::Begin,
        RelayCommand::Data,
        RelayCommand::End,
        RelayCommand::Connected,
        RelayCommand::Drop,
        RelayCommand::Extend2,
        RelayCommand::Extended2,
        RelayCommand::EstablishRendezvous,
        RelayCommand::Introduce1,
        RelayCommand::Introduce2,
        RelayCommand::Rendezvous1,
        RelayCommand::Rendezvous2,
        RelayCommand::RendezvousEstablished,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<RelayCommand, CellError> {
        RelayCommand::ALL
            .into_iter()
            .find(|c| c.code() == code)
            .ok_or(CellError::UnknownRelayCommand(code))
    }
}

/// Which relay-message layout a circuit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayFormat {
    Standard,
    Fragmented,
}

impl RelayFormat {
    /// Byte range of the running-digest field inside a 509-byte payload.
    pub fn digest_range(self) -> Range<usize> {
        match self {
            RelayFormat::Standard => 5..9,
            RelayFormat::Fragmented => 0..FRAG_DIGEST_LEN,
        }
    }

    /// Largest payload carried without fragmentation.
    pub fn max_whole_data(self) -> usize {
        match self {
            RelayFormat::Standard => RELAY_DATA_LEN,
            RelayFormat::Fragmented => FRAG_WHOLE_DATA_LEN,
        }
    }

    /// Data bytes per cell when a payload is split across cells.
    pub fn chunk_len(self) -> usize {
        match self {
            RelayFormat::Standard => RELAY_DATA_LEN,
            RelayFormat::Fragmented => FRAG_DATA_LEN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RelayFormat::Standard => "standard",
            RelayFormat::Fragmented => "fragmented",
        }
    }
}

impl std::str::FromStr for RelayFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(RelayFormat::Standard),
            "fragmented" => Ok(RelayFormat::Fragmented),
            other => Err(format!("unknown relay format `{other}`")),
        }
    }
}

fn check_payload_len(bytes: &[u8]) -> Result<(), CellError> {
    if bytes.len() != PAYLOAD_LEN {
        return Err(CellError::BadLength {
            expected: PAYLOAD_LEN,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// A relay message in the standard layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayMessage {
    pub command: RelayCommand,
    pub recognized: u16,
    pub stream_id: u16,
    pub digest: [u8; 4],
    pub data: Vec<u8>,
}

impl RelayMessage {
    pub fn new(command: RelayCommand, stream_id: u16, data: &[u8]) -> Result<Self, CellError> {
        if data.len() > RELAY_DATA_LEN {
            return Err(CellError::Oversize {
                len: data.len(),
                max: RELAY_DATA_LEN,
            });
        }
        Ok(RelayMessage {
            command,
            recognized: 0,
            stream_id,
            digest: [0; 4],
            data: data.to_vec(),
        })
    }

    pub fn encode(&self) -> [u8; PAYLOAD_LEN] {
        debug_assert!(self.data.len() <= RELAY_DATA_LEN);
        let mut out = [0u8; PAYLOAD_LEN];
        out[0] = self.command.code();
        out[1..3].copy_from_slice(&self.recognized.to_be_bytes());
        out[3..5].copy_from_slice(&self.stream_id.to_be_bytes());
        out[5..9].copy_from_slice(&self.digest);
        let n = self.data.len().min(RELAY_DATA_LEN);
        out[9..11].copy_from_slice(&(n as u16).to_be_bytes());
        out[RELAY_HEADER_LEN..RELAY_HEADER_LEN + n].copy_from_slice(&self.data[..n]);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CellError> {
        check_payload_len(bytes)?;
        let command = RelayCommand::from_code(bytes[0])?;
        let len = read_u16(bytes, 9)? as usize;
        if len > RELAY_DATA_LEN {
            return Err(CellError::RelayLength {
                len,
                max: RELAY_DATA_LEN,
            });
        }
        Ok(RelayMessage {
            command,
            recognized: read_u16(bytes, 1)?,
            stream_id: read_u16(bytes, 3)?,
            digest: [bytes[5], bytes[6], bytes[7], bytes[8]],
            data: bytes[RELAY_HEADER_LEN..RELAY_HEADER_LEN + len].to_vec(),
        })
    }
}

/// One piece of a fragmented payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub msg_id: u16,
    pub index: u8,
    pub total: u8,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FragmentedBody {
    Whole(Vec<u8>),
    Fragment(Fragment),
}

/// A relay message in the fragmenting layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayMessageF {
    pub digest: [u8; FRAG_DIGEST_LEN],
    pub command: RelayCommand,
    pub body: FragmentedBody,
}

const FLAG_FRAGMENT: u8 = 0x01;

impl RelayMessageF {
    pub fn whole(command: RelayCommand, data: &[u8]) -> Result<Self, CellError> {
        if data.len() > FRAG_WHOLE_DATA_LEN {
            return Err(CellError::Oversize {
                len: data.len(),
                max: FRAG_WHOLE_DATA_LEN,
            });
        }
        Ok(RelayMessageF {
            digest: [0; FRAG_DIGEST_LEN],
            command,
            body: FragmentedBody::Whole(data.to_vec()),
        })
    }

    pub fn flags(&self) -> u8 {
        match self.body {
            FragmentedBody::Whole(_) => 0,
            FragmentedBody::Fragment(_) => FLAG_FRAGMENT,
        }
    }

    pub fn encode(&self) -> [u8; PAYLOAD_LEN] {
        let mut out = [0u8; PAYLOAD_LEN];
        out[..FRAG_DIGEST_LEN].copy_from_slice(&self.digest);
        out[FRAG_DIGEST_LEN] = self.command.code();
        out[FRAG_DIGEST_LEN + 1] = self.flags();
        let body = &mut out[FRAG_DIGEST_LEN + 2..];
        debug_assert_eq!(body.len(), FRAG_BODY_LEN);
        match &self.body {
            FragmentedBody::Whole(data) => {
                let n = data.len().min(FRAG_WHOLE_DATA_LEN);
                body[..2].copy_from_slice(&(n as u16).to_be_bytes());
                body[2..2 + n].copy_from_slice(&data[..n]);
            }
            FragmentedBody::Fragment(f) => {
                let n = f.data.len().min(FRAG_DATA_LEN);
                body[..2].copy_from_slice(&f.msg_id.to_be_bytes());
                body[2] = f.index;
                body[3] = f.total;
                body[4..6].copy_from_slice(&(n as u16).to_be_bytes());
                body[FRAG_HEADER_LEN..FRAG_HEADER_LEN + n].copy_from_slice(&f.data[..n]);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CellError> {
        check_payload_len(bytes)?;
        let mut digest = [0u8; FRAG_DIGEST_LEN];
        digest.copy_from_slice(&bytes[..FRAG_DIGEST_LEN]);
        let command = RelayCommand::from_code(bytes[FRAG_DIGEST_LEN])?;
        let flags = bytes[FRAG_DIGEST_LEN + 1];
        if flags & !FLAG_FRAGMENT != 0 {
            return Err(CellError::ReservedFlags(flags));
        }
        let body = &bytes[FRAG_DIGEST_LEN + 2..];
        let body = if flags & FLAG_FRAGMENT == 0 {
            let len = read_u16(body, 0)? as usize;
            if len > FRAG_WHOLE_DATA_LEN {
                return Err(CellError::RelayLength {
                    len,
                    max: FRAG_WHOLE_DATA_LEN,
                });
            }
            FragmentedBody::Whole(body[2..2 + len].to_vec())
        } else {
            let (index, total) = (body[2], body[3]);
            if index >= total {
                return Err(CellError::FragmentIndex { index, total });
            }
            let len = read_u16(body, 4)? as usize;
            if len > FRAG_DATA_LEN {
                return Err(CellError::RelayLength {
                    len,
                    max: FRAG_DATA_LEN,
                });
            }
            FragmentedBody::Fragment(Fragment {
                msg_id: read_u16(body, 0)?,
                index,
                total,
                data: body[FRAG_HEADER_LEN..FRAG_HEADER_LEN + len].to_vec(),
            })
        };
        Ok(RelayMessageF { digest, command, body })
    }
}

/// A relay message in either layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelayMsg {
    Standard(RelayMessage),
    Fragmented(RelayMessageF),
}

impl RelayMsg {
    pub fn format(&self) -> RelayFormat {
        match self {
            RelayMsg::Standard(_) => RelayFormat::Standard,
            RelayMsg::Fragmented(_) => RelayFormat::Fragmented,
        }
    }

    pub fn command(&self) -> RelayCommand {
        match self {
            RelayMsg::Standard(m) => m.command,
            RelayMsg::Fragmented(m) => m.command,
        }
    }

    pub fn encode(&self) -> [u8; PAYLOAD_LEN] {
        match self {
            RelayMsg::Standard(m) => m.encode(),
            RelayMsg::Fragmented(m) => m.encode(),
        }
    }

    pub fn decode(format: RelayFormat, bytes: &[u8]) -> Result<RelayMsg, CellError> {
        match format {
            RelayFormat::Standard => RelayMessage::decode(bytes).map(RelayMsg::Standard),
            RelayFormat::Fragmented => RelayMessageF::decode(bytes).map(RelayMsg::Fragmented),
        }
    }

    /// A single-cell message with `data`.
    pub fn single(format: RelayFormat, command: RelayCommand, data: &[u8]) -> Result<RelayMsg, CellError> {
        match format {
            RelayFormat::Standard => RelayMessage::new(command, 0, data).map(RelayMsg::Standard),
            RelayFormat::Fragmented => RelayMessageF::whole(command, data).map(RelayMsg::Fragmented),
        }
    }

    /// The fragment this message carries, if any.
    pub fn fragment(&self) -> Option<&Fragment> {
        match self {
            RelayMsg::Fragmented(RelayMessageF {
                body: FragmentedBody::Fragment(f),
                ..
            }) => Some(f),
            _ => None,
        }
    }

    /// The data bytes of an unfragmented message or of one fragment.
    pub fn data(&self) -> &[u8] {
        match self {
            RelayMsg::Standard(m) => &m.data,
            RelayMsg::Fragmented(m) => match &m.body {
                FragmentedBody::Whole(d) => d,
                FragmentedBody::Fragment(f) => &f.data,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout() {
        let mut m = RelayMessage::new(RelayCommand::Data, 0x0102, b"hello").unwrap();
        m.digest = [9, 8, 7, 6];
        let wire = m.encode();
        assert_eq!(&wire[..11], &[2, 0, 0, 1, 2, 9, 8, 7, 6, 0, 5]);
        assert_eq!(&wire[11..16], b"hello");
        assert_eq!(RelayMessage::decode(&wire).unwrap(), m);
        assert!(RelayMessage::new(RelayCommand::Data, 0, &[0; 499]).is_err());
    }

    #[test]
    fn standard_length_field_checked() {
        let mut wire = RelayMessage::new(RelayCommand::Data, 0, &[]).unwrap().encode();
        wire[9..11].copy_from_slice(&499u16.to_be_bytes());
        assert_eq!(
            RelayMessage::decode(&wire),
            Err(CellError::RelayLength { len: 499, max: 498 })
        );
        assert!(RelayMessage::decode(&wire[..508]).is_err());
    }

    #[test]
    fn fragmented_layout() {
        let m = RelayMessageF {
            digest: [0xEE; 14],
            command: RelayCommand::Extend2,
            body: FragmentedBody::Fragment(Fragment {
                msg_id: 0x0A0B,
                index: 1,
                total: 2,
                data: vec![0x55; 487],
            }),
        };
        let wire = m.encode();
        assert_eq!(&wire[14..22], &[14, 1, 0x0A, 0x0B, 1, 2, 0x01, 0xE7]);
        assert_eq!(RelayMessageF::decode(&wire).unwrap(), m);

        let whole = RelayMessageF::whole(RelayCommand::Data, &[3; 491]).unwrap();
        let wire = whole.encode();
        assert_eq!(&wire[15..18], &[0, 0x01, 0xEB]);
        assert_eq!(RelayMessageF::decode(&wire).unwrap(), whole);
        assert!(RelayMessageF::whole(RelayCommand::Data, &[3; 492]).is_err());
    }

    #[test]
    fn fragmented_rejects_bad_headers() {
        let mut wire = RelayMessageF::whole(RelayCommand::Data, &[]).unwrap().encode();
        wire[15] = 0x02;
        assert_eq!(RelayMessageF::decode(&wire), Err(CellError::ReservedFlags(2)));
        wire[15] = 0x01;
        wire[18] = 3;
        wire[19] = 3;
        assert_eq!(
            RelayMessageF::decode(&wire),
            Err(CellError::FragmentIndex { index: 3, total: 3 })
        );
        wire[19] = 4;
        wire[20..22].copy_from_slice(&488u16.to_be_bytes());
        assert!(matches!(
            RelayMessageF::decode(&wire),
            Err(CellError::RelayLength { .. })
        ));
    }

    #[test]
    fn digest_ranges() {
        assert_eq!(RelayFormat::Standard.digest_range(), 5..9);
        assert_eq!(RelayFormat::Fragmented.digest_range(), 0..14);
    }
}

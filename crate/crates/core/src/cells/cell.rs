use super::{read_u16, CellError, CELL_LEN, PAYLOAD_LEN, VAR_HEADER_LEN};

/// Link-level cell command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Command {
    Padding = 0,
    Relay = 3,
    Destroy = 4,
    Versions = 7,
    Create2 = 10,
    Created2 = 11,
    Certs = 129,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Padding,
        Command::Relay,
        Command::Destroy,
        Command::Versions,
        Command::Create2,
        Command::Created2,
        Command::Certs,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Command, CellError> {
        Command::ALL
            .into_iter()
            .find(|c| c.code() == code)
            .ok_or(CellError::UnknownCommand(code))
    }

    /// VERSIONS and every command from 128 up use the variable layout.
    pub fn is_variable(self) -> bool {
        self == Command::Versions || self.code() >= 128
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Padding => "PADDING",
            Command::Relay => "RELAY",
            Command::Destroy => "DESTROY",
            Command::Versions => "VERSIONS",
            Command::Create2 => "CREATE2",
            Command::Created2 => "CREATED2",
            Command::Certs => "CERTS",
        }
    }
}

/// A link cell. Fixed cells always hold exactly [`PAYLOAD_LEN`] payload bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub circ_id: u32,
    pub command: Command,
    pub payload: Vec<u8>,
}

impl Cell {
    /// A fixed cell; `data` is zero-padded to the full payload.
    pub fn fixed(circ_id: u32, command: Command, data: &[u8]) -> Result<Cell, CellError> {
        if command.is_variable() {
            return Err(CellError::WrongLayout(command));
        }
        if data.len() > PAYLOAD_LEN {
            return Err(CellError::Oversize {
                len: data.len(),
                max: PAYLOAD_LEN,
            });
        }
        let mut payload = vec![0u8; PAYLOAD_LEN];
        payload[..data.len()].copy_from_slice(data);
        Ok(Cell {
            circ_id,
            command,
            payload,
        })
    }

    pub fn variable(circ_id: u32, command: Command, payload: Vec<u8>) -> Result<Cell, CellError> {
        if !command.is_variable() {
            return Err(CellError::WrongLayout(command));
        }
        if payload.len() > u16::MAX as usize {
            return Err(CellError::Oversize {
                len: payload.len(),
                max: u16::MAX as usize,
            });
        }
        Ok(Cell {
            circ_id,
            command,
            payload,
        })
    }

    /// Bytes this cell occupies on the wire.
    pub fn wire_len(&self) -> usize {
        if self.command.is_variable() {
            VAR_HEADER_LEN + self.payload.len()
        } else {
            CELL_LEN
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&self.circ_id.to_be_bytes());
        out.push(self.command.code());
        if self.command.is_variable() {
            out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
            out.extend_from_slice(&self.payload);
        } else {
            out.extend_from_slice(&self.payload);
            out.resize(CELL_LEN, 0);
        }
        out
    }

    /// Decodes exactly one cell; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Cell, CellError> {
        let (cell, rest) = Cell::pop(bytes)?;
        if !rest.is_empty() {
            return Err(CellError::BadLength {
                expected: cell.wire_len(),
                actual: bytes.len(),
            });
        }
        Ok(cell)
    }

    /// Decodes the first cell of a stream and returns the remainder.
    pub fn pop(bytes: &[u8]) -> Result<(Cell, &[u8]), CellError> {
        if bytes.len() < 5 {
            return Err(CellError::Truncated {
                needed: 5,
                available: bytes.len(),
            });
        }
        let circ_id = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let command = Command::from_code(bytes[4])?;
        let (start, end) = if command.is_variable() {
            let len = read_u16(bytes, 5)? as usize;
            (VAR_HEADER_LEN, VAR_HEADER_LEN + len)
        } else {
            (5, CELL_LEN)
        };
        if bytes.len() < end {
            return Err(CellError::Truncated {
                needed: end,
                available: bytes.len(),
            });
        }
        let cell = Cell {
            circ_id,
            command,
            payload: bytes[start..end].to_vec(),
        };
        Ok((cell, &bytes[end..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_layout() {
        let c = Cell::fixed(0x01020304, Command::Create2, &[0xAA; 10]).unwrap();
        let wire = c.encode();
        assert_eq!(wire.len(), 514);
        assert_eq!(&wire[..5], &[1, 2, 3, 4, 10]);
        assert_eq!(&wire[5..15], &[0xAA; 10]);
        assert!(wire[15..].iter().all(|&b| b == 0));
        assert_eq!(Cell::decode(&wire).unwrap(), c);
    }

    #[test]
    fn variable_layout() {
        let c = Cell::variable(0, Command::Versions, vec![0, 4, 0, 5]).unwrap();
        let wire = c.encode();
        assert_eq!(wire, vec![0, 0, 0, 0, 7, 0, 4, 0, 4, 0, 5]);
        assert_eq!(Cell::decode(&wire).unwrap(), c);
        let certs = Cell::variable(0, Command::Certs, vec![1; 300]).unwrap();
        assert_eq!(certs.encode().len(), 307);
    }

    #[test]
    fn layout_mismatch_rejected() {
        assert_eq!(
            Cell::fixed(1, Command::Certs, &[]),
            Err(CellError::WrongLayout(Command::Certs))
        );
        assert!(Cell::variable(1, Command::Relay, vec![]).is_err());
        assert!(Cell::fixed(1, Command::Relay, &[0; 510]).is_err());
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(Cell::decode(&[0; 4]), Err(CellError::Truncated { .. })));
        let mut wire = Cell::fixed(1, Command::Relay, &[]).unwrap().encode();
        wire[4] = 99;
        assert_eq!(Cell::decode(&wire), Err(CellError::UnknownCommand(99)));
        let wire = Cell::fixed(1, Command::Relay, &[]).unwrap().encode();
        assert!(matches!(Cell::decode(&wire[..513]), Err(CellError::Truncated { .. })));
        let mut long = wire.clone();
        long.push(0);
        assert!(matches!(Cell::decode(&long), Err(CellError::BadLength { .. })));
        assert!(matches!(
            Cell::decode(&[0, 0, 0, 0, 129, 0, 5, 1]),
            Err(CellError::Truncated { needed: 12, .. })
        ));
    }

    #[test]
    fn pop_walks_a_stream() {
        let a = Cell::variable(0, Command::Versions, vec![0, 5]).unwrap();
        let b = Cell::fixed(7, Command::Destroy, &[1]).unwrap();
        let mut stream = a.encode();
        stream.extend(b.encode());
        let (first, rest) = Cell::pop(&stream).unwrap();
        let (second, rest) = Cell::pop(rest).unwrap();
        assert_eq!((first, second), (a, b));
        assert!(rest.is_empty());
    }
}

use super::{read_u16, Cell, CellError, Command, CREATE2_HDATA_MAX, PAYLOAD_LEN};

/// Handshake bytes per CREATED2 cell after the 2-byte `HLEN`.
pub const CREATED2_HDATA_MAX: usize = PAYLOAD_LEN - 2;

fn hlen(hdata: &[u8]) -> Result<u16, CellError> {
    if hdata.is_empty() {
        return Err(CellError::EmptyPayload);
    }
    u16::try_from(hdata.len()).map_err(|_| CellError::Oversize {
        len: hdata.len(),
        max: u16::MAX as usize,
    })
}

/// CREATE2 cells carrying `hdata`. Each cell repeats `HTYPE` and the total
/// `HLEN`; handshakes longer than [`CREATE2_HDATA_MAX`] continue in further
/// cells.
pub fn create2_cells(circ_id: u32, htype: u16, hdata: &[u8]) -> Result<Vec<Cell>, CellError> {
    let total = hlen(hdata)?;
    hdata
        .chunks(CREATE2_HDATA_MAX)
        .map(|chunk| {
            let mut p = Vec::with_capacity(4 + chunk.len());
            p.extend_from_slice(&htype.to_be_bytes());
            p.extend_from_slice(&total.to_be_bytes());
            p.extend_from_slice(chunk);
            Cell::fixed(circ_id, Command::Create2, &p)
        })
        .collect()
}

/// CREATED2 cells carrying `hdata`, continued like [`create2_cells`].
pub fn created2_cells(circ_id: u32, hdata: &[u8]) -> Result<Vec<Cell>, CellError> {
    let total = hlen(hdata)?;
    hdata
        .chunks(CREATED2_HDATA_MAX)
        .map(|chunk| {
            let mut p = Vec::with_capacity(2 + chunk.len());
            p.extend_from_slice(&total.to_be_bytes());
            p.extend_from_slice(chunk);
            Cell::fixed(circ_id, Command::Created2, &p)
        })
        .collect()
}

/// Number of CREATE2 (or CREATED2) cells for a handshake of `len` bytes.
pub fn create2_cell_count(len: usize) -> usize {
    len.div_ceil(CREATE2_HDATA_MAX).max(1)
}

pub fn created2_cell_count(len: usize) -> usize {
    len.div_ceil(CREATED2_HDATA_MAX).max(1)
}

/// Collects a handshake split over several CREATE2 or CREATED2 cells.
#[derive(Clone, Debug, Default)]
pub struct HandshakeAssembler {
    htype: Option<u16>,
    expected: usize,
    buf: Vec<u8>,
}

impl HandshakeAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    fn absorb(&mut self, htype: Option<u16>, total: usize, body: &[u8]) -> Result<Option<Vec<u8>>, CellError> {
        if self.buf.is_empty() {
            self.htype = htype;
            self.expected = total;
        } else if self.htype != htype || self.expected != total {
            return Err(CellError::TotalMismatch);
        }
        if total == 0 {
            return Err(CellError::EmptyPayload);
        }
        let take = (total - self.buf.len()).min(body.len());
        self.buf.extend_from_slice(&body[..take]);
        if self.buf.len() < total {
            return Ok(None);
        }
        self.htype = None;
        self.expected = 0;
        Ok(Some(std::mem::take(&mut self.buf)))
    }

    /// Feeds one CREATE2 payload; yields `(htype, hdata)` when complete.
    pub fn push_create2(&mut self, payload: &[u8]) -> Result<Option<(u16, Vec<u8>)>, CellError> {
        let htype = read_u16(payload, 0)?;
        let total = read_u16(payload, 2)? as usize;
        let room = CREATE2_HDATA_MAX.min(payload.len() - 4);
        Ok(self
            .absorb(Some(htype), total, &payload[4..4 + room])?
            .map(|h| (htype, h)))
    }

    /// Feeds one CREATED2 payload; yields the reply when complete.
    pub fn push_created2(&mut self, payload: &[u8]) -> Result<Option<Vec<u8>>, CellError> {
        let total = read_u16(payload, 0)? as usize;
        self.absorb(None, total, &payload[2..])
    }
}

/// EXTEND2 relay body: `HTYPE ‖ HLEN ‖ HDATA`. The target relay is named by
/// the node id that opens every onionskin.
pub fn extend2_body(htype: u16, hdata: &[u8]) -> Result<Vec<u8>, CellError> {
    let total = hlen(hdata)?;
    let mut out = Vec::with_capacity(4 + hdata.len());
    out.extend_from_slice(&htype.to_be_bytes());
    out.extend_from_slice(&total.to_be_bytes());
    out.extend_from_slice(hdata);
    Ok(out)
}

pub fn parse_extend2(body: &[u8]) -> Result<(u16, &[u8]), CellError> {
    let htype = read_u16(body, 0)?;
    let len = read_u16(body, 2)? as usize;
    if body.len() != 4 + len {
        return Err(CellError::BadLength {
            expected: 4 + len,
            actual: body.len(),
        });
    }
    Ok((htype, &body[4..]))
}

/// EXTENDED2 relay body: `HLEN ‖ HDATA`.
pub fn extended2_body(hdata: &[u8]) -> Result<Vec<u8>, CellError> {
    let total = hlen(hdata)?;
    let mut out = Vec::with_capacity(2 + hdata.len());
    out.extend_from_slice(&total.to_be_bytes());
    out.extend_from_slice(hdata);
    Ok(out)
}

pub fn parse_extended2(body: &[u8]) -> Result<&[u8], CellError> {
    let len = read_u16(body, 0)? as usize;
    if body.len() != 2 + len {
        return Err(CellError::BadLength {
            expected: 2 + len,
            actual: body.len(),
        });
    }
    Ok(&body[2..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create2_split_and_join() {
        for len in [1usize, 84, 505, 506, 884, 1268, 2000] {
            let hdata: Vec<u8> = (0..len).map(|i| (i * 7) as u8).collect();
            let cells = create2_cells(5, 0x01FE, &hdata).unwrap();
            assert_eq!(cells.len(), create2_cell_count(len));
            let mut asm = HandshakeAssembler::new();
            let mut out = None;
            for c in &cells {
                assert_eq!(c.encode().len(), 514);
                out = asm.push_create2(&c.payload).unwrap();
            }
            assert_eq!(out, Some((0x01FE, hdata.clone())));

            let cells = created2_cells(5, &hdata).unwrap();
            assert_eq!(cells.len(), created2_cell_count(len));
            let mut asm = HandshakeAssembler::new();
            let mut out = None;
            for c in &cells {
                out = asm.push_created2(&c.payload).unwrap();
            }
            assert_eq!(out, Some(hdata));
        }
    }

    #[test]
    fn relay_bodies() {
        let body = extend2_body(2, &[9; 84]).unwrap();
        assert_eq!(body.len(), 88);
        assert_eq!(parse_extend2(&body).unwrap(), (2, &[9u8; 84][..]));
        assert!(parse_extend2(&body[..87]).is_err());
        let body = extended2_body(&[1; 64]).unwrap();
        assert_eq!(parse_extended2(&body).unwrap(), &[1u8; 64][..]);
        assert!(extend2_body(2, &[]).is_err());
    }

    #[test]
    fn ntor_fits_one_create2() {
        assert_eq!(create2_cell_count(84), 1);
        assert_eq!(create2_cell_count(505), 1);
        assert_eq!(create2_cell_count(506), 2);
    }
}

use super::{read_u16, Cell, CellError, CertsCell, Command, RelayFormat, RelayMsg};
use std::fmt::Write;

/// Sixteen bytes per line: offset, hex bytes, printable ASCII.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for (line, chunk) in bytes.chunks(16).enumerate() {
        let _ = write!(out, "{:08x} ", line * 16);
        for i in 0..16 {
            match chunk.get(i) {
                Some(b) => {
                    let _ = write!(out, " {b:02x}");
                }
                None => out.push_str("   "),
            }
        }
        out.push_str("  |");
        out.extend(chunk.iter().map(|&b| {
            if b.is_ascii_graphic() || b == b' ' {
                b as char
            } else {
                '.'
            }
        }));
        out.push_str("|\n");
    }
    out
}

fn describe(cell: &Cell, relay_format: RelayFormat) -> String {
    match cell.command {
        Command::Create2 => match (read_u16(&cell.payload, 0), read_u16(&cell.payload, 2)) {
            (Ok(htype), Ok(hlen)) => format!("htype=0x{htype:04x} hlen={hlen}"),
            _ => "truncated".to_string(),
        },
        Command::Created2 => match read_u16(&cell.payload, 0) {
            Ok(hlen) => format!("hlen={hlen}"),
            Err(_) => "truncated".to_string(),
        },
        Command::Relay => match RelayMsg::decode(relay_format, &cell.payload) {
            Ok(m) => {
                let mut s = format!("relay_cmd={:?} data_len={}", m.command(), m.data().len());
                if let Some(f) = m.fragment() {
                    let _ = write!(s, " msg_id={} frag={}/{}", f.msg_id, f.index + 1, f.total);
                }
                s
            }
            Err(_) => "relay body opaque (encrypted or foreign layout)".to_string(),
        },
        Command::Certs => match CertsCell::parse(&cell.payload) {
            Ok(c) => format!("certs={}", c.certs.len()),
            Err(e) => format!("malformed certs: {e}"),
        },
        Command::Destroy => format!("reason={}", cell.payload.first().copied().unwrap_or(0)),
        Command::Padding | Command::Versions => String::new(),
    }
}

/// Renders a stream of concatenated cells for regression files.
pub fn dump_cells(bytes: &[u8], relay_format: RelayFormat) -> Result<String, CellError> {
    let mut out = String::new();
    let mut rest = bytes;
    let mut n = 0;
    while !rest.is_empty() {
        let (cell, tail) = Cell::pop(rest)?;
        let wire = &rest[..rest.len() - tail.len()];
        let _ = writeln!(
            out,
            "cell {n}: circ_id=0x{:08x} command={}({}) wire_len={} {}",
            cell.circ_id,
            cell.command.name(),
            cell.command.code(),
            wire.len(),
            describe(&cell, relay_format)
        );
        out.push_str(&hex_dump(wire));
        rest = tail;
        n += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_dump_format() {
        let d = hex_dump(b"ABCDEFGHIJKLMNOPq\x00");
        assert_eq!(
            d,
            "00000000  41 42 43 44 45 46 47 48 49 4a 4b 4c 4d 4e 4f 50  |ABCDEFGHIJKLMNOP|\n\
             00000010  71 00                                            |q.|\n"
        );
    }

    #[test]
    fn dump_padding_cell() {
        let wire = Cell::fixed(0, Command::Padding, &[]).unwrap().encode();
        let d = dump_cells(&wire, RelayFormat::Fragmented).unwrap();
        assert!(d.starts_with("cell 0: circ_id=0x00000000 command=PADDING(0) wire_len=514"));
        assert_eq!(d.lines().count(), 1 + 33);
        assert!(dump_cells(&wire[..100], RelayFormat::Standard).is_err());
    }
}

#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsim::cells::{dump_cells, Cell, RelayFormat};

fuzz_target!(|data: &[u8]| {
    if let Ok(cell) = Cell::decode(data) {
        assert_eq!(Cell::decode(&cell.encode()).unwrap(), cell);
    }
    let mut rest = data;
    while let Ok((cell, tail)) = Cell::pop(rest) {
        assert_eq!(cell.encode().len() + tail.len(), rest.len());
        rest = tail;
    }
    let _ = dump_cells(data, RelayFormat::Fragmented);
    let _ = dump_cells(data, RelayFormat::Standard);
});

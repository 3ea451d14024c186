use super::{
    CellError, Fragment, FragmentedBody, RelayCommand, RelayFormat, RelayMessage, RelayMessageF, RelayMsg,
    FRAG_DATA_LEN, FRAG_DIGEST_LEN, MAX_MESSAGE_LEN, RELAY_DATA_LEN,
};
use std::collections::BTreeMap;

/// Messages a [`ReassemblyBuffer`] may hold partially at once.
pub const REASSEMBLY_WINDOW: usize = 8;

/// Fragments needed for `len` bytes in the fragmenting layout.
pub fn fragment_count(len: usize) -> usize {
    len.div_ceil(FRAG_DATA_LEN)
}

/// Splits `data` into relay messages.
///
/// The standard layout has no fragment header, so it accepts at most one
/// cell's worth of data. The fragmenting layout always emits fragments, even
/// for a single cell.
pub fn fragment_payload(
    data: &[u8],
    format: RelayFormat,
    command: RelayCommand,
    msg_id: u16,
) -> Result<Vec<RelayMsg>, CellError> {
    if data.is_empty() {
        return Err(CellError::EmptyPayload);
    }
    match format {
        RelayFormat::Standard => {
            if data.len() > RELAY_DATA_LEN {
                return Err(CellError::Oversize {
                    len: data.len(),
                    max: RELAY_DATA_LEN,
                });
            }
            Ok(vec![RelayMsg::Standard(RelayMessage::new(command, 0, data)?)])
        }
        RelayFormat::Fragmented => {
            let total = fragment_count(data.len());
            if total > u8::MAX as usize || data.len() > MAX_MESSAGE_LEN {
                return Err(CellError::Oversize {
                    len: data.len(),
                    max: MAX_MESSAGE_LEN,
                });
            }
            Ok(data
                .chunks(FRAG_DATA_LEN)
                .enumerate()
                .map(|(i, chunk)| {
                    RelayMsg::Fragmented(RelayMessageF {
                        digest: [0; FRAG_DIGEST_LEN],
                        command,
                        body: FragmentedBody::Fragment(Fragment {
                            msg_id,
                            index: i as u8,
                            total: total as u8,
                            data: chunk.to_vec(),
                        }),
                    })
                })
                .collect())
        }
    }
}

/// Reassembles one message from its fragments, in any order.
pub fn reassemble(fragments: &[Fragment]) -> Result<Vec<u8>, CellError> {
    let first = fragments.first().ok_or(CellError::NoFragments)?;
    let total = first.total;
    let mut slots: Vec<Option<&[u8]>> = vec![None; total as usize];
    for f in fragments {
        if f.msg_id != first.msg_id {
            return Err(CellError::MixedMessages);
        }
        if f.total != total {
            return Err(CellError::TotalMismatch);
        }
        let slot = slots
            .get_mut(f.index as usize)
            .ok_or(CellError::FragmentIndex { index: f.index, total })?;
        if slot.is_some() {
            return Err(CellError::DuplicateIndex(f.index));
        }
        *slot = Some(&f.data);
    }
    let mut out = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        let part = slot.ok_or(CellError::MissingIndex(i as u8))?;
        if out.len() + part.len() > MAX_MESSAGE_LEN {
            return Err(CellError::ReassemblyOverflow);
        }
        out.extend_from_slice(part);
    }
    Ok(out)
}

/// Per-circuit message-id source. Wraps at 2^16.
#[derive(Clone, Debug, Default)]
pub struct MsgIdCounter(u16);

impl MsgIdCounter {
    pub fn next_id(&mut self) -> u16 {
        let id = self.0;
        self.0 = self.0.wrapping_add(1);
        id
    }
}

#[derive(Clone, Debug)]
struct Partial {
    total: u8,
    parts: Vec<Option<Vec<u8>>>,
    received: usize,
}

/// Collects fragments for one circuit endpoint. At most
/// [`REASSEMBLY_WINDOW`] messages may be incomplete at a time.
#[derive(Clone, Debug, Default)]
pub struct ReassemblyBuffer {
    pending: BTreeMap<u16, Partial>,
}

impl ReassemblyBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Adds a fragment; returns the payload once its message is complete.
    pub fn push(&mut self, fragment: Fragment) -> Result<Option<Vec<u8>>, CellError> {
        let Fragment {
            msg_id,
            index,
            total,
            data,
        } = fragment;
        if index >= total {
            return Err(CellError::FragmentIndex { index, total });
        }
        if !self.pending.contains_key(&msg_id) && self.pending.len() >= REASSEMBLY_WINDOW {
            return Err(CellError::WindowFull);
        }
        let partial = self.pending.entry(msg_id).or_insert_with(|| Partial {
            total,
            parts: vec![None; total as usize],
            received: 0,
        });
        if partial.total != total {
            return Err(CellError::TotalMismatch);
        }
        let slot = &mut partial.parts[index as usize];
        if slot.is_some() {
            return Err(CellError::DuplicateIndex(index));
        }
        *slot = Some(data);
        partial.received += 1;
        if partial.received < total as usize {
            return Ok(None);
        }
        let done = self.pending.remove(&msg_id).expect("entry present");
        Ok(Some(done.parts.into_iter().flatten().flatten().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frags(data: &[u8]) -> Vec<Fragment> {
        fragment_payload(data, RelayFormat::Fragmented, RelayCommand::Extend2, 7)
            .unwrap()
            .iter()
            .map(|m| m.fragment().unwrap().clone())
            .collect()
    }

    #[test]
    fn counts_at_boundaries() {
        for (len, n) in [
            (1, 1),
            (487, 1),
            (488, 2),
            (800, 2),
            (897, 2),
            (974, 2),
            (975, 3),
            (1184, 3),
        ] {
            assert_eq!(fragment_count(len), n, "len {len}");
            assert_eq!(frags(&vec![1; len]).len(), n);
        }
    }

    #[test]
    fn standard_mode_limits() {
        let one = fragment_payload(&[1; 498], RelayFormat::Standard, RelayCommand::Data, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(
            fragment_payload(&[1; 499], RelayFormat::Standard, RelayCommand::Data, 0),
            Err(CellError::Oversize { len: 499, max: 498 })
        );
        assert_eq!(
            fragment_payload(&[], RelayFormat::Fragmented, RelayCommand::Data, 0),
            Err(CellError::EmptyPayload)
        );
    }

    #[test]
    fn reassembly_errors() {
        let data: Vec<u8> = (0..1500u32).map(|i| i as u8).collect();
        let mut f = frags(&data);
        f.reverse();
        assert_eq!(reassemble(&f).unwrap(), data);
        let missing: Vec<_> = f.iter().filter(|x| x.index != 1).cloned().collect();
        assert_eq!(reassemble(&missing), Err(CellError::MissingIndex(1)));
        let mut dup = f.clone();
        dup.push(f[0].clone());
        assert_eq!(reassemble(&dup), Err(CellError::DuplicateIndex(f[0].index)));
        let mut mixed = f.clone();
        mixed[0].total += 1;
        assert_eq!(reassemble(&mixed), Err(CellError::TotalMismatch));
        mixed = f.clone();
        mixed[1].msg_id = 8;
        assert_eq!(reassemble(&mixed), Err(CellError::MixedMessages));
        assert_eq!(reassemble(&[]), Err(CellError::NoFragments));
    }

    #[test]
    fn buffer_window() {
        let mut buf = ReassemblyBuffer::new();
        for id in 0..8u16 {
            let f = Fragment {
                msg_id: id,
                index: 0,
                total: 2,
                data: vec![id as u8],
            };
            assert_eq!(buf.push(f).unwrap(), None);
        }
        let ninth = Fragment {
            msg_id: 8,
            index: 0,
            total: 2,
            data: vec![],
        };
        assert_eq!(buf.push(ninth), Err(CellError::WindowFull));
        let done = buf
            .push(Fragment {
                msg_id: 3,
                index: 1,
                total: 2,
                data: vec![9],
            })
            .unwrap();
        assert_eq!(done, Some(vec![3, 9]));
        assert_eq!(buf.pending(), 7);
        let dup = Fragment {
            msg_id: 4,
            index: 0,
            total: 2,
            data: vec![],
        };
        assert_eq!(buf.push(dup), Err(CellError::DuplicateIndex(0)));
    }

    #[test]
    fn msg_ids_wrap() {
        let mut c = MsgIdCounter(u16::MAX);
        assert_eq!(c.next_id(), u16::MAX);
        assert_eq!(c.next_id(), 0);
    }
}

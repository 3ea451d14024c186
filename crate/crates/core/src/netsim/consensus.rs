//! Line-oriented consensus documents and quorum verification.

use crate::handshake::NODE_ID_LEN;
use crate::registry::SchemeProfile;
use crate::toy_crypto::{sim_sign, sim_verify, CryptoError};
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub const CONSENSUS_HEADER: &str = "consensus v1";

/// One `r` line: a relay, its flags and digests of its onion keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouterEntry {
    pub nickname: String,
    pub node_id: [u8; NODE_ID_LEN],
    /// Capitalised flag names, sorted.
    pub flags: Vec<String>,
    /// `(key name, sha256 of the public key)`, sorted by name.
    pub keys: Vec<(String, [u8; 32])>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsensusDoc {
    pub epoch: u64,
    pub valid_after: u64,
    pub routers: Vec<RouterEntry>,
    pub signatures: Vec<([u8; NODE_ID_LEN], Vec<u8>)>,
}

fn parse_err(line: usize, msg: &str) -> String {
    format!("line {}: {msg}", line + 1)
}

fn fixed_hex<const N: usize>(s: &str) -> Option<[u8; N]> {
    if s.len() != 2 * N || s.bytes().any(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let v = hex::decode(s).ok()?;
    v.try_into().ok()
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_graphic() && b != b',' && b != b'=')
}

impl ConsensusDoc {
    /// The signed part: header, epoch, validity and router lines.
    pub fn body(&self) -> String {
        let mut s = format!(
            "{CONSENSUS_HEADER}\nepoch {}\nvalid-after {}\n",
            self.epoch, self.valid_after
        );
        for r in &self.routers {
            let _ = write!(s, "r {} {} {}", r.nickname, hex::encode(r.node_id), r.flags.join(","));
            for (name, digest) in &r.keys {
                let _ = write!(s, " {name}={}", hex::encode(digest));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.body();
        for (id, sig) in &self.signatures {
            let _ = writeln!(s, "directory-signature {} {}", hex::encode(id), hex::encode(sig));
        }
        s
    }

    /// Appends a signature by one authority over [`ConsensusDoc::body`].
    pub fn sign(
        &mut self,
        authority: [u8; NODE_ID_LEN],
        secret_key: &[u8],
        scheme: &SchemeProfile,
    ) -> Result<(), CryptoError> {
        let sig = sim_sign(scheme, secret_key, self.body().as_bytes())?;
        self.signatures.push((authority, sig));
        Ok(())
    }

    pub fn router(&self, node_id: &[u8; NODE_ID_LEN]) -> Option<&RouterEntry> {
        self.routers.iter().find(|r| &r.node_id == node_id)
    }

    /// Parses a document. Only the canonical rendering is accepted, so any
    /// textual change either fails here or changes the signed body.
    pub fn parse(text: &str) -> Result<ConsensusDoc, String> {
        if !text.ends_with('\n') {
            return Err("document must end with a newline".into());
        }
        let lines: Vec<&str> = text[..text.len() - 1].split('\n').collect();
        if lines.first() != Some(&CONSENSUS_HEADER) {
            return Err(parse_err(0, "bad header"));
        }
        let number = |i: usize, key: &str| -> Result<u64, String> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.strip_prefix(' '))
                .filter(|v| !v.starts_with('+') && (v == &"0" || !v.starts_with('0')))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(i, &format!("expected `{key} <n>`")))
        };
        let epoch = number(1, "epoch")?;
        let valid_after = number(2, "valid-after")?;
        let mut doc = ConsensusDoc {
            epoch,
            valid_after,
            routers: Vec::new(),
            signatures: Vec::new(),
        };
        let mut i = 3;
        while let Some(line) = lines.get(i).and_then(|l| l.strip_prefix("r ")) {
            let mut parts = line.split(' ');
            let (Some(nick), Some(id), Some(flags)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(i, "short router line"));
            };
            if !valid_token(nick) {
                return Err(parse_err(i, "bad nickname"));
            }
            let node_id = fixed_hex::<NODE_ID_LEN>(id).ok_or_else(|| parse_err(i, "bad node id"))?;
            let flags: Vec<String> = flags.split(',').map(str::to_string).collect();
            if flags.iter().any(|f| !valid_token(f)) {
                return Err(parse_err(i, "bad flag"));
            }
            let mut keys = Vec::new();
            for kv in parts {
                let (name, digest) = kv.split_once('=').ok_or_else(|| parse_err(i, "bad key entry"))?;
                if !valid_token(name) {
                    return Err(parse_err(i, "bad key name"));
                }
                let digest = fixed_hex::<32>(digest).ok_or_else(|| parse_err(i, "bad key digest"))?;
                keys.push((name.to_string(), digest));
            }
            doc.routers.push(RouterEntry {
                nickname: nick.to_string(),
                node_id,
                flags,
                keys,
            });
            i += 1;
        }
        while let Some(line) = lines.get(i).and_then(|l| l.strip_prefix("directory-signature ")) {
            let (id, sig) = line
                .split_once(' ')
                .ok_or_else(|| parse_err(i, "short signature line"))?;
            let id = fixed_hex::<NODE_ID_LEN>(id).ok_or_else(|| parse_err(i, "bad authority id"))?;
            if sig.is_empty() || sig.bytes().any(|b| b.is_ascii_uppercase()) {
                return Err(parse_err(i, "bad signature"));
            }
            let sig = hex::decode(sig).map_err(|_| parse_err(i, "bad signature"))?;
            doc.signatures.push((id, sig));
            i += 1;
        }
        if i != lines.len() {
            return Err(parse_err(i, "unexpected line"));
        }
        if doc.to_text() != text {
            return Err("document is not in canonical form".into());
        }
        Ok(doc)
    }
}

/// True when a strict majority (`floor(n/2) + 1`) of the `n` listed
/// authorities have a valid signature on the body. Each authority counts
/// once.
pub fn verify_consensus(
    doc: &ConsensusDoc,
    authorities: &[([u8; NODE_ID_LEN], Vec<u8>)],
    scheme: &SchemeProfile,
) -> bool {
    if authorities.is_empty() {
        return false;
    }
    let body = doc.body();
    let mut good = BTreeSet::new();
    for (id, sig) in &doc.signatures {
        let Some((_, pk)) = authorities.iter().find(|(a, _)| a == id) else {
            continue;
        };
        if sim_verify(scheme, pk, body.as_bytes(), sig) == Ok(true) {
            good.insert(*id);
        }
    }
    good.len() > authorities.len() / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::ProfileSet;
    use crate::toy_crypto::{sim_sig_keygen, KeyPair};

    fn setup(n: usize) -> (SchemeProfile, Vec<KeyPair>, ConsensusDoc) {
        let scheme = ProfileSet::default_set().scheme("ed25519").unwrap().clone();
        let keys: Vec<KeyPair> = (0..n)
            .map(|i| sim_sig_keygen(&scheme, &[i as u8; 32]).unwrap())
            .collect();
        let doc = ConsensusDoc {
            epoch: 3,
            valid_after: 0,
            routers: vec![RouterEntry {
                nickname: "g1".into(),
                node_id: [0xab; 20],
                flags: vec!["Guard".into(), "HSDir".into()],
                keys: vec![("ntor".into(), [1; 32])],
            }],
            signatures: Vec::new(),
        };
        (scheme, keys, doc)
    }

    fn auths(keys: &[KeyPair]) -> Vec<([u8; 20], Vec<u8>)> {
        keys.iter()
            .enumerate()
            .map(|(i, k)| ([i as u8; 20], k.public_key.clone()))
            .collect()
    }

    #[test]
    fn quorum_rules() {
        let (scheme, keys, mut doc) = setup(2);
        let a = auths(&keys);
        doc.sign(a[0].0, &keys[0].secret_key, &scheme).unwrap();
        assert!(!verify_consensus(&doc, &a, &scheme), "1 of 2 is not a majority");
        // The same authority twice still counts once.
        let dup = doc.signatures[0].clone();
        doc.signatures.push(dup);
        assert!(!verify_consensus(&doc, &a, &scheme));
        doc.signatures.pop();
        doc.sign(a[1].0, &keys[1].secret_key, &scheme).unwrap();
        assert!(verify_consensus(&doc, &a, &scheme));

        let (scheme, keys, mut doc) = setup(3);
        let a = auths(&keys);
        doc.sign(a[0].0, &keys[0].secret_key, &scheme).unwrap();
        doc.sign(a[2].0, &keys[2].secret_key, &scheme).unwrap();
        assert!(verify_consensus(&doc, &a, &scheme), "2 of 3");
        assert!(!verify_consensus(&doc, &[], &scheme));
    }

    #[test]
    fn text_round_trip_and_tamper() {
        let (scheme, keys, mut doc) = setup(2);
        let a = auths(&keys);
        for (i, k) in keys.iter().enumerate() {
            doc.sign(a[i].0, &k.secret_key, &scheme).unwrap();
        }
        let text = doc.to_text();
        assert_eq!(ConsensusDoc::parse(&text).unwrap(), doc);
        let body_len = doc.body().len();
        for pos in 0..body_len {
            let mut bytes = text.clone().into_bytes();
            bytes[pos] ^= 0x01;
            let Ok(t) = String::from_utf8(bytes) else { continue };
            if let Ok(d) = ConsensusDoc::parse(&t) {
                assert!(!verify_consensus(&d, &a, &scheme), "flip at {pos} verified");
            }
        }
    }

    #[test]
    fn rejects_non_canonical() {
        let (_, _, doc) = setup(1);
        let text = doc.to_text();
        assert!(ConsensusDoc::parse(&text.replace("abab", "ABAB")).is_err());
        assert!(ConsensusDoc::parse(&text.replace("epoch 3", "epoch 03")).is_err());
        assert!(ConsensusDoc::parse(text.trim_end()).is_err());
        assert!(ConsensusDoc::parse(&format!("{text}junk\n")).is_err());
    }
}

use super::{read_u16, Cell, CellError, Command};
use crate::registry::{SchemeKind, SchemeProfile};
use crate::toy_crypto::{sim_sign, sim_verify, CryptoError, KeyPair};

/// Certificate type for a medium-term signing key.
pub const CERT_TYPE_SIGNING: u8 = 4;

const KEY_LEN: usize = 32;
const SIG_LEN: usize = 64;
const BARE_BODY_LEN: usize = KEY_LEN + SIG_LEN + 4;
const EXT_LEN: usize = 2 + 1 + 1 + KEY_LEN;
const EXT_TYPE_SIGNING_KEY: u8 = 4;
const ENTRY_HEADER_LEN: usize = 3;

/// Profile of the signature scheme certificates are sized for.
pub(crate) fn cert_signature_profile() -> SchemeProfile {
    SchemeProfile {
        id: "ed25519".to_string(),
        kind: SchemeKind::Signature,
        pk_len: KEY_LEN,
        sk_len: KEY_LEN,
        ct_len: 0,
        ss_len: 0,
        sig_len: SIG_LEN,
        security_category: 0,
    }
}

/// One certificate entry of a CERTS cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cert {
    pub cert_type: u8,
    pub certified_key: [u8; KEY_LEN],
    pub signature: [u8; SIG_LEN],
    pub expiration_hours: u32,
    /// Optional signing-key extension.
    pub signing_key: Option<[u8; KEY_LEN]>,
}

impl Cert {
    /// Signs `certified_key` with `signer`. When `embed_signing_key` is set
    /// the signer's public key travels in an extension.
    pub fn sign(
        cert_type: u8,
        certified_key: [u8; KEY_LEN],
        expiration_hours: u32,
        signer: &KeyPair,
        embed_signing_key: bool,
    ) -> Result<Cert, CryptoError> {
        let signing_key = if embed_signing_key {
            let mut k = [0u8; KEY_LEN];
            if signer.public_key.len() != KEY_LEN {
                return Err(CryptoError::LengthMismatch {
                    what: "certificate signing key",
                    expected: KEY_LEN,
                    actual: signer.public_key.len(),
                });
            }
            k.copy_from_slice(&signer.public_key);
            Some(k)
        } else {
            None
        };
        let mut cert = Cert {
            cert_type,
            certified_key,
            signature: [0; SIG_LEN],
            expiration_hours,
            signing_key,
        };
        let sig = sim_sign(&cert_signature_profile(), &signer.secret_key, &cert.signed_bytes())?;
        cert.signature.copy_from_slice(&sig);
        Ok(cert)
    }

    fn extension_bytes(&self) -> Vec<u8> {
        match &self.signing_key {
            None => Vec::new(),
            Some(key) => {
                let mut ext = Vec::with_capacity(EXT_LEN);
                ext.extend_from_slice(&(KEY_LEN as u16).to_be_bytes());
                ext.push(EXT_TYPE_SIGNING_KEY);
                ext.push(0);
                ext.extend_from_slice(key);
                ext
            }
        }
    }

    /// The bytes covered by the signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut m = vec![self.cert_type];
        m.extend_from_slice(&self.certified_key);
        m.extend_from_slice(&self.expiration_hours.to_be_bytes());
        m.extend(self.extension_bytes());
        m
    }

    fn body_len(&self) -> usize {
        BARE_BODY_LEN + if self.signing_key.is_some() { EXT_LEN } else { 0 }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.cert_type);
        out.extend_from_slice(&(self.body_len() as u16).to_be_bytes());
        out.extend_from_slice(&self.certified_key);
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.expiration_hours.to_be_bytes());
        out.extend(self.extension_bytes());
    }

    fn decode_body(cert_type: u8, body: &[u8]) -> Result<Cert, CellError> {
        let mut certified_key = [0u8; KEY_LEN];
        let mut signature = [0u8; SIG_LEN];
        let signing_key = match body.len() {
            BARE_BODY_LEN => None,
            n if n == BARE_BODY_LEN + EXT_LEN => {
                let ext = &body[BARE_BODY_LEN..];
                if read_u16(ext, 0)? as usize != KEY_LEN || ext[2] != EXT_TYPE_SIGNING_KEY {
                    return Err(CellError::MalformedCert);
                }
                let mut k = [0u8; KEY_LEN];
                k.copy_from_slice(&ext[4..]);
                Some(k)
            }
            _ => return Err(CellError::MalformedCert),
        };
        certified_key.copy_from_slice(&body[..KEY_LEN]);
        signature.copy_from_slice(&body[KEY_LEN..KEY_LEN + SIG_LEN]);
        let e = &body[KEY_LEN + SIG_LEN..BARE_BODY_LEN];
        Ok(Cert {
            cert_type,
            certified_key,
            signature,
            expiration_hours: u32::from_be_bytes([e[0], e[1], e[2], e[3]]),
            signing_key,
        })
    }
}

/// Why a parsed certificate was rejected.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CertError {
    #[error("certificate {0} has expired")]
    Expired(usize),
    #[error("certificate {0} has a bad signature")]
    BadSignature(usize),
    #[error("certificate {0} names a signing key other than the trusted one")]
    UntrustedSigningKey(usize),
}

/// The parsed payload of a CERTS cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertsCell {
    pub certs: Vec<Cert>,
}

impl CertsCell {
    pub fn encode_payload(&self) -> Result<Vec<u8>, CellError> {
        if self.certs.len() > u8::MAX as usize {
            return Err(CellError::Oversize {
                len: self.certs.len(),
                max: u8::MAX as usize,
            });
        }
        let mut out = vec![self.certs.len() as u8];
        for c in &self.certs {
            c.encode_into(&mut out);
        }
        Ok(out)
    }

    pub fn parse(payload: &[u8]) -> Result<CertsCell, CellError> {
        let count = *payload.first().ok_or(CellError::Truncated {
            needed: 1,
            available: 0,
        })?;
        let mut at = 1;
        let mut certs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            if payload.len() < at + ENTRY_HEADER_LEN {
                return Err(CellError::Truncated {
                    needed: at + ENTRY_HEADER_LEN,
                    available: payload.len(),
                });
            }
            let cert_type = payload[at];
            let len = read_u16(payload, at + 1)? as usize;
            let start = at + ENTRY_HEADER_LEN;
            let body = payload.get(start..start + len).ok_or(CellError::Truncated {
                needed: start + len,
                available: payload.len(),
            })?;
            certs.push(Cert::decode_body(cert_type, body)?);
            at = start + len;
        }
        if at != payload.len() {
            return Err(CellError::TrailingBytes);
        }
        Ok(CertsCell { certs })
    }

    /// Checks every certificate against `trusted_pk` at time `now_hours`.
    ///
    /// A certificate carrying a signing-key extension is checked against
    /// that key, which must equal `trusted_pk`.
    pub fn check(&self, trusted_pk: &[u8], now_hours: u32) -> Result<(), CertError> {
        let profile = cert_signature_profile();
        for (i, c) in self.certs.iter().enumerate() {
            let key: &[u8] = match &c.signing_key {
                Some(k) if k.as_slice() != trusted_pk => return Err(CertError::UntrustedSigningKey(i)),
                Some(k) => k,
                None => trusted_pk,
            };
            if c.expiration_hours <= now_hours {
                return Err(CertError::Expired(i));
            }
            let ok = sim_verify(&profile, key, &c.signed_bytes(), &c.signature).unwrap_or(false);
            if !ok {
                return Err(CertError::BadSignature(i));
            }
        }
        Ok(())
    }
}

/// Builds a CERTS cell on circuit 0.
pub fn encode_certs(certs: &[Cert]) -> Result<Cell, CellError> {
    let payload = CertsCell { certs: certs.to_vec() }.encode_payload()?;
    Cell::variable(0, Command::Certs, payload)
}

/// Parses a CERTS cell and checks all certificates. Malformed payloads are
/// errors; expired or badly signed certificates yield `false`.
pub fn verify_certs(cell: &Cell, trusted_pk: &[u8], now_hours: u32) -> Result<bool, CellError> {
    if cell.command != Command::Certs {
        return Err(CellError::WrongLayout(cell.command));
    }
    let parsed = CertsCell::parse(&cell.payload)?;
    Ok(parsed.check(trusted_pk, now_hours).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_crypto::sim_sig_keygen;

    fn signer(tag: u8) -> KeyPair {
        sim_sig_keygen(&cert_signature_profile(), &[tag; 32]).unwrap()
    }

    #[test]
    fn payload_sizes() {
        let kp = signer(1);
        let bare = Cert::sign(CERT_TYPE_SIGNING, [7; 32], 100, &kp, false).unwrap();
        let ext = Cert::sign(CERT_TYPE_SIGNING, [7; 32], 100, &kp, true).unwrap();
        assert_eq!(encode_certs(&[bare]).unwrap().payload.len(), 104);
        assert_eq!(encode_certs(&[ext]).unwrap().payload.len(), 140);
    }

    #[test]
    fn verification_outcomes() {
        let kp = signer(1);
        for embed in [false, true] {
            let cert = Cert::sign(CERT_TYPE_SIGNING, [7; 32], 100, &kp, embed).unwrap();
            let cell = encode_certs(std::slice::from_ref(&cert)).unwrap();
            assert_eq!(verify_certs(&cell, &kp.public_key, 99), Ok(true));
            assert_eq!(verify_certs(&cell, &kp.public_key, 100), Ok(false));
            assert_eq!(verify_certs(&cell, &signer(2).public_key, 1), Ok(false));
            let mut bad = cert;
            bad.certified_key[0] ^= 1;
            let cell = encode_certs(&[bad]).unwrap();
            assert_eq!(verify_certs(&cell, &kp.public_key, 1), Ok(false));
        }
    }

    #[test]
    fn parse_errors() {
        let kp = signer(1);
        let cert = Cert::sign(CERT_TYPE_SIGNING, [7; 32], 100, &kp, true).unwrap();
        let payload = encode_certs(std::slice::from_ref(&cert)).unwrap().payload;
        assert_eq!(CertsCell::parse(&payload).unwrap().certs, vec![cert]);
        for cut in 0..payload.len() {
            assert!(CertsCell::parse(&payload[..cut]).is_err(), "cut {cut}");
        }
        let mut trailing = payload.clone();
        trailing.push(0);
        assert_eq!(CertsCell::parse(&trailing), Err(CellError::TrailingBytes));
        let mut bad_ext = payload;
        bad_ext[1 + 3 + 100 + 2] = 9;
        assert_eq!(CertsCell::parse(&bad_ext), Err(CellError::MalformedCert));
    }
}

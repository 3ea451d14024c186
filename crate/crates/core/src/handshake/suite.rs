use super::HandshakeError;
use crate::cells::{HTYPE_HYBRID, HTYPE_NTOR, HTYPE_NTOR_V3, HTYPE_PURE_KEM};
use crate::registry::{ProfileSet, SchemeKind, SchemeProfile};
use crate::toy_crypto::{DH_LEN, DH_SCHEME_ID, KEM_EPH_LEN};
use std::fmt;

/// Message framing and cost attribution of a suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Ntor,
    NtorV3,
    HsNtor,
}

impl Variant {
    /// Whether onionskin and reply carry an encrypted message.
    pub fn carries_messages(self) -> bool {
        !matches!(self, Variant::Ntor)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ntor => "ntor",
            Variant::NtorV3 => "ntor-v3",
            Variant::HsNtor => "hs-ntor",
        }
    }
}

/// A named handshake configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteSpec {
    pub id: String,
    pub classical: Option<SchemeProfile>,
    pub pq_kem: Option<SchemeProfile>,
    pub variant: Variant,
    pub protoid: Vec<u8>,
}

impl fmt::Display for SuiteSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl SuiteSpec {
    pub fn new(
        id: &str,
        classical: Option<SchemeProfile>,
        pq_kem: Option<SchemeProfile>,
        variant: Variant,
    ) -> Result<SuiteSpec, HandshakeError> {
        let bad = |msg: String| Err(HandshakeError::InvalidSuite(format!("{id}: {msg}")));
        if classical.is_none() && pq_kem.is_none() {
            return bad("needs a classical scheme or a KEM".into());
        }
        if let Some(c) = &classical {
            if c.kind != SchemeKind::ClassicalKa {
                return bad(format!("{} is not a classical key agreement", c.id));
            }
            if c.pk_len != DH_LEN || c.ss_len != DH_LEN {
                return bad(format!("{} must use {DH_LEN}-byte shares", c.id));
            }
        }
        if let Some(k) = &pq_kem {
            if k.kind != SchemeKind::Kem {
                return bad(format!("{} is not a KEM", k.id));
            }
            if k.security_category < 1 {
                return bad(format!("{} lacks a post-quantum security category", k.id));
            }
            if k.ct_len < KEM_EPH_LEN {
                return bad(format!("{} ciphertext shorter than {KEM_EPH_LEN} bytes", k.id));
            }
        }
        let mut protoid = format!("onionsim:{}:", variant.name()).into_bytes();
        for s in classical.iter().chain(pq_kem.iter()) {
            protoid.extend_from_slice(s.id.as_bytes());
            protoid.push(b'+');
        }
        protoid.pop();
        Ok(SuiteSpec {
            id: id.to_string(),
            classical,
            pq_kem,
            variant,
            protoid,
        })
    }

    pub fn is_hybrid(&self) -> bool {
        self.classical.is_some() && self.pq_kem.is_some()
    }

    /// No classical share: the relay authenticates with a static KEM key.
    pub fn is_pure_kem(&self) -> bool {
        self.classical.is_none()
    }

    /// CREATE2 handshake type.
    pub fn htype(&self) -> u16 {
        match (self.is_pure_kem(), self.is_hybrid(), self.variant) {
            (true, _, _) => HTYPE_PURE_KEM,
            (false, true, _) => HTYPE_HYBRID,
            (false, false, Variant::Ntor) => HTYPE_NTOR,
            (false, false, _) => HTYPE_NTOR_V3,
        }
    }

    /// Length of the relay's static public key named by the onionskin.
    pub fn static_pk_len(&self) -> usize {
        match (&self.classical, &self.pq_kem) {
            (Some(c), _) => c.pk_len,
            (None, Some(k)) => k.pk_len,
            (None, None) => 0,
        }
    }

    /// Onionskin length with a client message of `msg_len` bytes.
    pub fn onionskin_len(&self, msg_len: usize) -> usize {
        let mut n = super::NODE_ID_LEN + super::KEYID_LEN;
        if let Some(c) = &self.classical {
            n += c.pk_len;
        }
        if let Some(k) = &self.pq_kem {
            n += k.pk_len;
            if self.is_pure_kem() {
                n += k.ct_len;
            }
        }
        if self.variant.carries_messages() {
            n += 2 + msg_len;
        }
        n
    }

    /// Reply length with a server message of `msg_len` bytes.
    pub fn reply_len(&self, msg_len: usize) -> usize {
        let mut n = super::AUTH_LEN;
        if let Some(c) = &self.classical {
            n += c.pk_len;
        }
        if let Some(k) = &self.pq_kem {
            n += k.ct_len;
        }
        if self.variant.carries_messages() {
            n += 2 + msg_len;
        }
        n
    }

    /// Schemes whose key exchange each handshake performs once.
    pub fn members(&self) -> impl Iterator<Item = &SchemeProfile> {
        self.classical.iter().chain(self.pq_kem.iter())
    }
}

/// Suites shipped by default, in a stable order.
pub const DEFAULT_SUITE_IDS: [&str; 9] = [
    "ntor",
    "ntor-v3",
    "hs-ntor",
    "hybrid-ml-kem-512",
    "hybrid-ml-kem-768",
    "hybrid-sntrup761",
    "kem-ml-kem-512",
    "kem-ml-kem-768",
    "kem-sntrup761",
];

/// Resolves a suite id against `profiles`.
///
/// Besides the defaults, `hybrid-<kem>` and `kem-<kem>` work for any KEM in
/// the profile set.
pub fn suite_by_id(profiles: &ProfileSet, id: &str) -> Result<SuiteSpec, HandshakeError> {
    let classical = || profiles.scheme(DH_SCHEME_ID).cloned();
    let kem = |name: &str| -> Result<SchemeProfile, HandshakeError> {
        let s = profiles
            .scheme(name)
            .map_err(|_| HandshakeError::UnknownSuite(id.to_string()))?;
        if s.kind != SchemeKind::Kem {
            return Err(HandshakeError::UnknownSuite(id.to_string()));
        }
        Ok(s.clone())
    };
    match id {
        "ntor" => SuiteSpec::new(id, Some(classical()?), None, Variant::Ntor),
        "ntor-v3" => SuiteSpec::new(id, Some(classical()?), None, Variant::NtorV3),
        "hs-ntor" => SuiteSpec::new(id, Some(classical()?), None, Variant::HsNtor),
        _ => {
            if let Some(name) = id.strip_prefix("hybrid-") {
                SuiteSpec::new(id, Some(classical()?), Some(kem(name)?), Variant::Ntor)
            } else if let Some(name) = id.strip_prefix("kem-") {
                SuiteSpec::new(id, None, Some(kem(name)?), Variant::Ntor)
            } else {
                Err(HandshakeError::UnknownSuite(id.to_string()))
            }
        }
    }
}

pub fn default_suites(profiles: &ProfileSet) -> Result<Vec<SuiteSpec>, HandshakeError> {
    DEFAULT_SUITE_IDS.iter().map(|id| suite_by_id(profiles, id)).collect()
}

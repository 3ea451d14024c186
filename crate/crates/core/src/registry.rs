//! Scheme size profiles, per-device operation rates, and the key-exchange and
//! signature time budgets derived from them.
//!
//! Profiles are loaded from a human-editable document: a `profile-set v1`
//! header line followed by a TOML body (see `profiles/default.profile`). The
//! loaded [`ProfileSet`] is immutable and validated: lengths agree with the
//! scheme kind, rates are strictly positive, and every rate refers to a known
//! scheme.
//!
//! Timings are returned as `f64` milliseconds computed straight from the
//! rates; the simulator converts them to [`crate::VirtualTime`] at the point
//! where they are charged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The header line every profile document must start with.
pub const PROFILE_HEADER: &str = "profile-set v1";

/// The profile document shipped with the crate.
pub const DEFAULT_PROFILE_DOCUMENT: &str = include_str!("../profiles/default.profile");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("profile document must start with `{PROFILE_HEADER}`")]
    MissingHeader,
    #[error("unsupported profile document version `{0}`")]
    UnsupportedVersion(String),
    #[error("profile document does not parse: {0}")]
    Parse(String),
    #[error("duplicate scheme id `{0}`")]
    DuplicateScheme(String),
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown scheme kind `{0}`")]
    UnknownKind(String),
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("scheme `{scheme}`: field `{field}` is invalid for its kind")]
    InvalidLength { scheme: String, field: &'static str },
    #[error("scheme `{scheme}`: security category {category} outside 0..=5")]
    InvalidCategory { scheme: String, category: u8 },
    #[error("device `{device}`: non-positive rate for ({scheme}, {op})")]
    NonPositiveRate { device: String, scheme: String, op: Op },
    #[error("device `{device}`: operation {op} does not apply to scheme `{scheme}`")]
    OpNotApplicable { device: String, scheme: String, op: Op },
    #[error("device `{device}`: fixed cost `{step}` must be a finite non-negative number")]
    InvalidFixedCost { device: String, step: String },
    #[error("device `{device}` has no rate for ({scheme}, {op})")]
    MissingRate { device: String, scheme: String, op: Op },
    #[error("device `{device}` has no fixed cost `{step}`")]
    MissingFixedCost { device: String, step: String },
    #[error("scheme `{scheme}` has kind {actual}, expected {expected}")]
    WrongKind {
        scheme: String,
        expected: SchemeKind,
        actual: SchemeKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemeKind {
    Kem,
    ClassicalKa,
    Signature,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Kem => "kem",
            SchemeKind::ClassicalKa => "classical-ka",
            SchemeKind::Signature => "signature",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = RegistryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kem" => Ok(SchemeKind::Kem),
            "classical-ka" => Ok(SchemeKind::ClassicalKa),
            "signature" => Ok(SchemeKind::Signature),
            other => Err(RegistryError::UnknownKind(other.to_string())),
        }
    }
}

/// Primitive operations that carry a per-second rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Keygen,
    Encaps,
    Decaps,
    Keypair,
    Sign,
    Verify,
    KeyExchange,
}

impl Op {
    pub const ALL: [Op; 7] = [
        Op::Keygen,
        Op::Encaps,
        Op::Decaps,
        Op::Keypair,
        Op::Sign,
        Op::Verify,
        Op::KeyExchange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Keygen => "keygen",
            Op::Encaps => "encaps",
            Op::Decaps => "decaps",
            Op::Keypair => "keypair",
            Op::Sign => "sign",
            Op::Verify => "verify",
            Op::KeyExchange => "key_exchange",
        }
    }

    fn applies_to(self, kind: SchemeKind) -> bool {
        match self {
            Op::Keygen | Op::Encaps | Op::Decaps | Op::KeyExchange => {
                matches!(kind, SchemeKind::Kem | SchemeKind::ClassicalKa)
            }
            Op::Keypair | Op::Sign | Op::Verify => kind == SchemeKind::Signature,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Op {
    type Err = RegistryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| RegistryError::UnknownOp(s.to_string()))
    }
}

/// Byte sizes and security category of one named scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeProfile {
    pub id: String,
    pub kind: SchemeKind,
    pub pk_len: usize,
    pub sk_len: usize,
    /// Zero for signature schemes.
    pub ct_len: usize,
    /// Zero for signature schemes.
    pub ss_len: usize,
    /// Zero for key-establishment schemes.
    pub sig_len: usize,
    /// NIST PQC security category; 0 marks a classical-only scheme.
    pub security_category: u8,
}

impl SchemeProfile {
    fn validate(&self) -> Result<(), RegistryError> {
        let bad = |field| {
            Err(RegistryError::InvalidLength {
                scheme: self.id.clone(),
                field,
            })
        };
        if self.pk_len == 0 {
            return bad("pk_len");
        }
        if self.sk_len == 0 {
            return bad("sk_len");
        }
        match self.kind {
            SchemeKind::Kem | SchemeKind::ClassicalKa => {
                if self.ct_len == 0 {
                    return bad("ct_len");
                }
                if self.ss_len == 0 {
                    return bad("ss_len");
                }
                if self.sig_len != 0 {
                    return bad("sig_len");
                }
            }
            SchemeKind::Signature => {
                if self.sig_len == 0 {
                    return bad("sig_len");
                }
                if self.ct_len != 0 {
                    return bad("ct_len");
                }
                if self.ss_len != 0 {
                    return bad("ss_len");
                }
            }
        }
        if self.security_category > 5 {
            return Err(RegistryError::InvalidCategory {
                scheme: self.id.clone(),
                category: self.security_category,
            });
        }
        Ok(())
    }

    fn expect_kind(&self, expected: SchemeKind) -> Result<(), RegistryError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(RegistryError::WrongKind {
                scheme: self.id.clone(),
                expected,
                actual: self.kind,
            })
        }
    }
}

/// Per-device operation rates and fixed protocol-step costs.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceProfile {
    pub id: String,
    /// Operations per second, keyed by `(scheme id, op)`.
    pub rates: BTreeMap<(String, Op), f64>,
    /// Milliseconds per named protocol step.
    pub fixed_costs: BTreeMap<String, f64>,
}

impl DeviceProfile {
    pub fn rate(&self, scheme: &str, op: Op) -> Option<f64> {
        self.rates.get(&(scheme.to_string(), op)).copied()
    }

    fn require_rate(&self, scheme: &str, op: Op) -> Result<f64, RegistryError> {
        self.rate(scheme, op).ok_or_else(|| RegistryError::MissingRate {
            device: self.id.clone(),
            scheme: scheme.to_string(),
            op,
        })
    }

    pub fn fixed_cost(&self, step: &str) -> Result<f64, RegistryError> {
        self.fixed_costs
            .get(step)
            .copied()
            .ok_or_else(|| RegistryError::MissingFixedCost {
                device: self.id.clone(),
                step: step.to_string(),
            })
    }

    /// Copy of this device with every primitive rate set to infinity, so only
    /// the fixed protocol-step costs remain.
    pub fn fixed_costs_only(&self) -> DeviceProfile {
        let mut out = self.clone();
        for rate in out.rates.values_mut() {
            *rate = f64::INFINITY;
        }
        out
    }

    /// The three KEM-style rates, if all are present.
    fn kem_rates(&self, scheme: &str) -> Option<[f64; 3]> {
        Some([
            self.rate(scheme, Op::Keygen)?,
            self.rate(scheme, Op::Encaps)?,
            self.rate(scheme, Op::Decaps)?,
        ])
    }
}

/// Signature timing in milliseconds per operation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigTimes {
    /// Not every published table measures key generation.
    pub keypair_ms: Option<f64>,
    pub sign_ms: f64,
    pub verify_ms: f64,
}

/// Validated, immutable collection of schemes and devices.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSet {
    schemes: Vec<SchemeProfile>,
    devices: Vec<DeviceProfile>,
    provenance: String,
}

impl ProfileSet {
    /// Builds a set from parts, enforcing every document invariant.
    pub fn new(
        schemes: Vec<SchemeProfile>,
        devices: Vec<DeviceProfile>,
        provenance: impl Into<String>,
    ) -> Result<Self, RegistryError> {
        let mut kinds = BTreeMap::new();
        for scheme in &schemes {
            scheme.validate()?;
            if kinds.insert(scheme.id.clone(), scheme.kind).is_some() {
                return Err(RegistryError::DuplicateScheme(scheme.id.clone()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for device in &devices {
            if !seen.insert(device.id.clone()) {
                return Err(RegistryError::DuplicateDevice(device.id.clone()));
            }
            for ((scheme, op), rate) in &device.rates {
                let kind = kinds
                    .get(scheme)
                    .ok_or_else(|| RegistryError::UnknownScheme(scheme.clone()))?;
                if !op.applies_to(*kind) {
                    return Err(RegistryError::OpNotApplicable {
                        device: device.id.clone(),
                        scheme: scheme.clone(),
                        op: *op,
                    });
                }
                if rate.is_nan() || *rate <= 0.0 {
                    return Err(RegistryError::NonPositiveRate {
                        device: device.id.clone(),
                        scheme: scheme.clone(),
                        op: *op,
                    });
                }
            }
            for (step, cost) in &device.fixed_costs {
                if !(cost.is_finite() && *cost >= 0.0) {
                    return Err(RegistryError::InvalidFixedCost {
                        device: device.id.clone(),
                        step: step.clone(),
                    });
                }
            }
        }
        Ok(ProfileSet {
            schemes,
            devices,
            provenance: provenance.into(),
        })
    }

    /// The shipped default set.
    pub fn default_set() -> ProfileSet {
        load_profiles(DEFAULT_PROFILE_DOCUMENT).expect("shipped profile document is valid")
    }

    pub fn schemes(&self) -> &[SchemeProfile] {
        &self.schemes
    }

    pub fn devices(&self) -> &[DeviceProfile] {
        &self.devices
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn scheme(&self, id: &str) -> Result<&SchemeProfile, RegistryError> {
        self.schemes
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| RegistryError::UnknownScheme(id.to_string()))
    }

    pub fn device(&self, id: &str) -> Result<&DeviceProfile, RegistryError> {
        self.devices
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| RegistryError::UnknownDevice(id.to_string()))
    }

    /// Returns a copy with `device` replaced (or appended), re-validated.
    pub fn with_device(&self, device: DeviceProfile) -> Result<ProfileSet, RegistryError> {
        let mut devices = self.devices.clone();
        match devices.iter_mut().find(|d| d.id == device.id) {
            Some(slot) => *slot = device,
            None => devices.push(device),
        }
        ProfileSet::new(self.schemes.clone(), devices, self.provenance.clone())
    }

    /// Serializes back into the document format accepted by [`load_profiles`].
    pub fn to_document(&self) -> String {
        let raw = RawDocument {
            provenance: Some(self.provenance.clone()),
            scheme: self
                .schemes
                .iter()
                .map(|s| RawScheme {
                    id: s.id.clone(),
                    kind: s.kind.as_str().to_string(),
                    pk_len: s.pk_len,
                    sk_len: s.sk_len,
                    ct_len: s.ct_len,
                    ss_len: s.ss_len,
                    sig_len: s.sig_len,
                    category: s.security_category,
                })
                .collect(),
            device: self
                .devices
                .iter()
                .map(|d| {
                    let mut rates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
                    for ((scheme, op), rate) in &d.rates {
                        rates
                            .entry(scheme.clone())
                            .or_default()
                            .insert(op.as_str().to_string(), *rate);
                    }
                    RawDevice {
                        id: d.id.clone(),
                        fixed_costs: d.fixed_costs.clone(),
                        rates,
                    }
                })
                .collect(),
        };
        let body = toml::to_string(&raw).expect("profile set serializes");
        format!("{PROFILE_HEADER}\n{body}")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(default)]
    provenance: Option<String>,
    #[serde(default)]
    scheme: Vec<RawScheme>,
    #[serde(default)]
    device: Vec<RawDevice>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    id: String,
    kind: String,
    pk_len: usize,
    sk_len: usize,
    #[serde(default)]
    ct_len: usize,
    #[serde(default)]
    ss_len: usize,
    #[serde(default)]
    sig_len: usize,
    category: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    id: String,
    #[serde(default)]
    fixed_costs: BTreeMap<String, f64>,
    #[serde(default)]
    rates: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Parses and validates a profile document.
pub fn load_profiles(source: &str) -> Result<ProfileSet, RegistryError> {
    let (header, body) = match source.split_once('\n') {
        Some((h, b)) => (h, b),
        None => (source, ""),
    };
    let header = header.trim_end_matches('\r').trim();
    let version = header
        .strip_prefix("profile-set ")
        .ok_or(RegistryError::MissingHeader)?;
    if version != "v1" {
        return Err(RegistryError::UnsupportedVersion(version.to_string()));
    }
    let raw: RawDocument = toml::from_str(body).map_err(|e| RegistryError::Parse(e.message().to_string()))?;

    let schemes = raw
        .scheme
        .into_iter()
        .map(|s| {
            Ok(SchemeProfile {
                kind: s.kind.parse()?,
                id: s.id,
                pk_len: s.pk_len,
                sk_len: s.sk_len,
                ct_len: s.ct_len,
                ss_len: s.ss_len,
                sig_len: s.sig_len,
                security_category: s.category,
            })
        })
        .collect::<Result<Vec<_>, RegistryError>>()?;

    let devices = raw
        .device
        .into_iter()
        .map(|d| {
            let mut rates = BTreeMap::new();
            for (scheme, ops) in d.rates {
                for (op, rate) in ops {
                    rates.insert((scheme.clone(), op.parse::<Op>()?), rate);
                }
            }
            Ok(DeviceProfile {
                id: d.id,
                rates,
                fixed_costs: d.fixed_costs,
            })
        })
        .collect::<Result<Vec<_>, RegistryError>>()?;

    ProfileSet::new(schemes, devices, raw.provenance.unwrap_or_default())
}

/// Total key-exchange time `T_keygen + T_encaps + T_decaps`, in milliseconds.
///
/// When a device carries both the three KEM rates and a single aggregate
/// `key_exchange` rate, the three-rate form is used.
pub fn kem_exchange_time(device: &DeviceProfile, scheme: &SchemeProfile) -> Result<f64, RegistryError> {
    let (client, server) = kem_role_times(device, scheme)?;
    Ok(client + server)
}

/// Per-operation KEM timing in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KemStepTimes {
    pub keygen_ms: f64,
    pub encaps_ms: f64,
    pub decaps_ms: f64,
}

/// Times of the three KEM operations on `device`.
///
/// A device with only an aggregate `key_exchange` rate reports keygen as 0
/// and splits the aggregate evenly between encaps and decaps.
pub fn kem_step_times(device: &DeviceProfile, scheme: &SchemeProfile) -> Result<KemStepTimes, RegistryError> {
    if scheme.kind == SchemeKind::Signature {
        return Err(RegistryError::WrongKind {
            scheme: scheme.id.clone(),
            expected: SchemeKind::Kem,
            actual: scheme.kind,
        });
    }
    if let Some([keygen, encaps, decaps]) = device.kem_rates(&scheme.id) {
        return Ok(KemStepTimes {
            keygen_ms: 1000.0 / keygen,
            encaps_ms: 1000.0 / encaps,
            decaps_ms: 1000.0 / decaps,
        });
    }
    match device.rate(&scheme.id, Op::KeyExchange) {
        Some(rate) => Ok(KemStepTimes {
            keygen_ms: 0.0,
            encaps_ms: 500.0 / rate,
            decaps_ms: 500.0 / rate,
        }),
        None => {
            // Report the first missing KEM rate, which is the more specific hint.
            let missing = [Op::Keygen, Op::Encaps, Op::Decaps]
                .into_iter()
                .find(|op| device.rate(&scheme.id, *op).is_none())
                .unwrap_or(Op::KeyExchange);
            Err(RegistryError::MissingRate {
                device: device.id.clone(),
                scheme: scheme.id.clone(),
                op: missing,
            })
        }
    }
}

/// Splits [`kem_exchange_time`] between the initiator and the responder.
///
/// The initiator pays keygen and decaps and the responder pays encaps. A
/// single aggregate rate is split evenly.
pub fn kem_role_times(device: &DeviceProfile, scheme: &SchemeProfile) -> Result<(f64, f64), RegistryError> {
    let t = kem_step_times(device, scheme)?;
    Ok((t.keygen_ms + t.decaps_ms, t.encaps_ms))
}

pub fn sig_op_times(device: &DeviceProfile, scheme: &SchemeProfile) -> Result<SigTimes, RegistryError> {
    scheme.expect_kind(SchemeKind::Signature)?;
    Ok(SigTimes {
        keypair_ms: device.rate(&scheme.id, Op::Keypair).map(|r| 1000.0 / r),
        sign_ms: 1000.0 / device.require_rate(&scheme.id, Op::Sign)?,
        verify_ms: 1000.0 / device.require_rate(&scheme.id, Op::Verify)?,
    })
}

/// Serial composition of a classical key agreement and a KEM.
pub fn hybrid_exchange_time(
    device: &DeviceProfile,
    classical: &SchemeProfile,
    pq: &SchemeProfile,
) -> Result<f64, RegistryError> {
    classical.expect_kind(SchemeKind::ClassicalKa)?;
    pq.expect_kind(SchemeKind::Kem)?;
    Ok(kem_exchange_time(device, classical)? + kem_exchange_time(device, pq)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> ProfileSet {
        ProfileSet::default_set()
    }

    fn ke(device: &str, scheme: &str) -> f64 {
        let s = set();
        kem_exchange_time(s.device(device).unwrap(), s.scheme(scheme).unwrap()).unwrap()
    }

    #[test]
    fn default_document_sizes() {
        let s = set();
        let mlkem = s.scheme("ml-kem-512").unwrap();
        assert_eq!(
            (mlkem.pk_len, mlkem.sk_len, mlkem.ct_len, mlkem.ss_len),
            (800, 1632, 768, 32)
        );
        let ntru = s.scheme("sntrup761").unwrap();
        assert_eq!((ntru.pk_len, ntru.ct_len), (1158, 1039));
        assert_eq!(s.scheme("hqc-128").unwrap().pk_len, 2249);
        assert_eq!(s.scheme("falcon-512").unwrap().pk_len, 897);
        let dsa = s.scheme("ml-dsa-44").unwrap();
        assert_eq!(dsa.pk_len + dsa.sig_len, 3732);
    }

    #[test]
    fn rejects_zero_rate() {
        let doc = format!(
            "{PROFILE_HEADER}\n[[scheme]]\nid = \"ml-kem-512\"\nkind = \"kem\"\npk_len = 800\n\
             sk_len = 1632\nct_len = 768\nss_len = 32\ncategory = 1\n\
             [[device]]\nid = \"pi4b\"\n[device.rates]\nml-kem-512 = {{ keygen = 0.0 }}\n"
        );
        assert!(matches!(
            load_profiles(&doc),
            Err(RegistryError::NonPositiveRate { op: Op::Keygen, .. })
        ));
    }

    #[test]
    fn rejects_bad_documents() {
        assert_eq!(load_profiles("nope\n"), Err(RegistryError::MissingHeader));
        assert_eq!(
            load_profiles("profile-set v2\n"),
            Err(RegistryError::UnsupportedVersion("v2".into()))
        );
        assert!(matches!(
            load_profiles("profile-set v1\n[[scheme]\n"),
            Err(RegistryError::Parse(_))
        ));
        let dup = format!(
            "{PROFILE_HEADER}\n[[scheme]]\nid = \"a\"\nkind = \"kem\"\npk_len = 1\nsk_len = 1\nct_len = 1\nss_len = 1\ncategory = 1\n\
             [[scheme]]\nid = \"a\"\nkind = \"kem\"\npk_len = 1\nsk_len = 1\nct_len = 1\nss_len = 1\ncategory = 1\n"
        );
        assert_eq!(load_profiles(&dup), Err(RegistryError::DuplicateScheme("a".into())));
        let missing = format!("{PROFILE_HEADER}\n[[device]]\nid = \"d\"\n[device.rates]\nghost = {{ keygen = 1.0 }}\n");
        assert_eq!(
            load_profiles(&missing),
            Err(RegistryError::UnknownScheme("ghost".into()))
        );
        let sig_on_kem = format!(
            "{PROFILE_HEADER}\n[[scheme]]\nid = \"k\"\nkind = \"kem\"\npk_len = 1\nsk_len = 1\nct_len = 1\nss_len = 1\nsig_len = 5\ncategory = 1\n"
        );
        assert!(matches!(
            load_profiles(&sig_on_kem),
            Err(RegistryError::InvalidLength { field: "sig_len", .. })
        ));
    }

    #[test]
    fn ke_times_match_published_values() {
        assert!((ke("pi4b", "ml-kem-512") - 0.911).abs() < 0.0005);
        assert!((ke("pi4b", "sntrup761") - 43.3).abs() < 0.05);
        assert!((ke("pi5", "x25519") - 0.167).abs() < 0.001);
        assert!((ke("client-x86", "ml-kem-512") - 0.0835).abs() < 0.0001);
        assert!((ke("client-x86", "x25519") - 0.1659).abs() < 0.0001);
        assert!((ke("client-x86", "sntrup761") - 1.005).abs() < 1e-9);
    }

    #[test]
    fn three_rate_form_wins_over_aggregate() {
        let s = set();
        let mut dev = s.device("client-x86").unwrap().clone();
        dev.rates.insert(("x25519".into(), Op::KeyExchange), 1.0);
        let t = kem_exchange_time(&dev, s.scheme("x25519").unwrap()).unwrap();
        assert!((t - 0.1659).abs() < 0.0001);
    }

    #[test]
    fn missing_rate_is_reported() {
        let s = set();
        let err = kem_exchange_time(s.device("pi4b").unwrap(), s.scheme("hqc-128").unwrap());
        assert!(matches!(err, Err(RegistryError::MissingRate { op: Op::Keygen, .. })));
        let err = sig_op_times(s.device("client-x86").unwrap(), s.scheme("ed25519").unwrap());
        assert!(matches!(err, Err(RegistryError::MissingRate { op: Op::Sign, .. })));
    }

    #[test]
    fn signature_times() {
        let s = set();
        let pi5 = s.device("pi5").unwrap();
        let falcon = sig_op_times(pi5, s.scheme("falcon-512").unwrap()).unwrap();
        let ed = sig_op_times(pi5, s.scheme("ed25519").unwrap()).unwrap();
        assert!((falcon.sign_ms - 1.0 / 3.3606).abs() < 1e-12);
        assert!((ed.sign_ms - 0.0613).abs() < 0.0001);
        assert!(ed.keypair_ms.is_none());
        assert!((falcon.sign_ms / ed.sign_ms - 4.85).abs() < 0.01);
        assert!(sig_op_times(pi5, s.scheme("x25519").unwrap()).is_err());
    }

    #[test]
    fn hybrid_is_serial_sum() {
        let s = set();
        let pi5 = s.device("pi5").unwrap();
        let x = s.scheme("x25519").unwrap();
        let t = hybrid_exchange_time(pi5, x, s.scheme("ml-kem-512").unwrap()).unwrap();
        assert!((t - 0.328).abs() < 0.001);
        let t = hybrid_exchange_time(s.device("pi4b").unwrap(), x, s.scheme("ml-kem-768").unwrap()).unwrap();
        assert!((t - 2.00).abs() < 0.005);
        assert!(matches!(
            hybrid_exchange_time(pi5, x, x),
            Err(RegistryError::WrongKind {
                expected: SchemeKind::Kem,
                ..
            })
        ));
    }

    #[test]
    fn document_round_trips() {
        let s = set();
        assert_eq!(load_profiles(&s.to_document()).unwrap(), s);
        let fixed = s.with_device(s.device("pi5").unwrap().fixed_costs_only()).unwrap();
        assert_eq!(load_profiles(&fixed.to_document()).unwrap(), fixed);
    }
}

//! Deterministic, size-faithful stand-ins for the asymmetric primitives plus
//! the hash-based expansion, KDF, MAC and keystream every other module uses.
//!
//! **None of this is secure.** The stand-ins guarantee three things only:
//! every artifact has exactly the byte length its [`SchemeProfile`] names,
//! every operation is a pure function of its inputs, and the algebraic
//! correctness relations hold (decapsulation recovers the encapsulated
//! secret, Diffie-Hellman commutes, signatures verify). That is enough to
//! drive the protocol machinery and cost accounting of the simulator.
//!
//! The hash is SHA-256 throughout. Counters are big-endian.
//!
//! The Diffie-Hellman group is the largest safe prime below 2^256,
//! `p = 2^256 - 36113`, with generator 2 (a quadratic residue mod `p`, so it
//! generates the subgroup of prime order `(p - 1) / 2`).

use std::sync::OnceLock;

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::registry::{SchemeKind, SchemeProfile};

pub const HASH_LEN: usize = 32;

/// Scheme id recorded on Diffie-Hellman key pairs.
pub const DH_SCHEME_ID: &str = "x25519";

/// Byte length of Diffie-Hellman public keys, secret keys and shared values.
pub const DH_LEN: usize = 32;

/// Length of the ephemeral prefix of every stand-in KEM ciphertext.
pub const KEM_EPH_LEN: usize = 32;

/// `2^256 - 36113`, big-endian.
const DH_PRIME_HEX: &str = "ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff72ef";

pub type Seed = [u8; 32];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("scheme `{scheme}` has kind {actual}, expected {expected}")]
    WrongKind {
        scheme: String,
        expected: SchemeKind,
        actual: SchemeKind,
    },
    #[error("{what}: expected {expected} bytes, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("public key is not in the range [2, p-2]")]
    InvalidPublicKey,
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), CryptoError> {
    if expected == actual {
        Ok(())
    } else {
        Err(CryptoError::LengthMismatch { what, expected, actual })
    }
}

fn check_kind(profile: &SchemeProfile, expected: SchemeKind) -> Result<(), CryptoError> {
    if profile.kind == expected {
        Ok(())
    } else {
        Err(CryptoError::WrongKind {
            scheme: profile.id.clone(),
            expected,
            actual: profile.kind,
        })
    }
}

pub fn sha256(data: &[u8]) -> [u8; HASH_LEN] {
    Sha256::digest(data).into()
}

/// Hash of the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> [u8; HASH_LEN] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Counter-mode expansion: block `i` is `H(label || seed || be32(i))`, and the
/// output is the first `out_len` bytes of the concatenated blocks.
pub fn prf_expand(label: &[u8], seed: &[u8], out_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(out_len);
    let mut counter: u32 = 0;
    while out.len() < out_len {
        let block = hash_parts(&[label, seed, &counter.to_be_bytes()]);
        let take = (out_len - out.len()).min(HASH_LEN);
        out.extend_from_slice(&block[..take]);
        counter = counter.wrapping_add(1);
    }
    out
}

/// [`prf_expand`] under the label `kdf/` || `label`.
pub fn kdf(secret_input: &[u8], label: &[u8], out_len: usize) -> Vec<u8> {
    let mut full = Vec::with_capacity(4 + label.len());
    full.extend_from_slice(b"kdf/");
    full.extend_from_slice(label);
    prf_expand(&full, secret_input, out_len)
}

/// `H(be64(len(key)) || key || data)`.
pub fn mac(key: &[u8], data: &[u8]) -> [u8; HASH_LEN] {
    hash_parts(&[&(key.len() as u64).to_be_bytes(), key, data])
}

/// XORs `data` with the keystream whose block `i` is
/// `H(key || nonce || be64(counter0 + i))`. Applying it twice is the identity.
pub fn stream_xor(key: &[u8; 32], nonce: &[u8; 16], counter0: u64, data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    stream_xor_in_place(key, nonce, counter0, &mut out);
    out
}

pub fn stream_xor_in_place(key: &[u8; 32], nonce: &[u8; 16], counter0: u64, data: &mut [u8]) {
    for (i, chunk) in data.chunks_mut(HASH_LEN).enumerate() {
        let ctr = counter0.wrapping_add(i as u64);
        let block = hash_parts(&[key, nonce, &ctr.to_be_bytes()]);
        for (b, k) in chunk.iter_mut().zip(block.iter()) {
            *b ^= k;
        }
    }
}

/// Number of keystream blocks consumed by `len` bytes.
pub fn keystream_blocks(len: usize) -> u64 {
    len.div_ceil(HASH_LEN) as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub scheme_id: String,
    pub public_key: Vec<u8>,
    pub secret_key: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encapsulation {
    pub ciphertext: Vec<u8>,
    pub shared_secret: Vec<u8>,
}

fn labeled(prefix: &str, scheme_id: &str) -> Vec<u8> {
    let mut l = prefix.as_bytes().to_vec();
    l.extend_from_slice(scheme_id.as_bytes());
    l
}

fn kem_public_from_secret(profile: &SchemeProfile, secret_key: &[u8]) -> Vec<u8> {
    prf_expand(&labeled("kem-pk/", &profile.id), secret_key, profile.pk_len)
}

fn kem_shared(profile: &SchemeProfile, public_key: &[u8], eph: &[u8]) -> Vec<u8> {
    let mut input = Vec::with_capacity(public_key.len() + eph.len());
    input.extend_from_slice(public_key);
    input.extend_from_slice(eph);
    prf_expand(&labeled("kem-ss/", &profile.id), &input, profile.ss_len)
}

pub fn sim_kem_keygen(profile: &SchemeProfile, seed: &Seed) -> Result<KeyPair, CryptoError> {
    check_kind(profile, SchemeKind::Kem)?;
    let secret_key = prf_expand(&labeled("kem-sk/", &profile.id), seed, profile.sk_len);
    let public_key = kem_public_from_secret(profile, &secret_key);
    Ok(KeyPair {
        scheme_id: profile.id.clone(),
        public_key,
        secret_key,
    })
}

pub fn sim_kem_encaps(profile: &SchemeProfile, public_key: &[u8], seed: &Seed) -> Result<Encapsulation, CryptoError> {
    check_kind(profile, SchemeKind::Kem)?;
    check_len("KEM public key", profile.pk_len, public_key.len())?;
    if profile.ct_len < KEM_EPH_LEN {
        return Err(CryptoError::LengthMismatch {
            what: "KEM ciphertext profile (needs room for the ephemeral prefix)",
            expected: KEM_EPH_LEN,
            actual: profile.ct_len,
        });
    }
    let eph = prf_expand(b"kem-eph", seed, KEM_EPH_LEN);
    let mut bound = public_key.to_vec();
    bound.extend_from_slice(&eph);
    let mut ciphertext = eph.clone();
    ciphertext.extend(prf_expand(b"kem-ctpad", &bound, profile.ct_len - KEM_EPH_LEN));
    Ok(Encapsulation {
        ciphertext,
        shared_secret: kem_shared(profile, public_key, &eph),
    })
}

/// Recovers the shared secret. Only the ephemeral prefix of the ciphertext is
/// read, so altering filler bytes does not change the result.
pub fn sim_kem_decaps(profile: &SchemeProfile, secret_key: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    check_kind(profile, SchemeKind::Kem)?;
    check_len("KEM secret key", profile.sk_len, secret_key.len())?;
    check_len("KEM ciphertext", profile.ct_len, ciphertext.len())?;
    if ciphertext.len() < KEM_EPH_LEN {
        return Err(CryptoError::LengthMismatch {
            what: "KEM ciphertext profile (needs room for the ephemeral prefix)",
            expected: KEM_EPH_LEN,
            actual: ciphertext.len(),
        });
    }
    let public_key = kem_public_from_secret(profile, secret_key);
    Ok(kem_shared(profile, &public_key, &ciphertext[..KEM_EPH_LEN]))
}

fn dh_prime() -> &'static BigUint {
    static P: OnceLock<BigUint> = OnceLock::new();
    P.get_or_init(|| BigUint::parse_bytes(DH_PRIME_HEX.as_bytes(), 16).expect("valid constant"))
}

fn dh_generator() -> BigUint {
    BigUint::from(2u32)
}

fn to_fixed_be(n: &BigUint) -> [u8; DH_LEN] {
    let bytes = n.to_bytes_be();
    let mut out = [0u8; DH_LEN];
    out[DH_LEN - bytes.len()..].copy_from_slice(&bytes);
    out
}

/// The public value of a Diffie-Hellman secret exponent.
pub fn dh_public(secret_key: &[u8]) -> Result<Vec<u8>, CryptoError> {
    check_len("DH secret key", DH_LEN, secret_key.len())?;
    let x = BigUint::from_bytes_be(secret_key);
    Ok(to_fixed_be(&dh_generator().modpow(&x, dh_prime())).to_vec())
}

/// Generates an exponent in `[1, q - 1]` where `q = (p - 1) / 2`.
pub fn dh_keygen(seed: &Seed) -> KeyPair {
    let p = dh_prime();
    let q_minus_one: BigUint = (p - 1u32) / 2u32 - 1u32;
    let raw = BigUint::from_bytes_be(&prf_expand(b"dh-sk", seed, DH_LEN));
    let x = raw % &q_minus_one + 1u32;
    let secret_key = to_fixed_be(&x).to_vec();
    let public_key = dh_public(&secret_key).expect("secret key has the right length");
    KeyPair {
        scheme_id: DH_SCHEME_ID.to_string(),
        public_key,
        secret_key,
    }
}

/// `H(pk^sk mod p)`. Rejects public values outside `[2, p - 2]`.
pub fn dh_agree(secret_key: &[u8], public_key: &[u8]) -> Result<[u8; 32], CryptoError> {
    check_len("DH secret key", DH_LEN, secret_key.len())?;
    check_len("DH public key", DH_LEN, public_key.len())?;
    let p = dh_prime();
    let y = BigUint::from_bytes_be(public_key);
    if y < BigUint::from(2u32) || y > p - 2u32 {
        return Err(CryptoError::InvalidPublicKey);
    }
    let x = BigUint::from_bytes_be(secret_key);
    Ok(sha256(&to_fixed_be(&y.modpow(&x, p))))
}

fn sig_public_from_secret(profile: &SchemeProfile, secret_key: &[u8]) -> Vec<u8> {
    prf_expand(&labeled("sig-pk/", &profile.id), secret_key, profile.pk_len)
}

fn sig_value(profile: &SchemeProfile, public_key: &[u8], msg: &[u8]) -> Vec<u8> {
    let mut input = Vec::with_capacity(public_key.len() + msg.len());
    input.extend_from_slice(public_key);
    input.extend_from_slice(msg);
    prf_expand(&labeled("sig/", &profile.id), &input, profile.sig_len)
}

pub fn sim_sig_keygen(profile: &SchemeProfile, seed: &Seed) -> Result<KeyPair, CryptoError> {
    check_kind(profile, SchemeKind::Signature)?;
    let secret_key = prf_expand(&labeled("sig-sk/", &profile.id), seed, profile.sk_len);
    let public_key = sig_public_from_secret(profile, &secret_key);
    Ok(KeyPair {
        scheme_id: profile.id.clone(),
        public_key,
        secret_key,
    })
}

/// Signs by first deriving the verification token (the public key) from the
/// secret key and expanding it together with the message.
pub fn sim_sign(profile: &SchemeProfile, secret_key: &[u8], msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
    check_kind(profile, SchemeKind::Signature)?;
    check_len("signature secret key", profile.sk_len, secret_key.len())?;
    let public_key = sig_public_from_secret(profile, secret_key);
    Ok(sig_value(profile, &public_key, msg))
}

pub fn sim_verify(
    profile: &SchemeProfile,
    public_key: &[u8],
    msg: &[u8],
    signature: &[u8],
) -> Result<bool, CryptoError> {
    check_kind(profile, SchemeKind::Signature)?;
    check_len("signature public key", profile.pk_len, public_key.len())?;
    check_len("signature", profile.sig_len, signature.len())?;
    let expected = sig_value(profile, public_key, msg);
    Ok(expected == signature)
}

/// Derives a labelled 32-byte seed from a parent seed and an index. Used to
/// give every node, handshake and experiment its own deterministic stream.
pub fn derive_seed(parent: &[u8], label: &str, index: u64) -> Seed {
    hash_parts(&[b"seed/", label.as_bytes(), &index.to_be_bytes(), parent])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::ProfileSet;

    #[test]
    fn prf_golden_vector() {
        // sha256(b"tor-pq-sim/v1" + bytes(32) + (0).to_bytes(4, "big")), via Python hashlib.
        let out = prf_expand(b"tor-pq-sim/v1", &[0u8; 32], 32);
        assert_eq!(
            hex::encode(out),
            "4b4dd321aaf0fb285f15c99c5b2a43f0f82c35daa5717f131ae277338fbb1f17"
        );
    }

    #[test]
    fn kdf_golden_vector() {
        // sha256(b"kdf/tor-pq-sim/v1" + bytes(32) + (0).to_bytes(4, "big")), via Python hashlib.
        let out = kdf(&[0u8; 32], b"tor-pq-sim/v1", 32);
        assert_eq!(
            hex::encode(out),
            "31d9cc234518eed9eb17089dba8357fecf0e55984022470e12fdbdcc7ee1c49a"
        );
    }

    #[test]
    fn prf_prefix_and_empty() {
        let seed = [7u8; 32];
        assert!(prf_expand(b"x", &seed, 0).is_empty());
        assert_eq!(prf_expand(b"x", &seed, 64)[..32], prf_expand(b"x", &seed, 32)[..]);
        assert_eq!(prf_expand(b"x", &seed, 45)[..], prf_expand(b"x", &seed, 64)[..45]);
        assert!(kdf(&seed, b"x", 0).is_empty());
        assert_eq!(kdf(&seed, b"x", 64)[..32], kdf(&seed, b"x", 32)[..]);
    }

    #[test]
    fn mac_accepts_empty_key_and_is_stable() {
        assert_eq!(mac(b"", b"data"), mac(b"", b"data"));
        assert_ne!(mac(b"", b"data"), mac(b"k", b"data"));
        // Length prefix separates key from data.
        assert_ne!(mac(b"ab", b"c"), mac(b"a", b"bc"));
    }

    #[test]
    fn stream_xor_continuation() {
        let key = [1u8; 32];
        let nonce = [2u8; 16];
        let data: Vec<u8> = (0..100u8).collect();
        let whole = stream_xor(&key, &nonce, 0, &data);
        assert_eq!(stream_xor(&key, &nonce, 1, &data[32..]), whole[32..]);
        assert_eq!(stream_xor(&key, &nonce, 0, &whole), data);
        assert!(stream_xor(&key, &nonce, 0, &[]).is_empty());
    }

    #[test]
    fn kem_sizes_and_errors() {
        let set = ProfileSet::default_set();
        let mlkem = set.scheme("ml-kem-512").unwrap();
        let kp = sim_kem_keygen(mlkem, &[9; 32]).unwrap();
        assert_eq!((kp.public_key.len(), kp.secret_key.len()), (800, 1632));
        assert_eq!(kp, sim_kem_keygen(mlkem, &[9; 32]).unwrap());
        let hqc = set.scheme("hqc-128").unwrap();
        assert_eq!(sim_kem_keygen(hqc, &[0; 32]).unwrap().public_key.len(), 2249);

        let enc = sim_kem_encaps(mlkem, &kp.public_key, &[3; 32]).unwrap();
        assert_eq!((enc.ciphertext.len(), enc.shared_secret.len()), (768, 32));
        assert_eq!(
            sim_kem_decaps(mlkem, &kp.secret_key, &enc.ciphertext).unwrap(),
            enc.shared_secret
        );
        assert!(sim_kem_decaps(mlkem, &kp.secret_key, &enc.ciphertext[..767]).is_err());
        let mut filler = enc.ciphertext.clone();
        filler[500] ^= 0xff;
        assert_eq!(
            sim_kem_decaps(mlkem, &kp.secret_key, &filler).unwrap(),
            enc.shared_secret
        );
        assert!(sim_kem_encaps(mlkem, &kp.public_key[1..], &[3; 32]).is_err());
        let ed = set.scheme("ed25519").unwrap();
        assert!(matches!(
            sim_kem_keygen(ed, &[0; 32]),
            Err(CryptoError::WrongKind { .. })
        ));
    }

    #[test]
    fn dh_identity_exponent_and_range() {
        let kp = dh_keygen(&[5; 32]);
        let mut g = [0u8; 32];
        g[31] = 2;
        let expected = sha256(&kp.public_key);
        assert_eq!(dh_agree(&kp.secret_key, &g).unwrap(), expected);
        assert_eq!(dh_agree(&kp.secret_key, &[0u8; 32]), Err(CryptoError::InvalidPublicKey));
        let mut one = [0u8; 32];
        one[31] = 1;
        assert_eq!(dh_agree(&kp.secret_key, &one), Err(CryptoError::InvalidPublicKey));
        let p_minus_one = hex::decode("ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff72ee").unwrap();
        assert_eq!(
            dh_agree(&kp.secret_key, &p_minus_one),
            Err(CryptoError::InvalidPublicKey)
        );
    }

    #[test]
    fn signatures() {
        let set = ProfileSet::default_set();
        let dsa = set.scheme("ml-dsa-44").unwrap();
        let kp = sim_sig_keygen(dsa, &[4; 32]).unwrap();
        let sig = sim_sign(dsa, &kp.secret_key, b"msg").unwrap();
        assert_eq!(sig.len(), 2420);
        assert!(sim_verify(dsa, &kp.public_key, b"msg", &sig).unwrap());
        assert!(!sim_verify(dsa, &kp.public_key, b"msh", &sig).unwrap());
        let mut bad = sig.clone();
        bad[0] ^= 1;
        assert!(!sim_verify(dsa, &kp.public_key, b"msg", &bad).unwrap());
        assert!(sim_verify(dsa, &kp.public_key, b"msg", &sig[1..]).is_err());
    }
}

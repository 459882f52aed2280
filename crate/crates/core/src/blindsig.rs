//! Chaum RSA blind signatures.
//!
//! The voter blinds a message `m` as `m * r^e mod N`, the authority signs the
//! blinded value with `d`, and the voter multiplies by `r^-1` to obtain the
//! plain RSA signature `m^d mod N`. Verification is message recovery:
//! `s^e mod N` yields the signed message itself.
//!
//! This is raw RSA without hashing. It is only sound here because every
//! message the authority is meant to sign is a rigid
//! [`PaddedMessage`](crate::codec::PaddedMessage) and the key is used for a
//! single election and nothing else; multiplicative forgeries produce
//! recovered messages that fail `unpad`.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, Rng, RngCore};

use crate::codec::int_to_bytes;

/// Miller-Rabin rounds; each round has error <= 1/4, so 40 rounds <= 2^-80.
const MR_ROUNDS: usize = 40;
const DEFAULT_E: u32 = 65537;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum BlindSigError {
    #[error("message is not below the modulus")]
    MessageOutOfRange,
    #[error("blinding factor is not a unit modulo N")]
    FactorNotUnit,
    #[error("signature is not below the modulus")]
    SignatureOutOfRange,
    #[error("signature must be exactly {expected} bytes, got {got}")]
    SignatureLength { expected: usize, got: usize },
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("key file line {line}: {message}")]
    KeyFormat { line: usize, message: String },
}

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    e: BigUint,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({} bits, e={})", self.n.bits(), self.e)
    }
}

impl PublicKey {
    pub fn new(n: BigUint, e: BigUint) -> Result<Self, BlindSigError> {
        if n.is_even() || n < BigUint::from(15u8) {
            return Err(BlindSigError::InvalidKey("modulus must be odd and composite".into()));
        }
        if e < BigUint::from(3u8) {
            return Err(BlindSigError::InvalidKey("public exponent must be >= 3".into()));
        }
        Ok(PublicKey { n, e })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn exponent(&self) -> &BigUint {
        &self.e
    }

    /// Modulus length in bytes; signatures are serialized at this width.
    pub fn modulus_len(&self) -> usize {
        self.n.bits().div_ceil(8) as usize
    }

    /// `N=<hex>` and `e=<hex>` lines.
    pub fn to_text(&self) -> String {
        format!("N={:x}\ne={:x}\n", self.n, self.e)
    }

    pub fn parse(text: &str) -> Result<Self, BlindSigError> {
        let fields = parse_key_fields(text)?;
        let n = fields.require("N")?;
        let e = fields.require("e")?;
        PublicKey::new(n, e)
    }
}

#[derive(Clone)]
struct CrtParams {
    p: BigUint,
    q: BigUint,
    dp: BigUint,
    dq: BigUint,
    qinv: BigUint,
}

#[derive(Clone)]
pub struct BlindKeyPair {
    public: PublicKey,
    d: BigUint,
    crt: Option<CrtParams>,
}

impl fmt::Debug for BlindKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlindKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl BlindKeyPair {
    /// Builds a key from two distinct primes. Used directly for the toy
    /// parameters and by [`keygen`].
    pub fn from_primes(p: BigUint, q: BigUint, e: BigUint) -> Result<Self, BlindSigError> {
        if p == q {
            return Err(BlindSigError::InvalidKey("primes must be distinct".into()));
        }
        let mut check_rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(0);
        if !is_probable_prime(&p, &mut check_rng) || !is_probable_prime(&q, &mut check_rng) {
            return Err(BlindSigError::InvalidKey("factors must be prime".into()));
        }
        let one = BigUint::one();
        let phi = (&p - &one) * (&q - &one);
        let d = e
            .modinv(&phi)
            .ok_or_else(|| BlindSigError::InvalidKey("gcd(e, phi(N)) != 1".into()))?;
        let crt = CrtParams {
            dp: &d % (&p - &one),
            dq: &d % (&q - &one),
            qinv: q.modinv(&p).expect("distinct primes are coprime"),
            p: p.clone(),
            q: q.clone(),
        };
        let public = PublicKey::new(&p * &q, e)?;
        Ok(BlindKeyPair {
            public,
            d,
            crt: Some(crt),
        })
    }

    /// Key without factors; signing falls back to a full-size exponentiation.
    pub fn from_components(n: BigUint, e: BigUint, d: BigUint) -> Result<Self, BlindSigError> {
        let public = PublicKey::new(n, e)?;
        if d.is_zero() || d >= public.n {
            return Err(BlindSigError::InvalidKey("private exponent out of range".into()));
        }
        Ok(BlindKeyPair {
            public,
            d,
            crt: None,
        })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.d
    }

    pub fn primes(&self) -> Option<(&BigUint, &BigUint)> {
        self.crt.as_ref().map(|c| (&c.p, &c.q))
    }

    /// Raw private operation `x^d mod N`.
    fn private_op(&self, x: &BigUint) -> BigUint {
        match &self.crt {
            Some(c) => {
                let m1 = x.modpow(&c.dp, &c.p);
                let m2 = x.modpow(&c.dq, &c.q);
                let diff = (&m1 + &c.p - (&m2 % &c.p)) % &c.p;
                let h = (&c.qinv * diff) % &c.p;
                m2 + h * &c.q
            }
            None => x.modpow(&self.d, &self.public.n),
        }
    }

    /// Public lines followed by `d=<hex>`, plus `p=`/`q=` when the factors
    /// are known.
    pub fn to_text(&self) -> String {
        let mut out = self.public.to_text();
        out.push_str(&format!("d={:x}\n", self.d));
        if let Some(c) = &self.crt {
            out.push_str(&format!("p={:x}\nq={:x}\n", c.p, c.q));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, BlindSigError> {
        let fields = parse_key_fields(text)?;
        let n = fields.require("N")?;
        let e = fields.require("e")?;
        let d = fields.require("d")?;
        match (fields.get("p"), fields.get("q")) {
            (Some(p), Some(q)) => {
                let kp = BlindKeyPair::from_primes(p, q, e)?;
                if kp.public.n != n || kp.d != d {
                    return Err(BlindSigError::InvalidKey(
                        "N or d inconsistent with p, q".into(),
                    ));
                }
                Ok(kp)
            }
            (None, None) => BlindKeyPair::from_components(n, e, d),
            _ => Err(BlindSigError::InvalidKey("p and q must appear together".into())),
        }
    }
}

struct KeyFields(Vec<(String, BigUint)>);

impl KeyFields {
    fn get(&self, name: &str) -> Option<BigUint> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone())
    }

    fn require(&self, name: &str) -> Result<BigUint, BlindSigError> {
        self.get(name).ok_or_else(|| BlindSigError::KeyFormat {
            line: 0,
            message: format!("missing {name}= line"),
        })
    }
}

fn parse_key_fields(text: &str) -> Result<KeyFields, BlindSigError> {
    let mut fields: Vec<(String, BigUint)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| BlindSigError::KeyFormat {
            line: i + 1,
            message,
        };
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected <name>=<hex>".into()))?;
        if !matches!(name, "N" | "e" | "d" | "p" | "q") {
            return Err(err(format!("unknown field {name:?}")));
        }
        if fields.iter().any(|(k, _)| k == name) {
            return Err(err(format!("duplicate field {name}")));
        }
        let value = BigUint::parse_bytes(value.as_bytes(), 16)
            .ok_or_else(|| err(format!("bad hex for {name}")))?;
        fields.push((name.to_string(), value));
    }
    Ok(KeyFields(fields))
}

fn small_primes() -> &'static [u32] {
    static PRIMES: std::sync::OnceLock<Vec<u32>> = std::sync::OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 2000;
        let mut composite = vec![false; LIMIT];
        let mut out = Vec::new();
        for i in 2..LIMIT {
            if !composite[i] {
                out.push(i as u32);
                for j in (i * i..LIMIT).step_by(i) {
                    composite[j] = true;
                }
            }
        }
        out
    })
}

/// Trial division by primes below 2000, then Miller-Rabin with random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &sp in small_primes() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    // Every composite below 2000^2 has a factor under 2000.
    if n < &BigUint::from(2000u32 * 2000) {
        return true;
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let d = &n_minus_1 >> s;

    'witness: for _ in 0..MR_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

fn random_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut c = rng.gen_biguint(bits);
        // Top two bits set so the product of two such primes has exactly
        // bits_p + bits_q bits.
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, rng) {
            return c;
        }
    }
}

/// Generates an election signing key with a modulus of exactly `bits` bits.
///
/// Uses e = 65537 for real key sizes. Tiny toy moduli (below 32 bits) use
/// the smallest of 17, 5, 3, 7, 11, 13 coprime to phi(N).
pub fn keygen<R: RngCore + CryptoRng>(bits: u64, rng: &mut R) -> Result<BlindKeyPair, BlindSigError> {
    // Below 12 bits there are fewer than two primes with both top bits set.
    if bits < 12 {
        return Err(BlindSigError::InvalidKey(format!(
            "modulus must be at least 12 bits, asked for {bits}"
        )));
    }
    let p_bits = bits / 2;
    let q_bits = bits - p_bits;
    loop {
        let p = random_prime(p_bits, rng);
        let q = random_prime(q_bits, rng);
        if p == q {
            continue;
        }
        let phi = (&p - 1u8) * (&q - 1u8);
        let candidates: &[u32] = if bits >= 32 {
            &[DEFAULT_E]
        } else {
            &[17, 5, 3, 7, 11, 13]
        };
        let Some(e) = candidates
            .iter()
            .map(|&e| BigUint::from(e))
            .find(|e| e.gcd(&phi).is_one() && e < &phi)
        else {
            continue;
        };
        let kp = BlindKeyPair::from_primes(p, q, e)?;
        debug_assert_eq!(kp.public.n.bits(), bits);

        // Self-test: sign and recover a fixed message.
        let probe = BigUint::from(0x5a5au32) % &kp.public.n;
        let sig = kp.private_op(&probe);
        if sig.modpow(&kp.public.e, &kp.public.n) != probe {
            continue;
        }
        return Ok(kp);
    }
}

/// Random unit `r` used to mask a message before it is sent for signing.
#[derive(Clone, PartialEq, Eq)]
pub struct BlindingFactor(BigUint);

impl fmt::Debug for BlindingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BlindingFactor(..)")
    }
}

impl BlindingFactor {
    pub fn new(r: BigUint, pk: &PublicKey) -> Result<Self, BlindSigError> {
        if r.is_zero() || r >= pk.n || !r.gcd(&pk.n).is_one() {
            return Err(BlindSigError::FactorNotUnit);
        }
        Ok(BlindingFactor(r))
    }

    /// Uniform over the units in [2, N), resampling whenever gcd(r, N) != 1.
    pub fn random<R: RngCore + CryptoRng>(pk: &PublicKey, rng: &mut R) -> Self {
        let two = BigUint::from(2u8);
        loop {
            let r = rng.gen_biguint_range(&two, &pk.n);
            if r.gcd(&pk.n).is_one() {
                return BlindingFactor(r);
            }
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

macro_rules! residue_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        pub struct $name(BigUint);

        impl $name {
            pub fn new(value: BigUint) -> Self {
                $name(value)
            }

            pub fn value(&self) -> &BigUint {
                &self.0
            }

            pub fn into_inner(self) -> BigUint {
                self.0
            }
        }
    };
}

residue_newtype!(
    /// `m * r^e mod N`, the only form of the ballot the authority ever sees.
    BlindedMessage
);
residue_newtype!(
    /// Authority's signature on a blinded message, `(m * r^e)^d mod N`.
    BlindSignature
);
residue_newtype!(
    /// Unblinded signature `m^d mod N`.
    Signature
);

impl Signature {
    /// Big-endian, zero-padded to the modulus length.
    pub fn to_bytes(&self, pk: &PublicKey) -> Vec<u8> {
        int_to_bytes(&self.0, pk.modulus_len()).expect("signature is below the modulus")
    }

    pub fn from_bytes(bytes: &[u8], pk: &PublicKey) -> Result<Self, BlindSigError> {
        let expected = pk.modulus_len();
        if bytes.len() != expected {
            return Err(BlindSigError::SignatureLength {
                expected,
                got: bytes.len(),
            });
        }
        let s = BigUint::from_bytes_be(bytes);
        if s >= pk.n {
            return Err(BlindSigError::SignatureOutOfRange);
        }
        Ok(Signature(s))
    }
}

pub fn blind(
    pk: &PublicKey,
    m: &BigUint,
    r: &BlindingFactor,
) -> Result<BlindedMessage, BlindSigError> {
    if m >= &pk.n {
        return Err(BlindSigError::MessageOutOfRange);
    }
    if r.0 >= pk.n || !r.0.gcd(&pk.n).is_one() {
        return Err(BlindSigError::FactorNotUnit);
    }
    let mask = r.0.modpow(&pk.e, &pk.n);
    Ok(BlindedMessage((m * mask) % &pk.n))
}

pub fn sign_blinded(
    kp: &BlindKeyPair,
    blinded: &BlindedMessage,
) -> Result<BlindSignature, BlindSigError> {
    if blinded.0 >= kp.public.n {
        return Err(BlindSigError::MessageOutOfRange);
    }
    Ok(BlindSignature(kp.private_op(&blinded.0)))
}

pub fn unblind(
    pk: &PublicKey,
    blind_sig: &BlindSignature,
    r: &BlindingFactor,
) -> Result<Signature, BlindSigError> {
    if blind_sig.0 >= pk.n {
        return Err(BlindSigError::SignatureOutOfRange);
    }
    let r_inv = r.0.modinv(&pk.n).ok_or(BlindSigError::FactorNotUnit)?;
    Ok(Signature((&blind_sig.0 * r_inv) % &pk.n))
}

/// `s^e mod N`. Acceptance is decided by the caller via `unpad`.
pub fn verify_recover(pk: &PublicKey, sig: &Signature) -> Result<BigUint, BlindSigError> {
    if sig.0 >= pk.n {
        return Err(BlindSigError::SignatureOutOfRange);
    }
    Ok(sig.0.modpow(&pk.e, &pk.n))
}

/// Small textbook keys for exhaustive tests.
pub mod toy {
    use super::*;

    /// p = 11, q = 23, e = 3, d = 147.
    pub fn n253() -> BlindKeyPair {
        BlindKeyPair::from_primes(11u8.into(), 23u8.into(), 3u8.into()).expect("valid toy key")
    }

    /// p = 61, q = 53, e = 17, d = 2753.
    pub fn n3233() -> BlindKeyPair {
        BlindKeyPair::from_primes(61u8.into(), 53u8.into(), 17u8.into()).expect("valid toy key")
    }

    /// All units of N in [1, N).
    pub fn units(pk: &PublicKey) -> Vec<BigUint> {
        let n = pk.modulus();
        let mut out = Vec::new();
        let mut x = BigUint::one();
        while &x < n {
            if x.gcd(n).is_one() {
                out.push(x.clone());
            }
            x += 1u8;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    /// Square-and-multiply on u64, independent of BigUint::modpow.
    fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
        let mut acc = 1u64;
        base %= m;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % m;
            }
            base = base * base % m;
            exp >>= 1;
        }
        acc
    }

    #[test]
    fn toy_keys_match_textbook_values() {
        let k = toy::n253();
        assert_eq!(k.public().modulus(), &big(253));
        assert_eq!(k.private_exponent(), &big(147));
        let k = toy::n3233();
        assert_eq!(k.public().modulus(), &big(3233));
        assert_eq!(k.public().exponent(), &big(17));
        assert_eq!(k.private_exponent(), &big(2753));
        // e*d mod phi = 1 with phi = 60 * 52.
        assert_eq!(17 * 2753 % 3120, 1);
    }

    #[test]
    fn keygen_12_bits() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..20 {
            let kp = keygen(12, &mut rng).unwrap();
            let (p, q) = kp.primes().unwrap();
            assert_eq!(kp.public().modulus().bits(), 12);
            let phi = (p - 1u8) * (q - 1u8);
            assert!((kp.public().exponent() * kp.private_exponent() % &phi).is_one());
        }
    }

    #[test]
    fn keygen_ed_inverse_mod_phi() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for bits in [16u64, 24, 64, 256] {
            let kp = keygen(bits, &mut rng).unwrap();
            let (p, q) = kp.primes().unwrap();
            let phi = (p - 1u8) * (q - 1u8);
            assert!((kp.public().exponent() * kp.private_exponent() % phi).is_one());
            assert_eq!(kp.public().modulus().bits(), bits);
        }
    }

    #[test]
    fn keygen_is_seed_deterministic() {
        let a = keygen(128, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        let b = keygen(128, &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn keygen_2048_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(2048);
        let kp = keygen(2048, &mut rng).unwrap();
        assert_eq!(kp.public().modulus_len(), 256);
        assert_eq!(kp.public().exponent(), &big(65537));
        let m = rng.gen_biguint_below(kp.public().modulus());
        let r = BlindingFactor::random(kp.public(), &mut rng);
        let b = blind(kp.public(), &m, &r).unwrap();
        let s = unblind(kp.public(), &sign_blinded(&kp, &b).unwrap(), &r).unwrap();
        assert_eq!(verify_recover(kp.public(), &s).unwrap(), m);
    }

    #[test]
    fn primality_against_sieve() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let limit = 20_000u64;
        let mut composite = vec![false; limit as usize];
        for i in 2..limit as usize {
            if !composite[i] {
                for j in (i * i..limit as usize).step_by(i) {
                    composite[j] = true;
                }
            }
        }
        for n in 0..limit {
            let expected = n >= 2 && !composite[n as usize];
            assert_eq!(is_probable_prime(&big(n), &mut rng), expected, "n={n}");
        }
        // Carmichael numbers and a large known prime.
        for c in [561u64, 41041, 825265, 321197185, 5394826801] {
            assert!(!is_probable_prime(&big(c), &mut rng));
        }
        assert!(is_probable_prime(&big((1 << 61) - 1), &mut rng));
    }

    #[test]
    fn blind_with_identity_factor() {
        let k = toy::n3233();
        let r = BlindingFactor::new(big(1), k.public()).unwrap();
        assert_eq!(blind(k.public(), &big(65), &r).unwrap().value(), &big(65));
    }

    #[test]
    fn blind_matches_oracle() {
        let k = toy::n3233();
        let r = BlindingFactor::new(big(7), k.public()).unwrap();
        let expected = 65 * pow_mod(7, 17, 3233) % 3233;
        assert_eq!(blind(k.public(), &big(65), &r).unwrap().value(), &big(expected));
    }

    #[test]
    fn range_errors() {
        let k = toy::n3233();
        let r = BlindingFactor::new(big(7), k.public()).unwrap();
        assert_eq!(
            blind(k.public(), &big(3233), &r),
            Err(BlindSigError::MessageOutOfRange)
        );
        assert_eq!(
            BlindingFactor::new(big(61), k.public()),
            Err(BlindSigError::FactorNotUnit)
        );
        assert_eq!(BlindingFactor::new(big(0), k.public()), Err(BlindSigError::FactorNotUnit));
        assert_eq!(
            sign_blinded(&k, &BlindedMessage::new(big(3233))),
            Err(BlindSigError::MessageOutOfRange)
        );
        assert_eq!(
            verify_recover(k.public(), &Signature::new(big(4000))),
            Err(BlindSigError::SignatureOutOfRange)
        );
    }

    #[test]
    fn sign_blinded_fixed_points_and_oracle() {
        let k = toy::n3233();
        assert_eq!(sign_blinded(&k, &BlindedMessage::new(big(1))).unwrap().value(), &big(1));
        assert_eq!(sign_blinded(&k, &BlindedMessage::new(big(0))).unwrap().value(), &big(0));
        assert_eq!(
            sign_blinded(&k, &BlindedMessage::new(big(65))).unwrap().value(),
            &big(pow_mod(65, 2753, 3233))
        );
    }

    #[test]
    fn unblind_identity_and_pipeline() {
        let k = toy::n3233();
        let one = BlindingFactor::new(big(1), k.public()).unwrap();
        let s = BlindSignature::new(big(1234));
        assert_eq!(unblind(k.public(), &s, &one).unwrap().value(), &big(1234));

        let r = BlindingFactor::new(big(7), k.public()).unwrap();
        let b = blind(k.public(), &big(65), &r).unwrap();
        let via_blind = unblind(k.public(), &sign_blinded(&k, &b).unwrap(), &r).unwrap();
        let direct = sign_blinded(&k, &BlindedMessage::new(big(65))).unwrap();
        assert_eq!(via_blind.value(), direct.value());
    }

    #[test]
    fn random_pipeline_verifies() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let k = keygen(256, &mut rng).unwrap();
        for _ in 0..1000 {
            let m = rng.gen_biguint_below(k.public().modulus());
            let r = BlindingFactor::random(k.public(), &mut rng);
            let b = blind(k.public(), &m, &r).unwrap();
            let s = unblind(k.public(), &sign_blinded(&k, &b).unwrap(), &r).unwrap();
            assert_eq!(verify_recover(k.public(), &s).unwrap(), m);
        }
    }

    #[test]
    fn crt_matches_plain_exponent() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let k = keygen(512, &mut rng).unwrap();
        let plain = BlindKeyPair::from_components(
            k.public().modulus().clone(),
            k.public().exponent().clone(),
            k.private_exponent().clone(),
        )
        .unwrap();
        for _ in 0..50 {
            let b = BlindedMessage::new(rng.gen_biguint_below(k.public().modulus()));
            assert_eq!(sign_blinded(&k, &b), sign_blinded(&plain, &b));
        }
    }

    #[test]
    fn exhaustive_correctness_n253() {
        let k = toy::n253();
        let pk = k.public();
        let units = toy::units(pk);
        assert_eq!(units.len(), 220);
        for m in 0u64..253 {
            for r in &units {
                let r = BlindingFactor::new(r.clone(), pk).unwrap();
                let b = blind(pk, &big(m), &r).unwrap();
                let s = unblind(pk, &sign_blinded(&k, &b).unwrap(), &r).unwrap();
                assert_eq!(verify_recover(pk, &s).unwrap(), big(m));
            }
        }
    }

    #[test]
    fn exhaustive_blindness_n253() {
        let k = toy::n253();
        let pk = k.public();
        let units = toy::units(pk);
        let unit_set: HashSet<_> = units.iter().cloned().collect();
        for m in &units {
            let image: HashSet<_> = units
                .iter()
                .map(|r| {
                    let r = BlindingFactor::new(r.clone(), pk).unwrap();
                    blind(pk, m, &r).unwrap().into_inner()
                })
                .collect();
            // Injective (no collisions) and onto the units.
            assert_eq!(image, unit_set);
        }
    }

    #[test]
    fn key_text_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let k = keygen(128, &mut rng).unwrap();
        let back = BlindKeyPair::parse(&k.to_text()).unwrap();
        assert_eq!(back.to_text(), k.to_text());
        assert_eq!(PublicKey::parse(&k.public().to_text()).unwrap(), *k.public());

        let no_factors: String = k
            .to_text()
            .lines()
            .filter(|l| !l.starts_with('p') && !l.starts_with('q'))
            .map(|l| format!("{l}\n"))
            .collect();
        let plain = BlindKeyPair::parse(&no_factors).unwrap();
        assert!(plain.primes().is_none());
        assert_eq!(plain.public(), k.public());

        assert!(matches!(
            PublicKey::parse("N=zz\ne=3\n"),
            Err(BlindSigError::KeyFormat { line: 1, .. })
        ));
        assert!(PublicKey::parse("N=ca1\n").is_err());
    }

    #[test]
    fn signature_bytes_are_fixed_width() {
        let k = toy::n3233();
        let s = Signature::new(big(5));
        assert_eq!(s.to_bytes(k.public()), vec![0, 5]);
        assert_eq!(Signature::from_bytes(&[0, 5], k.public()).unwrap(), s);
        assert!(matches!(
            Signature::from_bytes(&[5], k.public()),
            Err(BlindSigError::SignatureLength { .. })
        ));
        assert_eq!(
            Signature::from_bytes(&[0xff, 0xff], k.public()),
            Err(BlindSigError::SignatureOutOfRange)
        );
    }
}

//! Fixed 256-bit ballot block and the deterministic padding that places it
//! directly under the authority's signature.
//!
//! Ballot block (32 bytes):
//!
//! ```text
//! byte 0        format version, 0x01
//! bytes 1..=8   nonce
//! byte 9        party index
//! bytes 10..=28 candidate approval bitmask, 152 bits; bit i is bit (i % 8)
//!               (LSB first) of byte 10 + i / 8
//! bytes 29..=31 reserved, zero
//! ```
//!
//! Padded message (k = modulus length in bytes):
//!
//! ```text
//! 0x00 || 0x56 || election_id (8) || 0xFF * (k - 43) || 0x00 || ballot block (32)
//! ```
//!
//! The leading zero byte keeps the integer below the modulus. The message is
//! not hashed before signing: the rigid structure is what lets a verifier
//! reject any signature whose recovered message is not a well-formed ballot.

use num_bigint::BigUint;

use crate::election::{ElectionConfig, ElectionId, VoteSelection};

pub const BALLOT_LEN: usize = 32;
pub const FORMAT_VERSION: u8 = 0x01;
pub const NONCE_LEN: usize = 8;
pub const NONCE_OFFSET: usize = 1;
pub const PARTY_OFFSET: usize = 9;
pub const BITMASK_OFFSET: usize = 10;
pub const BITMASK_LEN: usize = 19;
pub const BITMASK_BITS: usize = BITMASK_LEN * 8;
pub const RESERVED_OFFSET: usize = 29;

pub const PAD_MARKER: u8 = 0x56;
pub const PAD_FILLER: u8 = 0xFF;
/// Fixed bytes of a padded message outside the filler run.
pub const PAD_OVERHEAD: usize = 2 + 8 + 1 + BALLOT_LEN;
pub const MIN_MODULUS_LEN: usize = PAD_OVERHEAD + 1;

const _: () = assert!(BALLOT_LEN * 8 == 256);
const _: () = assert!(1 + NONCE_LEN + 1 + BITMASK_LEN + 3 == BALLOT_LEN);
const _: () = assert!(RESERVED_OFFSET == BITMASK_OFFSET + BITMASK_LEN);
const _: () = assert!(BITMASK_BITS == 152);
const _: () = assert!(PAD_OVERHEAD == 43);

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum CodecError {
    #[error("unsupported ballot format version {0:#04x}")]
    BadVersion(u8),
    #[error("reserved ballot bytes are not zero")]
    ReservedNonZero,
    #[error("party index {0} out of range")]
    PartyOutOfRange(u8),
    #[error("approval bit {bit} set beyond the party's {candidates} candidates")]
    StrayApprovalBit { bit: usize, candidates: usize },
    #[error("modulus of {0} bytes is too small for the padded ballot")]
    ModulusTooSmall(usize),
    #[error("padded message structure is malformed")]
    BadStructure,
    #[error("padded message belongs to another election")]
    WrongElection,
    #[error("integer does not fit in {0} bytes")]
    Overflow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub fn random<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut n = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut n);
        Nonce(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedBallot([u8; BALLOT_LEN]);

impl EncodedBallot {
    pub fn from_bytes(bytes: [u8; BALLOT_LEN]) -> Self {
        EncodedBallot(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BALLOT_LEN] {
        &self.0
    }
}

/// Packs a selection into the ballot block. The selection must already be
/// valid for the config it will be decoded against.
pub fn encode(sel: &VoteSelection, nonce: Nonce) -> EncodedBallot {
    let mut b = [0u8; BALLOT_LEN];
    b[0] = FORMAT_VERSION;
    b[NONCE_OFFSET..NONCE_OFFSET + NONCE_LEN].copy_from_slice(&nonce.0);
    b[PARTY_OFFSET] = sel.party_index;
    for &c in &sel.approvals {
        let bit = c as usize;
        debug_assert!(bit < BITMASK_BITS);
        b[BITMASK_OFFSET + bit / 8] |= 1 << (bit % 8);
    }
    EncodedBallot(b)
}

pub fn decode(
    ballot: &EncodedBallot,
    config: &ElectionConfig,
) -> Result<(VoteSelection, Nonce), CodecError> {
    let b = &ballot.0;
    if b[0] != FORMAT_VERSION {
        return Err(CodecError::BadVersion(b[0]));
    }
    if b[RESERVED_OFFSET..].iter().any(|&x| x != 0) {
        return Err(CodecError::ReservedNonZero);
    }
    let party_index = b[PARTY_OFFSET];
    let party = config
        .party(party_index)
        .ok_or(CodecError::PartyOutOfRange(party_index))?;
    let candidates = party.candidates().len();

    let mask = &b[BITMASK_OFFSET..RESERVED_OFFSET];
    let mut approvals = std::collections::BTreeSet::new();
    for bit in 0..BITMASK_BITS {
        if mask[bit / 8] & (1 << (bit % 8)) != 0 {
            if bit >= candidates {
                return Err(CodecError::StrayApprovalBit { bit, candidates });
            }
            approvals.insert(bit as u8);
        }
    }

    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&b[NONCE_OFFSET..NONCE_OFFSET + NONCE_LEN]);
    Ok((
        VoteSelection {
            party_index,
            approvals,
        },
        Nonce(nonce),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedMessage(Vec<u8>);

impl PaddedMessage {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_int(&self) -> BigUint {
        bytes_to_int(&self.0)
    }

    pub fn filler_len(&self) -> usize {
        self.0.len() - PAD_OVERHEAD
    }
}

pub fn pad(
    ballot: &EncodedBallot,
    election_id: &ElectionId,
    modulus_len: usize,
) -> Result<PaddedMessage, CodecError> {
    if modulus_len < MIN_MODULUS_LEN {
        return Err(CodecError::ModulusTooSmall(modulus_len));
    }
    let mut out = Vec::with_capacity(modulus_len);
    out.push(0x00);
    out.push(PAD_MARKER);
    out.extend_from_slice(election_id.as_bytes());
    out.resize(modulus_len - BALLOT_LEN - 1, PAD_FILLER);
    out.push(0x00);
    out.extend_from_slice(&ballot.0);
    debug_assert_eq!(out.len(), modulus_len);
    Ok(PaddedMessage(out))
}

/// Checks every structural byte of a recovered message, then the election id.
pub fn unpad(bytes: &[u8], expected: &ElectionId) -> Result<EncodedBallot, CodecError> {
    if bytes.len() < MIN_MODULUS_LEN || bytes[0] != 0x00 || bytes[1] != PAD_MARKER {
        return Err(CodecError::BadStructure);
    }
    let sep = bytes.len() - BALLOT_LEN - 1;
    if bytes[10..sep].iter().any(|&x| x != PAD_FILLER) || bytes[sep] != 0x00 {
        return Err(CodecError::BadStructure);
    }
    if bytes[2..10] != expected.0 {
        return Err(CodecError::WrongElection);
    }
    let mut block = [0u8; BALLOT_LEN];
    block.copy_from_slice(&bytes[sep + 1..]);
    Ok(EncodedBallot(block))
}

pub fn bytes_to_int(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

/// Big-endian, left-padded with zeros to exactly `width` bytes.
pub fn int_to_bytes(value: &BigUint, width: usize) -> Result<Vec<u8>, CodecError> {
    if value.bits() > (width as u64) * 8 {
        return Err(CodecError::Overflow(width));
    }
    let raw = value.to_bytes_be();
    // to_bytes_be returns [0] for zero.
    let raw: &[u8] = if raw == [0] { &[] } else { &raw };
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(raw);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(parties: &[usize]) -> ElectionConfig {
        ElectionConfig::new(
            ElectionId(*b"ELECT-01"),
            "t",
            parties
                .iter()
                .enumerate()
                .map(|(p, &n)| (format!("P{p}"), (0..n).map(|c| format!("C{c}")).collect()))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn empty_approvals_encode_to_zero_mask() {
        let b = encode(&VoteSelection::new(3, []), Nonce([0; 8]));
        let mut expected = [0u8; 32];
        expected[0] = 0x01;
        expected[9] = 0x03;
        assert_eq!(b.as_bytes(), &expected);
    }

    #[test]
    fn approvals_pack_lsb_first() {
        let b = encode(&VoteSelection::new(0, [0, 2, 4]), Nonce([0; 8]));
        assert_eq!(b.as_bytes()[10], 0b0001_0101);
        assert!(b.as_bytes()[11..=28].iter().all(|&x| x == 0));
    }

    #[test]
    fn high_candidate_lands_in_last_mask_byte() {
        let b = encode(&VoteSelection::new(0, [151]), Nonce([0; 8]));
        assert_eq!(b.as_bytes()[28], 0x80);
        let cfg = config(&[152]);
        assert_eq!(decode(&b, &cfg).unwrap().0, VoteSelection::new(0, [151]));
    }

    #[test]
    fn decode_inverts_encode() {
        let cfg = config(&[5, 5, 5, 5]);
        let sel = VoteSelection::new(3, [1, 4]);
        let nonce = Nonce([9, 8, 7, 6, 5, 4, 3, 2]);
        assert_eq!(decode(&encode(&sel, nonce), &cfg).unwrap(), (sel, nonce));
    }

    #[test]
    fn decode_rejects_bad_version() {
        let cfg = config(&[3]);
        let mut raw = *encode(&VoteSelection::new(0, [1]), Nonce([0; 8])).as_bytes();
        raw[0] = 0x02;
        assert_eq!(
            decode(&EncodedBallot::from_bytes(raw), &cfg),
            Err(CodecError::BadVersion(2))
        );
    }

    #[test]
    fn decode_rejects_reserved_and_party() {
        let cfg = config(&[3]);
        let mut raw = *encode(&VoteSelection::new(0, []), Nonce([0; 8])).as_bytes();
        raw[31] = 1;
        assert_eq!(
            decode(&EncodedBallot::from_bytes(raw), &cfg),
            Err(CodecError::ReservedNonZero)
        );
        let raw = *encode(&VoteSelection::new(1, []), Nonce([0; 8])).as_bytes();
        assert_eq!(
            decode(&EncodedBallot::from_bytes(raw), &cfg),
            Err(CodecError::PartyOutOfRange(1))
        );
    }

    #[test]
    fn decode_rejects_stray_bits() {
        let cfg = config(&[3]);
        let base = *encode(&VoteSelection::new(0, [0]), Nonce([0; 8])).as_bytes();
        for bit in 3..BITMASK_BITS {
            let mut raw = base;
            raw[BITMASK_OFFSET + bit / 8] ^= 1 << (bit % 8);
            assert_eq!(
                decode(&EncodedBallot::from_bytes(raw), &cfg),
                Err(CodecError::StrayApprovalBit { bit, candidates: 3 })
            );
        }
    }

    #[test]
    fn exhaustive_two_by_three() {
        let cfg = config(&[3, 3]);
        let nonce = Nonce([0x5a; 8]);
        let mut seen = std::collections::HashSet::new();
        for party in 0..2u8 {
            for mask in 0u8..8 {
                let sel = VoteSelection::new(party, (0..3).filter(|b| mask & (1 << b) != 0));
                let enc = encode(&sel, nonce);
                assert!(seen.insert(enc));
                assert_eq!(decode(&enc, &cfg).unwrap(), (sel, nonce));
            }
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn pad_filler_lengths() {
        let b = encode(&VoteSelection::new(0, []), Nonce([0; 8]));
        let id = ElectionId([7; 8]);
        assert_eq!(pad(&b, &id, 44).unwrap().filler_len(), 1);
        assert_eq!(pad(&b, &id, 256).unwrap().filler_len(), 213);
        assert_eq!(pad(&b, &id, 43), Err(CodecError::ModulusTooSmall(43)));
    }

    #[test]
    fn pad_layout_is_exact() {
        let b = encode(&VoteSelection::new(2, [1]), Nonce([0xAA; 8]));
        let id = ElectionId(*b"ABCDEFGH");
        let p = pad(&b, &id, 48).unwrap();
        let bytes = p.as_bytes();
        assert_eq!(&bytes[..2], &[0x00, 0x56]);
        assert_eq!(&bytes[2..10], b"ABCDEFGH");
        assert_eq!(&bytes[10..15], &[0xFF; 5]);
        assert_eq!(bytes[15], 0x00);
        assert_eq!(&bytes[16..], b.as_bytes());
    }

    #[test]
    fn unpad_rejections() {
        let b = encode(&VoteSelection::new(0, [0]), Nonce([1; 8]));
        let id = ElectionId([3; 8]);
        let p = pad(&b, &id, 64).unwrap();
        assert_eq!(unpad(p.as_bytes(), &id), Ok(b));

        let mut bad = p.as_bytes().to_vec();
        bad[12] = 0x00;
        assert_eq!(unpad(&bad, &id), Err(CodecError::BadStructure));

        assert_eq!(unpad(p.as_bytes(), &ElectionId([4; 8])), Err(CodecError::WrongElection));

        let mut bad = p.as_bytes().to_vec();
        bad[0] = 0x01;
        assert_eq!(unpad(&bad, &id), Err(CodecError::BadStructure));
        assert_eq!(unpad(&[1], &id), Err(CodecError::BadStructure));
        assert_eq!(unpad(&[0u8; 64], &id), Err(CodecError::BadStructure));
    }

    #[test]
    fn int_conversions() {
        assert_eq!(bytes_to_int(&[0x00, 0x01]), BigUint::from(1u8));
        assert_eq!(int_to_bytes(&BigUint::from(1u8), 2).unwrap(), vec![0, 1]);
        assert_eq!(int_to_bytes(&BigUint::from(0u8), 3).unwrap(), vec![0, 0, 0]);
        let k = 5;
        let limit = BigUint::from(1u8) << (8 * k);
        assert_eq!(int_to_bytes(&limit, k), Err(CodecError::Overflow(k)));
        assert!(int_to_bytes(&(limit - 1u8), k).is_ok());
    }

    fn selection_for(parties: &'static [usize]) -> impl Strategy<Value = VoteSelection> {
        (0..parties.len()).prop_flat_map(move |p| {
            prop::collection::btree_set(0..parties[p] as u8, 0..=parties[p])
                .prop_map(move |a| VoteSelection { party_index: p as u8, approvals: a })
        })
    }

    const SHAPE: &[usize] = &[1, 7, 40, 152];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn encode_decode_round_trip(sel in selection_for(SHAPE), nonce in any::<[u8; 8]>()) {
            let cfg = config(SHAPE);
            let enc = encode(&sel, Nonce(nonce));
            prop_assert_eq!(decode(&enc, &cfg).unwrap(), (sel, Nonce(nonce)));
        }
    }

    proptest! {
        #[test]
        fn pad_unpad_round_trip(raw in any::<[u8; 32]>(), id in any::<[u8; 8]>(), k in 44usize..600) {
            let b = EncodedBallot::from_bytes(raw);
            let p = pad(&b, &ElectionId(id), k).unwrap();
            prop_assert_eq!(p.as_bytes().len(), k);
            // Leading zero byte: integer is below any k-byte modulus with top bit set.
            prop_assert!(p.to_int().bits() <= 8 * k as u64 - 8);
            prop_assert_eq!(unpad(p.as_bytes(), &ElectionId(id)).unwrap(), b);
        }

        #[test]
        fn int_bytes_bijection(x in prop::collection::vec(any::<u8>(), 0..80)) {
            prop_assert_eq!(int_to_bytes(&bytes_to_int(&x), x.len()).unwrap(), x);
        }

        #[test]
        fn nonce_changes_block(sel in selection_for(SHAPE), a in any::<[u8; 8]>(), b in any::<[u8; 8]>()) {
            prop_assume!(a != b);
            prop_assert_ne!(encode(&sel, Nonce(a)), encode(&sel, Nonce(b)));
        }
    }
}

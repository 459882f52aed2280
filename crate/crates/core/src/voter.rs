//! Voter device: fill in the ballot, blind it, get it signed, unblind, and
//! print the ballot and the filled note sheet. Also the verification-app
//! check that decodes a printed payload back into the vote.
//!
//! The printed payload is `BPV1|` followed by the unpadded base64url encoding
//! of the signature at modulus width. The ballot bytes are not repeated:
//! `s^e mod N` recovers them.

use std::fmt::Write as _;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::authority::{AuthorityError, SigningChannel};
use crate::blindsig::{
    blind, unblind, verify_recover, BlindSignature, BlindingFactor, PublicKey, Signature,
};
use crate::codec::{decode, encode, int_to_bytes, pad, unpad, CodecError, Nonce};
use crate::election::{validate_selection, ElectionConfig, ElectionId, SelectionError, VoteSelection};
use crate::identity::{sign_request, SigningRequest, VoterCredential, VoterId};

pub const PAYLOAD_PREFIX: &str = "BPV1|";
pub const DIGEST_LEN: usize = 8;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum VoterError {
    #[error(transparent)]
    InvalidSelection(#[from] SelectionError),
    #[error("ballot cannot be padded: {0}")]
    Encoding(CodecError),
    #[error("authority refused: {0}")]
    Authority(#[from] AuthorityError),
    #[error("authority returned a signature that does not verify")]
    LocalVerifyFailed(Box<FailedSignature>),
}

/// Evidence kept when the authority's answer does not verify.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailedSignature {
    pub request: SigningRequest,
    pub returned: BlindSignature,
}

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum VerifyError {
    #[error("payload framing is invalid")]
    BadFraming,
    #[error("recovered message is not a padded ballot")]
    BadStructure,
    #[error("ballot belongs to another election")]
    WrongElection,
    #[error("ballot content does not decode: {0}")]
    DecodeError(CodecError),
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::BadFraming => "BAD_FRAMING",
            VerifyError::BadStructure => "BAD_STRUCTURE",
            VerifyError::WrongElection => "WRONG_ELECTION",
            VerifyError::DecodeError(CodecError::BadVersion(_)) => "BAD_VERSION",
            VerifyError::DecodeError(CodecError::ReservedNonZero) => "RESERVED_NONZERO",
            VerifyError::DecodeError(CodecError::PartyOutOfRange(_)) => "PARTY_OUT_OF_RANGE",
            VerifyError::DecodeError(CodecError::StrayApprovalBit { .. }) => "STRAY_APPROVAL_BIT",
            VerifyError::DecodeError(_) => "DECODE_ERROR",
        }
    }
}

impl From<CodecError> for VerifyError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::BadStructure => VerifyError::BadStructure,
            CodecError::WrongElection => VerifyError::WrongElection,
            other => VerifyError::DecodeError(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stance {
    For,
    Against,
}

impl Stance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stance::For => "FOR",
            Stance::Against => "AGAINST",
        }
    }
}

/// The printable ballot: human-readable lines with the payload line last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallotArtifact {
    pub text: String,
    pub payload: String,
    /// Kept for the voter's own records; not printed.
    pub nonce: Nonce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteSheet {
    pub election_id: ElectionId,
    pub party_name: String,
    pub stances: Vec<(String, Stance)>,
    pub payload_digest: [u8; DIGEST_LEN],
}

impl NoteSheet {
    pub fn to_text(&self) -> String {
        let mut out = format!("NOTE {}\nPARTY {}\n", self.election_id, self.party_name);
        for (name, stance) in &self.stances {
            let _ = writeln!(out, "{} {}", stance.as_str(), name);
        }
        let _ = writeln!(out, "DIGEST {}", hex::encode(self.payload_digest));
        out
    }
}

/// Truncated SHA-256 of the payload line, used to look the ballot up on the
/// bulletin board.
pub fn payload_digest(payload: &str) -> [u8; DIGEST_LEN] {
    let full = Sha256::digest(payload.as_bytes());
    let mut out = [0u8; DIGEST_LEN];
    out.copy_from_slice(&full[..DIGEST_LEN]);
    out
}

pub fn encode_payload(sig: &Signature, pk: &PublicKey) -> String {
    format!("{PAYLOAD_PREFIX}{}", URL_SAFE_NO_PAD.encode(sig.to_bytes(pk)))
}

pub fn parse_payload(line: &str, pk: &PublicKey) -> Result<Signature, VerifyError> {
    let body = line
        .trim_end_matches(['\r', '\n'])
        .strip_prefix(PAYLOAD_PREFIX)
        .ok_or(VerifyError::BadFraming)?;
    let bytes = URL_SAFE_NO_PAD
        .decode(body)
        .map_err(|_| VerifyError::BadFraming)?;
    Signature::from_bytes(&bytes, pk).map_err(|_| VerifyError::BadFraming)
}

/// Verification app: signature check by message recovery, then unpad and
/// decode. Returns the selection and the ballot nonce.
pub fn verify_payload(
    pk: &PublicKey,
    config: &ElectionConfig,
    payload: &str,
) -> Result<(VoteSelection, Nonce), VerifyError> {
    let sig = parse_payload(payload, pk)?;
    let recovered = verify_recover(pk, &sig).map_err(|_| VerifyError::BadFraming)?;
    let bytes = int_to_bytes(&recovered, pk.modulus_len()).map_err(|_| VerifyError::BadStructure)?;
    let ballot = unpad(&bytes, &config.election_id())?;
    Ok(decode(&ballot, config)?)
}

pub fn verify_ballot(
    pk: &PublicKey,
    config: &ElectionConfig,
    payload: &str,
) -> Result<VoteSelection, VerifyError> {
    verify_payload(pk, config, payload).map(|(sel, _)| sel)
}

fn stances(config: &ElectionConfig, sel: &VoteSelection) -> (String, Vec<(String, Stance)>) {
    let party = config
        .party(sel.party_index)
        .expect("selection validated against config");
    let lines = party
        .candidates()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let stance = if sel.approvals.contains(&(i as u8)) {
                Stance::For
            } else {
                Stance::Against
            };
            (name.clone(), stance)
        })
        .collect();
    (party.name().to_string(), lines)
}

/// Printable ballot for the chosen party only:
///
/// ```text
/// BALLOT <title>
/// ELECTION <id hex>
/// PARTY <index> <name>
/// FOR <candidate>
/// AGAINST <candidate>
/// BPV1|...
/// ```
pub fn render_ballot_text(config: &ElectionConfig, sel: &VoteSelection, payload: &str) -> String {
    let (party_name, lines) = stances(config, sel);
    let mut out = format!(
        "BALLOT {}\nELECTION {}\nPARTY {} {}\n",
        config.title(),
        config.election_id(),
        sel.party_index,
        party_name
    );
    for (name, stance) in lines {
        let _ = writeln!(out, "{} {}", stance.as_str(), name);
    }
    out.push_str(payload);
    out.push('\n');
    out
}

/// Voter-side state between sending the signing request and receiving the
/// blind signature. Holds the blinding factor, so it never leaves the device.
#[derive(Debug, Clone)]
pub struct VoterSession {
    voter_id: VoterId,
    selection: VoteSelection,
    nonce: Nonce,
    message: BigUint,
    factor: BlindingFactor,
    request: SigningRequest,
}

impl VoterSession {
    pub fn begin<R: RngCore + CryptoRng>(
        config: &ElectionConfig,
        pk: &PublicKey,
        cred: &VoterCredential,
        sel: VoteSelection,
        rng: &mut R,
    ) -> Result<Self, VoterError> {
        let nonce = Nonce::random(rng);
        let factor = BlindingFactor::random(pk, rng);
        Self::with_randomness(config, pk, cred, sel, nonce, factor)
    }

    /// Deterministic variant, for replaying a session from stored state.
    pub fn with_randomness(
        config: &ElectionConfig,
        pk: &PublicKey,
        cred: &VoterCredential,
        sel: VoteSelection,
        nonce: Nonce,
        factor: BlindingFactor,
    ) -> Result<Self, VoterError> {
        validate_selection(config, &sel)?;
        let padded = pad(&encode(&sel, nonce), &config.election_id(), pk.modulus_len())
            .map_err(VoterError::Encoding)?;
        let message = padded.to_int();
        let blinded = blind(pk, &message, &factor).expect("padded message is below N");
        let request = sign_request(cred, config.election_id(), blinded);
        Ok(VoterSession {
            voter_id: cred.voter_id().clone(),
            selection: sel,
            nonce,
            message,
            factor,
            request,
        })
    }

    pub fn request(&self) -> &SigningRequest {
        &self.request
    }

    pub fn voter_id(&self) -> &VoterId {
        &self.voter_id
    }

    pub fn selection(&self) -> &VoteSelection {
        &self.selection
    }

    pub fn nonce(&self) -> Nonce {
        self.nonce
    }

    pub fn blinding_factor(&self) -> &BlindingFactor {
        &self.factor
    }

    /// Unblinds and checks the authority's answer locally; nothing is
    /// rendered unless the signature recovers exactly our padded ballot.
    pub fn finish(
        self,
        config: &ElectionConfig,
        pk: &PublicKey,
        returned: BlindSignature,
    ) -> Result<(BallotArtifact, NoteSheet), VoterError> {
        let sig = match unblind(pk, &returned, &self.factor) {
            Ok(s) if verify_recover(pk, &s).ok().as_ref() == Some(&self.message) => s,
            _ => {
                return Err(VoterError::LocalVerifyFailed(Box::new(FailedSignature {
                    request: self.request,
                    returned,
                })))
            }
        };
        let payload = encode_payload(&sig, pk);
        let text = render_ballot_text(config, &self.selection, &payload);
        let (party_name, stances) = stances(config, &self.selection);
        let note = NoteSheet {
            election_id: config.election_id(),
            party_name,
            stances,
            payload_digest: payload_digest(&payload),
        };
        Ok((
            BallotArtifact {
                text,
                payload,
                nonce: self.nonce,
            },
            note,
        ))
    }
}

/// Full voter pipeline: encode, pad, blind, request, unblind, verify, render.
pub fn prepare_and_cast<C: SigningChannel + ?Sized, R: RngCore + CryptoRng>(
    config: &ElectionConfig,
    pk: &PublicKey,
    cred: &VoterCredential,
    sel: VoteSelection,
    channel: &C,
    rng: &mut R,
) -> Result<(BallotArtifact, NoteSheet), VoterError> {
    let session = VoterSession::begin(config, pk, cred, sel, rng)?;
    let returned = channel.request_signature(session.request())?;
    session.finish(config, pk, returned)
}

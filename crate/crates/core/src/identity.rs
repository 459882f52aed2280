//! Simulated national eID: per-voter Ed25519 credentials that sign blind
//! signing requests, and the registry the authority checks them against.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature as EdSignature, Signer, SigningKey, VerifyingKey};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};

use crate::blindsig::BlindedMessage;
use crate::election::ElectionId;

const REQUEST_DOMAIN: &[u8] = b"blindpost:signing-request:v1";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("voter id {0} already issued")]
    DuplicateVoterId(VoterId),
    #[error("voter {0} is not registered")]
    UnknownVoter(VoterId),
    #[error("credential signature does not verify")]
    BadSignature,
    #[error("invalid voter id {0:?}")]
    InvalidVoterId(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Voter identifier. Appears as a whitespace-separated field in text
/// framings, so it may not contain whitespace or `|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoterId(String);

impl VoterId {
    pub fn new(id: impl Into<String>) -> Result<Self, IdentityError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '|' || c.is_control()) {
            return Err(IdentityError::InvalidVoterId(id));
        }
        Ok(VoterId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VoterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VoterId {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VoterId::new(s)
    }
}

#[derive(Clone)]
pub struct VoterCredential {
    voter_id: VoterId,
    key: SigningKey,
}

impl fmt::Debug for VoterCredential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoterCredential")
            .field("voter_id", &self.voter_id)
            .finish_non_exhaustive()
    }
}

impl VoterCredential {
    pub fn from_secret(voter_id: VoterId, secret: [u8; 32]) -> Self {
        VoterCredential {
            voter_id,
            key: SigningKey::from_bytes(&secret),
        }
    }

    pub fn voter_id(&self) -> &VoterId {
        &self.voter_id
    }

    pub fn public_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    /// `CRED <voter_id> <secret hex>`: the simulated eID card contents.
    pub fn to_line(&self) -> String {
        format!("CRED {} {}", self.voter_id, hex::encode(self.key.to_bytes()))
    }

    pub fn parse_line(line: &str) -> Result<Self, IdentityError> {
        let fmt_err = |message: &str| IdentityError::Format {
            line: 0,
            message: message.to_string(),
        };
        let mut parts = line.split_whitespace();
        if parts.next() != Some("CRED") {
            return Err(fmt_err("expected CRED <voter_id> <secret hex>"));
        }
        let id = VoterId::new(parts.next().ok_or_else(|| fmt_err("missing voter id"))?)?;
        let mut secret = [0u8; 32];
        hex::decode_to_slice(parts.next().ok_or_else(|| fmt_err("missing secret"))?, &mut secret)
            .map_err(|_| fmt_err("secret must be 64 hex chars"))?;
        if parts.next().is_some() {
            return Err(fmt_err("trailing fields"));
        }
        Ok(VoterCredential::from_secret(id, secret))
    }
}

/// Stand-in for eID issuance; refuses to issue the same voter id twice.
#[derive(Debug, Default)]
pub struct CredentialIssuer {
    issued: HashSet<VoterId>,
}

impl CredentialIssuer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn issue_credential<R: RngCore + CryptoRng>(
        &mut self,
        voter_id: VoterId,
        rng: &mut R,
    ) -> Result<VoterCredential, IdentityError> {
        if self.issued.contains(&voter_id) {
            return Err(IdentityError::DuplicateVoterId(voter_id));
        }
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        self.issued.insert(voter_id.clone());
        Ok(VoterCredential::from_secret(voter_id, secret))
    }
}

/// A voter-signed request for a blind signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningRequest {
    pub voter_id: VoterId,
    pub election_id: ElectionId,
    pub blinded: BlindedMessage,
    pub signature: [u8; 64],
}

fn request_message(election_id: &ElectionId, blinded: &BlindedMessage) -> Vec<u8> {
    let value = blinded.value().to_bytes_be();
    let mut msg = Vec::with_capacity(REQUEST_DOMAIN.len() + 8 + 4 + value.len());
    msg.extend_from_slice(REQUEST_DOMAIN);
    msg.extend_from_slice(election_id.as_bytes());
    msg.extend_from_slice(&(value.len() as u32).to_be_bytes());
    msg.extend_from_slice(&value);
    msg
}

pub fn sign_request(
    cred: &VoterCredential,
    election_id: ElectionId,
    blinded: BlindedMessage,
) -> SigningRequest {
    let sig = cred.key.sign(&request_message(&election_id, &blinded));
    SigningRequest {
        voter_id: cred.voter_id.clone(),
        election_id,
        blinded,
        signature: sig.to_bytes(),
    }
}

impl SigningRequest {
    /// `REQ <voter_id> <election_id hex> <blinded hex> <sig hex>`
    pub fn to_line(&self) -> String {
        format!(
            "REQ {} {} {:x} {}",
            self.voter_id,
            self.election_id,
            self.blinded.value(),
            hex::encode(self.signature)
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, IdentityError> {
        let fmt_err = |message: String| IdentityError::Format { line: 0, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [tag, voter, election, blinded, sig] = fields[..] else {
            return Err(fmt_err(format!("expected 5 fields, got {}", fields.len())));
        };
        if tag != "REQ" {
            return Err(fmt_err(format!("expected REQ, got {tag:?}")));
        }
        let voter_id = VoterId::new(voter)?;
        let election_id = election.parse::<ElectionId>().map_err(fmt_err)?;
        let blinded = BigUint::parse_bytes(blinded.as_bytes(), 16)
            .ok_or_else(|| fmt_err("bad blinded hex".into()))?;
        let mut signature = [0u8; 64];
        hex::decode_to_slice(sig, &mut signature)
            .map_err(|_| fmt_err("signature must be 128 hex chars".into()))?;
        Ok(SigningRequest {
            voter_id,
            election_id,
            blinded: BlindedMessage::new(blinded),
            signature,
        })
    }
}

/// voter_id -> credential public key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    voters: BTreeMap<VoterId, VerifyingKey>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, voter_id: VoterId, key: VerifyingKey) -> Result<(), IdentityError> {
        if self.voters.contains_key(&voter_id) {
            return Err(IdentityError::DuplicateVoterId(voter_id));
        }
        self.voters.insert(voter_id, key);
        Ok(())
    }

    pub fn get(&self, voter_id: &VoterId) -> Option<&VerifyingKey> {
        self.voters.get(voter_id)
    }

    pub fn contains(&self, voter_id: &VoterId) -> bool {
        self.voters.contains_key(voter_id)
    }

    pub fn len(&self) -> usize {
        self.voters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voters.is_empty()
    }

    pub fn voter_ids(&self) -> impl Iterator<Item = &VoterId> {
        self.voters.keys()
    }

    /// One `VOTER <voter_id> <pubkey hex>` line per voter, sorted by id.
    pub fn to_text(&self) -> String {
        self.voters
            .iter()
            .map(|(id, key)| format!("VOTER {} {}\n", id, hex::encode(key.as_bytes())))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, IdentityError> {
        let mut reg = Registry::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| IdentityError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let ["VOTER", id, key] = fields[..] else {
                return Err(err("expected VOTER <voter_id> <pubkey hex>"));
            };
            let mut raw = [0u8; 32];
            hex::decode_to_slice(key, &mut raw).map_err(|_| err("pubkey must be 64 hex chars"))?;
            let key = VerifyingKey::from_bytes(&raw).map_err(|_| err("invalid public key"))?;
            reg.register(VoterId::new(id)?, key)?;
        }
        Ok(reg)
    }
}

pub fn verify_request(registry: &Registry, req: &SigningRequest) -> Result<(), IdentityError> {
    let key = registry
        .get(&req.voter_id)
        .ok_or_else(|| IdentityError::UnknownVoter(req.voter_id.clone()))?;
    let sig = EdSignature::from_bytes(&req.signature);
    key.verify_strict(&request_message(&req.election_id, &req.blinded), &sig)
        .map_err(|_| IdentityError::BadSignature)
}

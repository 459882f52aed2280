//! The signing authority: checks eligibility, grants at most one blind
//! signature per voter, keeps the voter-signed request log, and answers
//! polling-station lookups.
//!
//! The authority only ever handles blinded values; nothing in its state can
//! be unblinded without the voter's factor.

use std::collections::HashSet;
use std::sync::{Mutex, RwLock};

use crate::blindsig::{sign_blinded, BlindKeyPair, BlindSignature, BlindedMessage, PublicKey};
use crate::board::{BoardError, BulletinBoard, RecordKind};
use crate::election::ElectionConfig;
use crate::identity::{verify_request, IdentityError, Registry, SigningRequest, VoterId};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AuthorityError {
    #[error("voter {0} is not registered")]
    UnknownVoter(VoterId),
    #[error("credential signature does not verify")]
    BadSignature,
    #[error("voter {0} already obtained a signature")]
    AlreadyRequested(VoterId),
    #[error("request is for another election")]
    WrongElection,
    #[error("blinded value is not below the modulus")]
    OutOfRange,
    #[error("adversarial signing is disabled")]
    AdversarialDisabled,
    #[error("malformed message: {0}")]
    Malformed(String),
}

impl AuthorityError {
    /// Stable code used in `RSP ERR <code>` lines.
    pub fn code(&self) -> &'static str {
        match self {
            AuthorityError::UnknownVoter(_) => "UNKNOWN_VOTER",
            AuthorityError::BadSignature => "BAD_SIGNATURE",
            AuthorityError::AlreadyRequested(_) => "ALREADY_REQUESTED",
            AuthorityError::WrongElection => "WRONG_ELECTION",
            AuthorityError::OutOfRange => "OUT_OF_RANGE",
            AuthorityError::AdversarialDisabled => "ADVERSARIAL_DISABLED",
            AuthorityError::Malformed(_) => "MALFORMED",
        }
    }
}

impl From<IdentityError> for AuthorityError {
    fn from(e: IdentityError) -> Self {
        match e {
            IdentityError::UnknownVoter(id) => AuthorityError::UnknownVoter(id),
            IdentityError::BadSignature => AuthorityError::BadSignature,
            other => AuthorityError::Malformed(other.to_string()),
        }
    }
}

/// Anything a voter device can send a signing request to.
pub trait SigningChannel {
    fn request_signature(&self, req: &SigningRequest) -> Result<BlindSignature, AuthorityError>;
}

/// Answers "has this voter obtained a postal-ballot signature?".
pub trait RequestLookup {
    fn has_requested(&self, voter_id: &VoterId) -> bool;
}

#[derive(Debug, Default)]
struct RequestLog {
    entries: Vec<SigningRequest>,
    voters: HashSet<VoterId>,
}

#[derive(Debug)]
pub struct Authority {
    config: ElectionConfig,
    keys: BlindKeyPair,
    registry: RwLock<Registry>,
    log: Mutex<RequestLog>,
    issued: Mutex<u64>,
    adversarial: bool,
}

impl Authority {
    pub fn new(config: ElectionConfig, keys: BlindKeyPair, registry: Registry) -> Self {
        Authority {
            config,
            keys,
            registry: RwLock::new(registry),
            log: Mutex::new(RequestLog::default()),
            issued: Mutex::new(0),
            adversarial: false,
        }
    }

    /// Restores an authority from a previously exported request log. Entries
    /// are re-verified; the first invalid one is returned as an error.
    pub fn restore(
        config: ElectionConfig,
        keys: BlindKeyPair,
        registry: Registry,
        log: Vec<SigningRequest>,
    ) -> Result<Self, AuthorityError> {
        let auth = Authority::new(config, keys, registry);
        {
            let mut state = auth.log.lock().expect("log lock");
            for req in log {
                auth.check(&req)?;
                if !state.voters.insert(req.voter_id.clone()) {
                    return Err(AuthorityError::AlreadyRequested(req.voter_id));
                }
                state.entries.push(req);
            }
            *auth.issued.lock().expect("counter lock") = state.entries.len() as u64;
        }
        Ok(auth)
    }

    /// Enables [`Authority::corrupt_sign`]. Test and attack harnesses only.
    pub fn with_adversarial_mode(mut self) -> Self {
        self.adversarial = true;
        self
    }

    pub fn config(&self) -> &ElectionConfig {
        &self.config
    }

    pub fn public_key(&self) -> &PublicKey {
        self.keys.public()
    }

    pub fn registry_snapshot(&self) -> Registry {
        self.registry.read().expect("registry lock").clone()
    }

    pub fn issued_count(&self) -> u64 {
        *self.issued.lock().expect("counter lock")
    }

    fn check(&self, req: &SigningRequest) -> Result<(), AuthorityError> {
        if req.election_id != self.config.election_id() {
            return Err(AuthorityError::WrongElection);
        }
        if req.blinded.value() >= self.keys.public().modulus() {
            return Err(AuthorityError::OutOfRange);
        }
        verify_request(&self.registry.read().expect("registry lock"), req)?;
        Ok(())
    }

    /// Verifies the request, records it, and returns the blind signature.
    ///
    /// Check-and-record happens under one lock, so concurrent requests from
    /// the same voter get exactly one success. Rejected requests leave no
    /// trace and do not use up the voter's request.
    pub fn handle_request(&self, req: &SigningRequest) -> Result<BlindSignature, AuthorityError> {
        self.check(req)?;
        {
            let mut log = self.log.lock().expect("log lock");
            if log.voters.contains(&req.voter_id) {
                return Err(AuthorityError::AlreadyRequested(req.voter_id.clone()));
            }
            log.voters.insert(req.voter_id.clone());
            log.entries.push(req.clone());
            *self.issued.lock().expect("counter lock") += 1;
        }
        Ok(sign_blinded(&self.keys, &req.blinded).expect("range checked"))
    }

    /// Processes one `REQ ...` line and produces the `RSP ...` line.
    pub fn handle_line(&self, line: &str) -> String {
        let result = SigningRequest::parse_line(line)
            .map_err(|e| AuthorityError::Malformed(e.to_string()))
            .and_then(|req| self.handle_request(&req));
        AuthorityResponse::from_result(result).to_line()
    }

    pub fn has_requested(&self, voter_id: &VoterId) -> bool {
        self.log.lock().expect("log lock").voters.contains(voter_id)
    }

    /// Snapshot of the request log in arrival order.
    pub fn export_request_log(&self) -> Vec<SigningRequest> {
        self.log.lock().expect("log lock").entries.clone()
    }

    /// Appends every logged request to the board as a REQUEST record whose
    /// payload is the `REQ` line. Returns the number of records written.
    pub fn publish_request_log(&self, board: &mut BulletinBoard) -> Result<usize, BoardError> {
        let log = self.export_request_log();
        for req in &log {
            board.append(RecordKind::Request, req.to_line().as_bytes())?;
        }
        Ok(log.len())
    }

    /// Signs without a request on record: the misbehaviour the eligibility
    /// audit exists to catch.
    pub fn corrupt_sign(&self, blinded: &BlindedMessage) -> Result<BlindSignature, AuthorityError> {
        if !self.adversarial {
            return Err(AuthorityError::AdversarialDisabled);
        }
        let sig = sign_blinded(&self.keys, blinded).map_err(|_| AuthorityError::OutOfRange)?;
        *self.issued.lock().expect("counter lock") += 1;
        Ok(sig)
    }

    /// Text dump of everything the authority stores about voters.
    pub fn dump_state(&self) -> String {
        let mut out = format!(
            "ELECTION {}\nISSUED {}\n",
            self.config.election_id(),
            self.issued_count()
        );
        out.push_str(&self.registry_snapshot().to_text());
        for req in self.export_request_log() {
            out.push_str(&req.to_line());
            out.push('\n');
        }
        out
    }
}

impl SigningChannel for Authority {
    fn request_signature(&self, req: &SigningRequest) -> Result<BlindSignature, AuthorityError> {
        self.handle_request(req)
    }
}

impl RequestLookup for Authority {
    fn has_requested(&self, voter_id: &VoterId) -> bool {
        Authority::has_requested(self, voter_id)
    }
}

/// Set of voter ids taken from an exported request log.
#[derive(Debug, Clone, Default)]
pub struct ExportedLog(HashSet<VoterId>);

impl ExportedLog {
    pub fn from_requests<'a>(log: impl IntoIterator<Item = &'a SigningRequest>) -> Self {
        ExportedLog(log.into_iter().map(|r| r.voter_id.clone()).collect())
    }
}

impl RequestLookup for ExportedLog {
    fn has_requested(&self, voter_id: &VoterId) -> bool {
        self.0.contains(voter_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthorityResponse {
    Ok(BlindSignature),
    Err(String),
}

impl AuthorityResponse {
    pub fn from_result(r: Result<BlindSignature, AuthorityError>) -> Self {
        match r {
            Ok(sig) => AuthorityResponse::Ok(sig),
            Err(e) => AuthorityResponse::Err(e.code().to_string()),
        }
    }

    /// `RSP OK <blindedsig hex>` or `RSP ERR <code>`.
    pub fn to_line(&self) -> String {
        match self {
            AuthorityResponse::Ok(sig) => format!("RSP OK {:x}", sig.value()),
            AuthorityResponse::Err(code) => format!("RSP ERR {code}"),
        }
    }

    pub fn parse_line(line: &str) -> Result<Self, AuthorityError> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            ["RSP", "OK", hex] => num_bigint::BigUint::parse_bytes(hex.as_bytes(), 16)
                .map(|v| AuthorityResponse::Ok(BlindSignature::new(v)))
                .ok_or_else(|| AuthorityError::Malformed("bad signature hex".into())),
            ["RSP", "ERR", code] => Ok(AuthorityResponse::Err(code.to_string())),
            _ => Err(AuthorityError::Malformed(format!("bad response line {line:?}"))),
        }
    }
}

//! Blind-signature postal voting.
//!
//! A voter encodes the ballot into a fixed 256-bit block, pads it, blinds it
//! and sends the blinded value with a credential-signed request to the
//! election authority. The authority signs each eligible voter at most once
//! without seeing the ballot. The unblinded signature is the whole ballot
//! payload: raising it to `e` recovers the padded block.
//!
//! Modules follow the roles of the protocol:
//!
//! * [`election`] and [`codec`]: configuration and the ballot block.
//! * [`blindsig`]: RSA blind signatures with message recovery.
//! * [`identity`]: voter credentials and signed signing requests.
//! * [`authority`]: the signing authority and its request log.
//! * [`voter`]: the voter device and the verification app.
//! * [`tally`]: counting, the eligibility audit and the polling gate.
//! * [`board`]: the hash-chained public bulletin board.
//! * [`legacy`]: the token-based design this replaces, and its reuse attack.
//! * [`simulation`]: seeded end-to-end elections.

pub mod authority;
pub mod blindsig;
pub mod board;
pub mod codec;
pub mod election;
pub mod identity;
pub mod legacy;
pub mod simulation;
pub mod tally;
pub mod voter;

pub use authority::{Authority, AuthorityError, ExportedLog, RequestLookup, SigningChannel};
pub use blindsig::{BlindKeyPair, BlindSignature, BlindedMessage, BlindingFactor, PublicKey, Signature};
pub use board::{BoardRecord, BoardVerdict, BulletinBoard, RecordKind};
pub use codec::{EncodedBallot, Nonce};
pub use election::{ElectionConfig, ElectionId, VoteSelection};
pub use identity::{Registry, SigningRequest, VoterCredential, VoterId};
pub use tally::{AuditReport, BallotBox, GatePolicy, GateVerdict, TallyResult};
pub use voter::{BallotArtifact, NoteSheet, VerifyError, VoterError};

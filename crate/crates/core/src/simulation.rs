//! Seeded end-to-end elections.
//!
//! One RNG drives everything: key generation, credentials, ballot nonces,
//! blinding factors, postal loss and mailing order. The same seed and
//! parameters give the same board, byte for byte.

use rand::seq::{index, SliceRandom};
use rand::{CryptoRng, Rng, RngCore};

use crate::authority::Authority;
use crate::blindsig::{blind, keygen, unblind, BlindSigError, BlindingFactor, PublicKey};
use crate::board::{BoardError, BulletinBoard, RecordKind};
use crate::codec::{encode, pad, CodecError, Nonce};
use crate::election::{ElectionConfig, VoteSelection};
use crate::identity::{CredentialIssuer, IdentityError, Registry, SigningRequest, VoterId};
use crate::tally::{eligibility_audit, publish_tally, tally, AuditReport, BallotBox, TallyResult};
use crate::voter::{encode_payload, prepare_and_cast, NoteSheet, VoterError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Key(#[from] BlindSigError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("voter {voter}: {source}")]
    Voter { voter: VoterId, source: VoterError },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Authority(#[from] crate::authority::AuthorityError),
    #[error(transparent)]
    Board(#[from] BoardError),
}

#[derive(Debug, Clone)]
pub struct SimParams {
    pub config: ElectionConfig,
    pub voters: usize,
    pub key_bits: u64,
    /// One selection per voter; drawn at random when `None`.
    pub selections: Option<Vec<VoteSelection>>,
    /// Ballots the authority signs for nobody.
    pub corrupt_signatures: usize,
    /// Honest ballots that never arrive.
    pub lost_ballots: usize,
    /// Extra copies of arrived honest ballots.
    pub photocopies: usize,
}

impl SimParams {
    pub fn honest(config: ElectionConfig, voters: usize, key_bits: u64) -> Self {
        SimParams {
            config,
            voters,
            key_bits,
            selections: None,
            corrupt_signatures: 0,
            lost_ballots: 0,
            photocopies: 0,
        }
    }
}

#[derive(Debug)]
pub struct SimOutcome {
    pub public_key: PublicKey,
    pub registry: Registry,
    pub voter_ids: Vec<VoterId>,
    /// The script: what each voter chose.
    pub selections: Vec<VoteSelection>,
    /// Whether each voter's ballot arrived.
    pub mailed: Vec<bool>,
    pub notes: Vec<NoteSheet>,
    pub request_log: Vec<SigningRequest>,
    pub ballot_box: BallotBox,
    pub tally: TallyResult,
    pub audit: AuditReport,
    pub board: BulletinBoard,
}

/// Uniform party, then each candidate approved with probability 1/2.
pub fn random_selection<R: Rng + ?Sized>(config: &ElectionConfig, rng: &mut R) -> VoteSelection {
    let party = &config.parties()[rng.gen_range(0..config.parties().len())];
    let approvals = (0..party.candidates().len() as u8).filter(|_| rng.gen_bool(0.5));
    VoteSelection::new(party.index(), approvals.collect::<Vec<_>>())
}

/// Voter ids are `v0000`, `v0001`, ...
pub fn voter_id(i: usize) -> VoterId {
    VoterId::new(format!("v{i:04}")).expect("generated id is valid")
}

pub fn run_election<R: RngCore + CryptoRng>(
    params: &SimParams,
    rng: &mut R,
) -> Result<SimOutcome, SimError> {
    let config = &params.config;
    if params.lost_ballots > params.voters {
        return Err(SimError::InvalidParams(format!(
            "{} lost ballots but only {} voters",
            params.lost_ballots, params.voters
        )));
    }
    if let Some(s) = &params.selections {
        if s.len() != params.voters {
            return Err(SimError::InvalidParams(format!(
                "{} scripted selections for {} voters",
                s.len(),
                params.voters
            )));
        }
    }
    if params.photocopies > 0 && params.lost_ballots == params.voters {
        return Err(SimError::InvalidParams("no arrived ballot to photocopy".into()));
    }

    let keys = keygen(params.key_bits, rng)?;
    let pk = keys.public().clone();

    let mut issuer = CredentialIssuer::new();
    let mut registry = Registry::new();
    let mut creds = Vec::with_capacity(params.voters);
    for i in 0..params.voters {
        let cred = issuer.issue_credential(voter_id(i), rng)?;
        registry.register(cred.voter_id().clone(), cred.public_key())?;
        creds.push(cred);
    }

    let selections: Vec<VoteSelection> = match &params.selections {
        Some(s) => s.clone(),
        None => (0..params.voters).map(|_| random_selection(config, rng)).collect(),
    };

    let mut authority = Authority::new(config.clone(), keys, registry.clone());
    if params.corrupt_signatures > 0 {
        authority = authority.with_adversarial_mode();
    }
    let mut payloads = Vec::with_capacity(params.voters);
    let mut notes = Vec::with_capacity(params.voters);
    for (cred, sel) in creds.iter().zip(&selections) {
        let (artifact, note) = prepare_and_cast(config, &pk, cred, sel.clone(), &authority, rng)
            .map_err(|source| SimError::Voter {
                voter: cred.voter_id().clone(),
                source,
            })?;
        payloads.push(artifact.payload);
        notes.push(note);
    }

    let mut mailed = vec![true; params.voters];
    for i in index::sample(rng, params.voters, params.lost_ballots) {
        mailed[i] = false;
    }
    let mut inflow: Vec<String> = payloads
        .iter()
        .zip(&mailed)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p.clone())
        .collect();

    for _ in 0..params.corrupt_signatures {
        inflow.push(forge_ballot(&authority, config, &pk, rng)?);
    }
    let arrived = inflow.len() - params.corrupt_signatures;
    for _ in 0..params.photocopies {
        let copy = inflow[rng.gen_range(0..arrived)].clone();
        inflow.push(copy);
    }
    inflow.shuffle(rng);
    let ballot_box: BallotBox = inflow.into_iter().collect();

    let mut board = BulletinBoard::in_memory();
    board.append(RecordKind::Meta, config.to_config_string().as_bytes())?;
    board.append(RecordKind::Meta, pk.to_text().as_bytes())?;
    authority.publish_request_log(&mut board)?;
    let request_log = authority.export_request_log();
    let tally_result = tally(&pk, config, &ballot_box);
    let audit = eligibility_audit(&registry, &request_log, &tally_result);
    publish_tally(&mut board, config, &tally_result, &audit)?;

    Ok(SimOutcome {
        public_key: pk,
        registry,
        voter_ids: creds.iter().map(|c| c.voter_id().clone()).collect(),
        selections,
        mailed,
        notes,
        request_log,
        ballot_box,
        tally: tally_result,
        audit,
        board,
    })
}

/// A ballot produced by a dishonest authority without any voter request.
pub fn forge_ballot<R: RngCore + CryptoRng>(
    authority: &Authority,
    config: &ElectionConfig,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<String, SimError> {
    let sel = random_selection(config, rng);
    let ballot = encode(&sel, Nonce::random(rng));
    let m = pad(&ballot, &config.election_id(), pk.modulus_len())?.to_int();
    let r = BlindingFactor::random(pk, rng);
    let blinded = blind(pk, &m, &r)?;
    let signed = authority.corrupt_sign(&blinded)?;
    Ok(encode_payload(&unblind(pk, &signed, &r)?, pk))
}

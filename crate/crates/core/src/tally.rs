//! Tallying, the eligibility audit, and the polling-station gate.
//!
//! Ballot verification runs in parallel; aggregation walks the box in order,
//! so results never depend on scheduling.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::authority::RequestLookup;
use crate::blindsig::PublicKey;
use crate::board::{BoardError, BoardRecord, BulletinBoard, RecordKind};
use crate::election::{ElectionConfig, ElectionId, VoteSelection};
use crate::identity::{verify_request, Registry, SigningRequest, VoterId};
use crate::voter::{parse_payload, payload_digest, verify_payload, VerifyError};

/// Payload lines in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BallotBox {
    payloads: Vec<String>,
}

impl BallotBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, payload: impl Into<String>) {
        self.payloads.push(payload.into());
    }

    pub fn payloads(&self) -> &[String] {
        &self.payloads
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    /// One payload per non-blank line.
    pub fn parse(text: &str) -> Self {
        BallotBox {
            payloads: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        self.payloads.iter().map(|p| format!("{p}\n")).collect()
    }
}

impl FromIterator<String> for BallotBox {
    fn from_iter<T: IntoIterator<Item = String>>(iter: T) -> Self {
        BallotBox {
            payloads: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub position: usize,
    pub reason: VerifyError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Duplicate {
    pub position: usize,
    pub first_position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyResult {
    pub election_id: ElectionId,
    pub total: usize,
    pub party_votes: Vec<u64>,
    /// `candidate_for[party][candidate]`
    pub candidate_for: Vec<Vec<u64>>,
    /// (box position, payload) of every accepted ballot, in box order.
    pub accepted: Vec<(usize, String)>,
    pub rejected: Vec<Rejected>,
    pub duplicates: Vec<Duplicate>,
}

impl TallyResult {
    pub fn accepted_count(&self) -> usize {
        self.accepted.len()
    }

    /// Fixed field order:
    ///
    /// ```text
    /// TALLY <election id>
    /// BALLOTS <n>
    /// ACCEPTED <n>
    /// REJECTED <n>
    /// DUPLICATES <n>
    /// PARTY <index> <votes> <name>
    /// CAND <party> <candidate> <for> <name>
    /// REJECT <position> <reason code>
    /// DUPLICATE <position> <first position>
    /// ```
    pub fn to_report(&self, config: &ElectionConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "TALLY {}", self.election_id);
        let _ = writeln!(out, "BALLOTS {}", self.total);
        let _ = writeln!(out, "ACCEPTED {}", self.accepted.len());
        let _ = writeln!(out, "REJECTED {}", self.rejected.len());
        let _ = writeln!(out, "DUPLICATES {}", self.duplicates.len());
        for party in config.parties() {
            let p = party.index() as usize;
            let _ = writeln!(out, "PARTY {} {} {}", p, self.party_votes[p], party.name());
            for (c, name) in party.candidates().iter().enumerate() {
                let _ = writeln!(out, "CAND {} {} {} {}", p, c, self.candidate_for[p][c], name);
            }
        }
        for r in &self.rejected {
            let _ = writeln!(out, "REJECT {} {}", r.position, r.reason.code());
        }
        for d in &self.duplicates {
            let _ = writeln!(out, "DUPLICATE {} {}", d.position, d.first_position);
        }
        out
    }
}

/// Verifies, deduplicates and counts every ballot in the box.
///
/// Invalid ballots are kept in `rejected` with their reason. A valid
/// signature seen before is a duplicate (e.g. a photocopy) and only its
/// first occurrence counts.
pub fn tally(pk: &PublicKey, config: &ElectionConfig, ballots: &BallotBox) -> TallyResult {
    let verdicts: Vec<Result<(VoteSelection, Vec<u8>), VerifyError>> = ballots
        .payloads
        .par_iter()
        .map(|p| {
            let (sel, _) = verify_payload(pk, config, p)?;
            let sig = parse_payload(p, pk).expect("verified payload parses");
            Ok((sel, sig.to_bytes(pk)))
        })
        .collect();

    let mut party_votes = vec![0u64; config.parties().len()];
    let mut candidate_for: Vec<Vec<u64>> = config
        .parties()
        .iter()
        .map(|p| vec![0; p.candidates().len()])
        .collect();
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut duplicates = Vec::new();

    for (position, verdict) in verdicts.into_iter().enumerate() {
        match verdict {
            Err(reason) => rejected.push(Rejected { position, reason }),
            Ok((sel, sig_bytes)) => {
                if let Some(&first_position) = seen.get(&sig_bytes) {
                    duplicates.push(Duplicate {
                        position,
                        first_position,
                    });
                    continue;
                }
                seen.insert(sig_bytes, position);
                let p = sel.party_index as usize;
                party_votes[p] += 1;
                for &c in &sel.approvals {
                    candidate_for[p][c as usize] += 1;
                }
                accepted.push((position, ballots.payloads[position].clone()));
            }
        }
    }

    TallyResult {
        election_id: config.election_id(),
        total: ballots.len(),
        party_votes,
        candidate_for,
        accepted,
        rejected,
        duplicates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditReport {
    pub requests_total: u64,
    pub requests_valid: u64,
    pub ballots_valid: u64,
    pub cheat_flag: bool,
    /// ballots_valid - requests_valid; negative values mean ballots were
    /// requested but never arrived, which the rule cannot attribute.
    pub discrepancy: i64,
}

impl AuditReport {
    pub fn to_report(&self) -> String {
        format!(
            "AUDIT\nREQUESTS_TOTAL {}\nREQUESTS_VALID {}\nBALLOTS_VALID {}\nDISCREPANCY {}\nCHEAT_FLAG {}\n",
            self.requests_total,
            self.requests_valid,
            self.ballots_valid,
            self.discrepancy,
            self.cheat_flag
        )
    }
}

/// Compares authority-signed ballots against voter-signed requests. More
/// valid ballots than distinct valid requesters proves the authority signed
/// ballots nobody asked for.
///
/// Counts only, never identities: the ballots themselves stay anonymous.
// Risk-limiting audits of printed vs. encoded content would hook in here;
// they are not implemented.
pub fn eligibility_audit(
    registry: &Registry,
    requests: &[SigningRequest],
    tally: &TallyResult,
) -> AuditReport {
    let valid_voters: std::collections::HashSet<&VoterId> = requests
        .iter()
        .filter(|r| r.election_id == tally.election_id && verify_request(registry, r).is_ok())
        .map(|r| &r.voter_id)
        .collect();
    let requests_valid = valid_voters.len() as u64;
    let ballots_valid = tally.accepted.len() as u64;
    AuditReport {
        requests_total: requests.len() as u64,
        requests_valid,
        ballots_valid,
        cheat_flag: ballots_valid > requests_valid,
        discrepancy: ballots_valid as i64 - requests_valid as i64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockReason {
    AlreadyRequested,
    UnknownVoter,
    LookupUnavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateVerdict {
    Allow,
    /// Fail-open policy with no lookup available.
    AllowUnverified,
    Block(BlockReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GatePolicy {
    #[default]
    FailClosed,
    FailOpen,
}

/// Polling-station check: anyone who obtained a postal-ballot signature is
/// blocked from voting in person.
pub fn polling_gate(
    registry: &Registry,
    lookup: Option<&dyn RequestLookup>,
    voter_id: &VoterId,
    policy: GatePolicy,
) -> GateVerdict {
    if !registry.contains(voter_id) {
        return GateVerdict::Block(BlockReason::UnknownVoter);
    }
    match lookup {
        None => match policy {
            GatePolicy::FailClosed => GateVerdict::Block(BlockReason::LookupUnavailable),
            GatePolicy::FailOpen => GateVerdict::AllowUnverified,
        },
        Some(l) if l.has_requested(voter_id) => GateVerdict::Block(BlockReason::AlreadyRequested),
        Some(_) => GateVerdict::Allow,
    }
}

/// Appends the TALLY and AUDIT reports plus one BALLOT_DIGEST record per
/// accepted ballot (the same digest printed on the voter's note sheet).
pub fn publish_tally(
    board: &mut BulletinBoard,
    config: &ElectionConfig,
    tally: &TallyResult,
    audit: &AuditReport,
) -> Result<Vec<BoardRecord>, BoardError> {
    let mut written = Vec::with_capacity(tally.accepted.len() + 2);
    for (_, payload) in &tally.accepted {
        written.push(
            board
                .append(RecordKind::BallotDigest, &payload_digest(payload))?
                .clone(),
        );
    }
    written.push(
        board
            .append(RecordKind::Tally, tally.to_report(config).as_bytes())?
            .clone(),
    );
    written.push(
        board
            .append(RecordKind::Audit, audit.to_report().as_bytes())?
            .clone(),
    );
    Ok(written)
}

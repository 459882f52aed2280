//! Vote scripts and pending voter sessions.
//!
//! Script line: `VOTE <voter_id> <party> <approvals>` where approvals is a
//! comma-separated list of candidate indices or `-` for none.
//!
//! Pending line (kept by the voter between request and response):
//! `PENDING <voter_id> <party> <approvals> <nonce hex> <blinding factor hex>`

use blindpost_core::{BlindingFactor, Nonce, PublicKey, VoteSelection, VoterId};
use num_traits::Num;

use crate::fail;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedVote {
    pub voter: VoterId,
    pub selection: VoteSelection,
}

fn parse_approvals(s: &str) -> Result<Vec<u8>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|c| c.parse::<u8>().map_err(|e| format!("candidate {c:?}: {e}")))
        .collect()
}

pub fn format_approvals(sel: &VoteSelection) -> String {
    if sel.approvals.is_empty() {
        "-".into()
    } else {
        sel.approvals
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn parse_head(fields: &[&str], line_no: usize) -> anyhow::Result<ScriptedVote> {
    let err = |m: String| fail("BAD_SCRIPT", format!("line {line_no}: {m}"));
    let voter = VoterId::new(fields[1]).map_err(|e| err(e.to_string()))?;
    let party = fields[2]
        .parse::<u8>()
        .map_err(|e| err(format!("party: {e}")))?;
    let approvals = parse_approvals(fields[3]).map_err(err)?;
    Ok(ScriptedVote {
        voter,
        selection: VoteSelection::new(party, approvals),
    })
}

pub fn parse_script(text: &str) -> anyhow::Result<Vec<ScriptedVote>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "VOTE" {
            return Err(fail(
                "BAD_SCRIPT",
                format!("line {}: expected VOTE <voter_id> <party> <approvals|->", i + 1),
            ));
        }
        out.push(parse_head(&fields, i + 1)?);
    }
    Ok(out)
}

pub struct Pending {
    pub vote: ScriptedVote,
    pub nonce: Nonce,
    pub factor: BlindingFactor,
}

impl Pending {
    pub fn to_line(&self) -> String {
        format!(
            "PENDING {} {} {} {} {:x}",
            self.vote.voter,
            self.vote.selection.party_index,
            format_approvals(&self.vote.selection),
            hex::encode(self.nonce.0),
            self.factor.value()
        )
    }

    pub fn parse_line(line: &str, pk: &PublicKey, line_no: usize) -> anyhow::Result<Self> {
        let err = |m: String| fail("BAD_PENDING", format!("line {line_no}: {m}"));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "PENDING" {
            return Err(err("expected PENDING with 5 fields".into()));
        }
        let vote = parse_head(&fields, line_no)?;
        let mut nonce = [0u8; 8];
        hex::decode_to_slice(fields[4], &mut nonce).map_err(|e| err(format!("nonce: {e}")))?;
        let r = num_bigint::BigUint::from_str_radix(fields[5], 16)
            .map_err(|e| err(format!("blinding factor: {e}")))?;
        let factor = BlindingFactor::new(r, pk).map_err(|e| err(e.to_string()))?;
        Ok(Pending {
            vote,
            nonce: Nonce(nonce),
            factor,
        })
    }
}

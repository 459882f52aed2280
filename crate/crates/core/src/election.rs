//! Election universe: parties, candidates, and the vote selections validated
//! against them.
//!
//! Configs are immutable once built; every constructor path (programmatic or
//! file) runs the same invariant checks.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

/// Upper bound on parties: the party choice is encoded in one byte and
/// 0xFF is kept out of the index range.
pub const MAX_PARTIES: usize = 255;

/// Upper bound on candidates per party, fixed by the 19-byte approval bitmask.
pub const MAX_CANDIDATES: usize = crate::codec::BITMASK_BITS;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("party index {party} out of range ({parties} parties)")]
    PartyOutOfRange { party: u8, parties: usize },
    #[error("candidate {candidate} out of range for party {party} ({candidates} candidates)")]
    CandidateOutOfRange {
        party: u8,
        candidate: u8,
        candidates: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invariant violation at {path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    fn violation(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::InvariantViolation {
            path: path.into(),
            message: message.into(),
        }
    }

    fn parse(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Opaque 8-byte election identifier, written as 16 hex characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElectionId(pub [u8; 8]);

impl ElectionId {
    pub fn as_bytes(&self) -> &[u8; 8] {
        &self.0
    }
}

impl fmt::Display for ElectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for ElectionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(format!("election id must be 16 hex chars, got {}", s.len()));
        }
        let mut out = [0u8; 8];
        hex::decode_to_slice(s, &mut out).map_err(|e| format!("bad election id hex: {e}"))?;
        Ok(ElectionId(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Party {
    index: u8,
    name: String,
    candidates: Vec<String>,
}

impl Party {
    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionConfig {
    election_id: ElectionId,
    title: String,
    parties: Vec<Party>,
    created_at: Option<NaiveDate>,
}

/// Names end up on single lines of the config file, so they must survive a
/// trim and must not contain the comment marker.
fn check_name(path: &str, name: &str) -> Result<(), ConfigError> {
    if name.is_empty() {
        return Err(ConfigError::violation(path, "name must be non-empty"));
    }
    if name.trim() != name {
        return Err(ConfigError::violation(
            path,
            "name must not have leading or trailing whitespace",
        ));
    }
    if name.contains(['#', '\n', '\r']) {
        return Err(ConfigError::violation(
            path,
            "name must not contain '#' or line breaks",
        ));
    }
    Ok(())
}

impl ElectionConfig {
    pub fn new(
        election_id: ElectionId,
        title: impl Into<String>,
        parties: Vec<(String, Vec<String>)>,
        created_at: Option<NaiveDate>,
    ) -> Result<Self, ConfigError> {
        let title = title.into();
        check_name("title", &title)?;
        if parties.is_empty() || parties.len() > MAX_PARTIES {
            return Err(ConfigError::violation(
                "parties",
                format!(
                    "party count must be in 1..={MAX_PARTIES}, got {}",
                    parties.len()
                ),
            ));
        }
        let mut built = Vec::with_capacity(parties.len());
        for (i, (name, candidates)) in parties.into_iter().enumerate() {
            check_name(&format!("parties[{i}].name"), &name)?;
            if candidates.is_empty() || candidates.len() > MAX_CANDIDATES {
                return Err(ConfigError::violation(
                    format!("parties[{i}].candidates"),
                    format!(
                        "candidate count must be in 1..={MAX_CANDIDATES}, got {}",
                        candidates.len()
                    ),
                ));
            }
            for (j, c) in candidates.iter().enumerate() {
                check_name(&format!("parties[{i}].candidates[{j}]"), c)?;
            }
            built.push(Party {
                index: i as u8,
                name,
                candidates,
            });
        }
        Ok(ElectionConfig {
            election_id,
            title,
            parties: built,
            created_at,
        })
    }

    pub fn election_id(&self) -> ElectionId {
        self.election_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, index: u8) -> Option<&Party> {
        self.parties.get(index as usize)
    }

    pub fn created_at(&self) -> Option<NaiveDate> {
        self.created_at
    }

    /// Parses the line-oriented config format:
    ///
    /// ```text
    /// ELECTION 0011223344556677 Federal election 2029
    /// CREATED 2029-03-01          # optional
    /// PARTY Green
    /// CAND Alice
    /// CAND Bob
    /// ```
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut header: Option<(ElectionId, String)> = None;
        let mut created_at = None;
        let mut parties: Vec<(String, Vec<String>)> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (keyword, rest) = match line.split_once(char::is_whitespace) {
                Some((k, r)) => (k, r.trim()),
                None => (line, ""),
            };
            if header.is_none() && keyword != "ELECTION" {
                return Err(ConfigError::parse(line_no, "first directive must be ELECTION"));
            }
            match keyword {
                "ELECTION" => {
                    if header.is_some() {
                        return Err(ConfigError::parse(line_no, "duplicate ELECTION line"));
                    }
                    let (id, title) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| ConfigError::parse(line_no, "expected ELECTION <id> <title>"))?;
                    let id = id
                        .parse::<ElectionId>()
                        .map_err(|e| ConfigError::parse(line_no, e))?;
                    header = Some((id, title.trim().to_string()));
                }
                "CREATED" => {
                    if created_at.is_some() {
                        return Err(ConfigError::parse(line_no, "duplicate CREATED line"));
                    }
                    let date = NaiveDate::parse_from_str(rest, "%Y-%m-%d")
                        .map_err(|e| ConfigError::parse(line_no, format!("bad CREATED date: {e}")))?;
                    created_at = Some(date);
                }
                "PARTY" => parties.push((rest.to_string(), Vec::new())),
                "CAND" => match parties.last_mut() {
                    Some((_, cands)) => cands.push(rest.to_string()),
                    None => return Err(ConfigError::parse(line_no, "CAND before any PARTY")),
                },
                other => {
                    return Err(ConfigError::parse(line_no, format!("unknown directive {other:?}")))
                }
            }
        }

        let (id, title) = header.ok_or_else(|| ConfigError::parse(1, "missing ELECTION line"))?;
        ElectionConfig::new(id, title, parties, created_at)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = format!("ELECTION {} {}\n", self.election_id, self.title);
        if let Some(date) = self.created_at {
            out.push_str(&format!("CREATED {}\n", date.format("%Y-%m-%d")));
        }
        for party in &self.parties {
            out.push_str(&format!("PARTY {}\n", party.name));
            for c in &party.candidates {
                out.push_str(&format!("CAND {c}\n"));
            }
        }
        out
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ElectionConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    ElectionConfig::parse(&text)
}

pub fn save_config(config: &ElectionConfig, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    std::fs::write(path, config.to_config_string())?;
    Ok(())
}

/// A voter's choice: one party plus the set of that party's candidates voted
/// FOR. Every candidate not in `approvals` is AGAINST; an empty set is a
/// valid party-only vote.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoteSelection {
    pub party_index: u8,
    pub approvals: BTreeSet<u8>,
}

impl VoteSelection {
    pub fn new(party_index: u8, approvals: impl IntoIterator<Item = u8>) -> Self {
        VoteSelection {
            party_index,
            approvals: approvals.into_iter().collect(),
        }
    }
}

pub fn validate_selection(
    config: &ElectionConfig,
    sel: &VoteSelection,
) -> Result<(), SelectionError> {
    let party = config
        .party(sel.party_index)
        .ok_or(SelectionError::PartyOutOfRange {
            party: sel.party_index,
            parties: config.parties.len(),
        })?;
    let candidates = party.candidates.len();
    if let Some(&bad) = sel.approvals.iter().find(|&&c| c as usize >= candidates) {
        return Err(SelectionError::CandidateOutOfRange {
            party: sel.party_index,
            candidate: bad,
            candidates,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_three() -> ElectionConfig {
        ElectionConfig::new(
            ElectionId([1, 2, 3, 4, 5, 6, 7, 8]),
            "Test",
            vec![
                ("Red".into(), vec!["a".into(), "b".into(), "c".into()]),
                ("Blue".into(), vec!["d".into(), "e".into(), "f".into()]),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn selection_within_range() {
        let cfg = two_by_three();
        assert_eq!(validate_selection(&cfg, &VoteSelection::new(0, [0, 2])), Ok(()));
    }

    #[test]
    fn selection_party_out_of_range() {
        let cfg = two_by_three();
        assert!(matches!(
            validate_selection(&cfg, &VoteSelection::new(5, [])),
            Err(SelectionError::PartyOutOfRange { party: 5, .. })
        ));
    }

    #[test]
    fn selection_candidate_out_of_range() {
        let cfg = two_by_three();
        assert!(matches!(
            validate_selection(&cfg, &VoteSelection::new(1, [3])),
            Err(SelectionError::CandidateOutOfRange { candidate: 3, .. })
        ));
    }

    #[test]
    fn empty_approvals_are_valid() {
        let cfg = two_by_three();
        assert!(validate_selection(&cfg, &VoteSelection::new(1, [])).is_ok());
    }

    #[test]
    fn parses_well_formed_file() {
        let text = "# fixture\nELECTION 0102030405060708 Spring vote\n\nPARTY Red  # left\nCAND a\nCAND b\nPARTY Blue\nCAND c\n";
        let cfg = ElectionConfig::parse(text).unwrap();
        assert_eq!(cfg.parties().len(), 2);
        assert_eq!(cfg.title(), "Spring vote");
        assert_eq!(cfg.parties()[0].name(), "Red");
        assert_eq!(cfg.parties()[1].candidates(), ["c".to_string()]);
    }

    fn config_text(parties: usize, cands: usize) -> String {
        let mut s = String::from("ELECTION 0000000000000001 Big\n");
        for p in 0..parties {
            s.push_str(&format!("PARTY P{p}\n"));
            for c in 0..cands {
                s.push_str(&format!("CAND C{c}\n"));
            }
        }
        s
    }

    #[test]
    fn rejects_256_parties() {
        let err = ElectionConfig::parse(&config_text(256, 1)).unwrap_err();
        assert!(
            matches!(err, ConfigError::InvariantViolation { ref path, .. } if path == "parties"),
            "{err}"
        );
        assert!(ElectionConfig::parse(&config_text(255, 1)).is_ok());
    }

    #[test]
    fn rejects_153_candidates() {
        // 19 bitmask bytes hold 152 approval bits.
        assert_eq!(MAX_CANDIDATES, 19 * 8);
        let err = ElectionConfig::parse(&config_text(1, 153)).unwrap_err();
        assert!(
            matches!(err, ConfigError::InvariantViolation { ref path, .. } if path == "parties[0].candidates"),
            "{err}"
        );
        assert!(ElectionConfig::parse(&config_text(1, 152)).is_ok());
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = ElectionConfig::parse("ELECTION 00 x\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
        let err = ElectionConfig::parse("ELECTION 0000000000000001 t\nCAND x\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
        let err = ElectionConfig::parse("PARTY x\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
        let err = ElectionConfig::parse("ELECTION 0000000000000001 t\nPARTY Empty\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvariantViolation { .. }));
    }

    #[test]
    fn created_date_round_trips() {
        let text = "ELECTION 0000000000000001 t\nCREATED 2029-03-01\nPARTY x\nCAND y\n";
        let cfg = ElectionConfig::parse(text).unwrap();
        assert_eq!(cfg.created_at(), NaiveDate::from_ymd_opt(2029, 3, 1));
        assert_eq!(cfg.to_config_string(), text);
        assert!(ElectionConfig::parse("ELECTION 0000000000000001 t\nCREATED 2029-13-01\nPARTY x\nCAND y\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("election.cfg");
        let cfg = two_by_three();
        save_config(&cfg, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);
    }

    /// Brute force: for small configs, the accepted selections are exactly
    /// (party in range) x (subset of that party's candidates).
    #[test]
    fn validate_matches_enumeration() {
        for parties in 1..=3usize {
            for cands in 1..=4usize {
                let cfg = ElectionConfig::new(
                    ElectionId([0; 8]),
                    "t",
                    (0..parties)
                        .map(|p| (format!("P{p}"), (0..cands).map(|c| format!("C{c}")).collect()))
                        .collect(),
                    None,
                )
                .unwrap();
                // Probe one party and one candidate bit beyond the valid range.
                let mut accepted = 0;
                for party in 0..=parties as u8 {
                    for mask in 0u32..(1 << (cands + 1)) {
                        let sel = VoteSelection::new(
                            party,
                            (0..=cands as u8).filter(|b| mask & (1 << b) != 0),
                        );
                        let expected = (party as usize) < parties && mask < (1 << cands);
                        assert_eq!(validate_selection(&cfg, &sel).is_ok(), expected);
                        accepted += expected as usize;
                    }
                }
                assert_eq!(accepted, parties << cands);
            }
        }
    }

    fn name() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9 .-]{0,10}[A-Za-z0-9]"
    }

    proptest! {
        #[test]
        fn save_load_is_identity(
            id in any::<[u8; 8]>(),
            title in name(),
            parties in prop::collection::vec((name(), prop::collection::vec(name(), 1..6)), 1..5),
            day in proptest::option::of(0u32..3000),
        ) {
            let created = day.map(|d| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(d as u64));
            let cfg = ElectionConfig::new(ElectionId(id), title, parties, created).unwrap();
            let back = ElectionConfig::parse(&cfg.to_config_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}

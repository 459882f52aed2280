//! Model of the token-based postal design: a per-voter 128-bit token `k`,
//! a selection sheet per party, a code sheet of short FOR/AGAINST codes, and
//! a note sheet the voter fills by copying codes.
//!
//! The server can check that a `k` was issued but not that it is used once.
//! Malware on the voters' devices can therefore print one valid `k` on many
//! ballots, and the tally has no choice but to throw all of them away.
//! [`attack_k_reuse`] reproduces that and, optionally, runs the same voters
//! through the blind-signature pipeline for comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::board::{BoardError, BulletinBoard, RecordKind};
use crate::election::{ElectionConfig, ElectionId, VoteSelection};
use crate::identity::VoterId;
use crate::simulation::{random_selection, run_election, voter_id, SimError, SimParams};
use crate::voter::Stance;

pub const TOKEN_LEN: usize = 16;
pub const SHORT_CODE_LEN: usize = 4;
pub const SHORT_CODE_ALPHABET: &[u8; 32] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";

#[derive(Debug, thiserror::Error)]
pub enum LegacyError {
    #[error("voter {0} is not eligible")]
    NotEligible(VoterId),
    #[error("sheets were already issued to voter {0}")]
    AlreadyIssued(VoterId),
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("blind-signature comparison: {0}")]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenK(pub [u8; TOKEN_LEN]);

impl TokenK {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; TOKEN_LEN];
        rng.fill_bytes(&mut k);
        TokenK(k)
    }
}

impl fmt::Display for TokenK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShortCode([u8; SHORT_CODE_LEN]);

impl ShortCode {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut c = [0u8; SHORT_CODE_LEN];
        for b in &mut c {
            *b = SHORT_CODE_ALPHABET[rng.gen_range(0..SHORT_CODE_ALPHABET.len())];
        }
        ShortCode(c)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let bytes: [u8; SHORT_CODE_LEN] = s.as_bytes().try_into().ok()?;
        bytes
            .iter()
            .all(|b| SHORT_CODE_ALPHABET.contains(b))
            .then_some(ShortCode(bytes))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("alphabet is ASCII")
    }
}

impl fmt::Display for ShortCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per party, per candidate: (FOR code, AGAINST code). All codes distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSheet {
    pub k: TokenK,
    pub codes: Vec<Vec<(ShortCode, ShortCode)>>,
}

impl CodeSheet {
    fn generate<R: Rng + ?Sized>(k: TokenK, config: &ElectionConfig, rng: &mut R) -> Self {
        let mut used = HashSet::new();
        let mut fresh = |rng: &mut R| loop {
            let c = ShortCode::random(rng);
            if used.insert(c) {
                return c;
            }
        };
        let codes = config
            .parties()
            .iter()
            .map(|p| {
                p.candidates()
                    .iter()
                    .map(|_| (fresh(rng), fresh(rng)))
                    .collect()
            })
            .collect();
        CodeSheet { k, codes }
    }

    pub fn code(&self, party: u8, candidate: usize, stance: Stance) -> ShortCode {
        let (f, a) = self.codes[party as usize][candidate];
        match stance {
            Stance::For => f,
            Stance::Against => a,
        }
    }

    pub fn lookup(&self, code: ShortCode) -> Option<(u8, usize, Stance)> {
        self.codes.iter().enumerate().find_map(|(p, cands)| {
            cands.iter().enumerate().find_map(|(c, &(f, a))| {
                if code == f {
                    Some((p as u8, c, Stance::For))
                } else if code == a {
                    Some((p as u8, c, Stance::Against))
                } else {
                    None
                }
            })
        })
    }

    pub fn all_codes(&self) -> impl Iterator<Item = ShortCode> + '_ {
        self.codes.iter().flatten().flat_map(|&(f, a)| [f, a])
    }

    /// Codes the voter should copy for a cast: one per candidate of the
    /// chosen party, in candidate order.
    pub fn codes_for(&self, party: u8, stances: &[Stance]) -> Vec<ShortCode> {
        stances
            .iter()
            .enumerate()
            .map(|(c, &s)| self.code(party, c, s))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSheet {
    pub k: TokenK,
    pub party_index: u8,
    pub party_name: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteTemplate {
    pub k: TokenK,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SheetSet {
    pub selection_sheets: Vec<SelectionSheet>,
    pub code_sheet: CodeSheet,
    pub note: NoteTemplate,
}

impl SheetSet {
    pub fn k(&self) -> TokenK {
        self.code_sheet.k
    }
}

/// What arrives by post: the selection sheet of one party, marked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacyCast {
    pub k: TokenK,
    pub party_index: u8,
    pub stances: Vec<Stance>,
}

impl LegacyCast {
    pub fn from_selection(k: TokenK, sel: &VoteSelection, config: &ElectionConfig) -> Option<Self> {
        let party = config.party(sel.party_index)?;
        let stances = (0..party.candidates().len())
            .map(|c| {
                if sel.approvals.contains(&(c as u8)) {
                    Stance::For
                } else {
                    Stance::Against
                }
            })
            .collect();
        Some(LegacyCast {
            k,
            party_index: sel.party_index,
            stances,
        })
    }
}

/// The voter's handwritten copy of the codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledNote {
    pub codes: Vec<ShortCode>,
}

/// Copies the cast's codes, each miscopied with probability `copy_error`
/// (one character replaced by a different symbol).
pub fn fill_note<R: Rng + ?Sized>(
    sheet: &CodeSheet,
    cast: &LegacyCast,
    copy_error: f64,
    rng: &mut R,
) -> FilledNote {
    let codes = sheet
        .codes_for(cast.party_index, &cast.stances)
        .into_iter()
        .map(|mut c| {
            if copy_error > 0.0 && rng.gen_bool(copy_error) {
                let pos = rng.gen_range(0..SHORT_CODE_LEN);
                let old = c.0[pos];
                while c.0[pos] == old {
                    c.0[pos] = SHORT_CODE_ALPHABET[rng.gen_range(0..SHORT_CODE_ALPHABET.len())];
                }
            }
            c
        })
        .collect();
    FilledNote { codes }
}

/// The ballot-preparation server.
#[derive(Debug, Clone)]
pub struct LegacyServer {
    config: ElectionConfig,
    eligible: BTreeSet<VoterId>,
    issued_to: BTreeMap<VoterId, TokenK>,
    code_tables: HashMap<TokenK, CodeSheet>,
}

impl LegacyServer {
    pub fn new(config: ElectionConfig, eligible: impl IntoIterator<Item = VoterId>) -> Self {
        LegacyServer {
            config,
            eligible: eligible.into_iter().collect(),
            issued_to: BTreeMap::new(),
            code_tables: HashMap::new(),
        }
    }

    pub fn config(&self) -> &ElectionConfig {
        &self.config
    }

    pub fn issued_count(&self) -> usize {
        self.issued_to.len()
    }

    pub fn issue_sheets<R: RngCore + CryptoRng>(
        &mut self,
        voter_id: &VoterId,
        rng: &mut R,
    ) -> Result<SheetSet, LegacyError> {
        if !self.eligible.contains(voter_id) {
            return Err(LegacyError::NotEligible(voter_id.clone()));
        }
        if self.issued_to.contains_key(voter_id) {
            return Err(LegacyError::AlreadyIssued(voter_id.clone()));
        }
        let k = loop {
            let k = TokenK::random(rng);
            if !self.code_tables.contains_key(&k) {
                break k;
            }
        };
        let code_sheet = CodeSheet::generate(k, &self.config, rng);
        self.issued_to.insert(voter_id.clone(), k);
        self.code_tables.insert(k, code_sheet.clone());
        let selection_sheets = self
            .config
            .parties()
            .iter()
            .map(|p| SelectionSheet {
                k,
                party_index: p.index(),
                party_name: p.name().to_string(),
                candidates: p.candidates().to_vec(),
            })
            .collect();
        Ok(SheetSet {
            selection_sheets,
            code_sheet,
            note: NoteTemplate { k },
        })
    }

    /// Membership in the issued set. Says nothing about how many ballots
    /// carry the same `k`.
    pub fn check_k_valid(&self, k: &TokenK) -> bool {
        self.code_tables.contains_key(k)
    }

    /// Counts casts whose `k` was issued and appears exactly once; every
    /// cast sharing a `k` with another is invalidated. For each counted cast
    /// the codes of its marks are prepared for publication.
    pub fn legacy_tally(&self, casts: &[LegacyCast]) -> LegacyTally {
        let mut uses: HashMap<TokenK, usize> = HashMap::new();
        for c in casts {
            *uses.entry(c.k).or_default() += 1;
        }
        let mut out = LegacyTally {
            party_votes: vec![0; self.config.parties().len()],
            candidate_for: self
                .config
                .parties()
                .iter()
                .map(|p| vec![0; p.candidates().len()])
                .collect(),
            counted: Vec::new(),
            invalidated: Vec::new(),
            unknown_k: Vec::new(),
            malformed: Vec::new(),
            publications: Vec::new(),
        };
        for (i, cast) in casts.iter().enumerate() {
            let Some(sheet) = self.code_tables.get(&cast.k) else {
                out.unknown_k.push(i);
                continue;
            };
            if uses[&cast.k] > 1 {
                out.invalidated.push(i);
                continue;
            }
            let well_formed = self
                .config
                .party(cast.party_index)
                .is_some_and(|p| p.candidates().len() == cast.stances.len());
            if !well_formed {
                out.malformed.push(i);
                continue;
            }
            let p = cast.party_index as usize;
            out.party_votes[p] += 1;
            for (c, s) in cast.stances.iter().enumerate() {
                if *s == Stance::For {
                    out.candidate_for[p][c] += 1;
                }
            }
            out.counted.push(i);
            out.publications
                .push(sheet.codes_for(cast.party_index, &cast.stances));
        }
        out
    }

    fn code_sheet(&self, k: &TokenK) -> Option<&CodeSheet> {
        self.code_tables.get(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacyTally {
    pub party_votes: Vec<u64>,
    pub candidate_for: Vec<Vec<u64>>,
    /// Indices into the cast list.
    pub counted: Vec<usize>,
    pub invalidated: Vec<usize>,
    pub unknown_k: Vec<usize>,
    pub malformed: Vec<usize>,
    /// Codes of each counted cast, parallel to `counted`.
    pub publications: Vec<Vec<ShortCode>>,
}

fn codes_line(codes: &[ShortCode]) -> String {
    codes.iter().map(ShortCode::as_str).collect::<Vec<_>>().join(" ")
}

/// One CODE_PUBLISH record per counted cast.
pub fn publish_codes(board: &mut BulletinBoard, tally: &LegacyTally) -> Result<usize, BoardError> {
    for codes in &tally.publications {
        board.append(RecordKind::CodePublish, codes_line(codes).as_bytes())?;
    }
    Ok(tally.publications.len())
}

/// Anyone holding a voter's code sheet can find that voter's published codes
/// and read off the vote: the code sheet works as a receipt.
pub fn reconstruct_vote(sheet: &CodeSheet, board: &BulletinBoard) -> Option<(u8, Vec<Stance>)> {
    board.of_kind(RecordKind::CodePublish).find_map(|rec| {
        let text = std::str::from_utf8(&rec.payload).ok()?;
        let codes: Vec<ShortCode> = text
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(ShortCode::parse)
            .collect::<Option<_>>()?;
        let first = sheet.lookup(*codes.first()?)?.0;
        if codes.len() != sheet.codes[first as usize].len() {
            return None;
        }
        codes
            .iter()
            .enumerate()
            .map(|(c, &code)| match sheet.lookup(code)? {
                (p, cand, s) if p == first && cand == c => Some(s),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|stances| (first, stances))
    })
}

/// Scenario file:
///
/// ```text
/// HONEST 950
/// COMPROMISED 50
/// SEED 7
/// COPY_ERROR 0.01
/// PARTIES 3 4
/// BLIND_BITS 1024
/// ```
///
/// `PARTIES <p> <c>` builds p parties of c candidates. `BLIND_BITS` enables
/// the blind-signature comparison run with a key of that size.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub honest: usize,
    pub compromised: usize,
    pub seed: u64,
    pub copy_error: f64,
    pub parties: u8,
    pub candidates: u8,
    pub blind_bits: Option<u64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            honest: 0,
            compromised: 0,
            seed: 0,
            copy_error: 0.0,
            parties: 3,
            candidates: 4,
            blind_bits: None,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, LegacyError> {
        let mut s = Scenario::default();
        let mut seen_honest = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| LegacyError::Scenario { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let num = |idx: usize| -> Result<u64, LegacyError> {
                fields
                    .get(idx)
                    .ok_or_else(|| err(format!("{} needs a value", fields[0])))?
                    .parse()
                    .map_err(|e| err(format!("{}: {e}", fields[0])))
            };
            let expect = |n: usize| {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{} takes {} value(s)", fields[0], n - 1)))
                }
            };
            match fields[0] {
                "HONEST" => {
                    expect(2)?;
                    s.honest = num(1)? as usize;
                    seen_honest = true;
                }
                "COMPROMISED" => {
                    expect(2)?;
                    s.compromised = num(1)? as usize;
                }
                "SEED" => {
                    expect(2)?;
                    s.seed = num(1)?;
                }
                "COPY_ERROR" => {
                    expect(2)?;
                    let p: f64 = fields[1]
                        .parse()
                        .map_err(|e| err(format!("COPY_ERROR: {e}")))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(err("COPY_ERROR must be within [0, 1]".into()));
                    }
                    s.copy_error = p;
                }
                "PARTIES" => {
                    expect(3)?;
                    let (p, c) = (num(1)?, num(2)?);
                    if !(1..=255).contains(&p) || c > 152 {
                        return Err(err("PARTIES needs 1..=255 parties and at most 152 candidates".into()));
                    }
                    s.parties = p as u8;
                    s.candidates = c as u8;
                }
                "BLIND_BITS" => {
                    expect(2)?;
                    s.blind_bits = Some(num(1)?);
                }
                other => return Err(err(format!("unknown directive {other}"))),
            }
        }
        if !seen_honest {
            return Err(LegacyError::Scenario {
                line: 0,
                message: "missing HONEST directive".into(),
            });
        }
        if s.compromised == 1 {
            return Err(LegacyError::Scenario {
                line: 0,
                message: "COMPROMISED must be 0 or at least 2".into(),
            });
        }
        Ok(s)
    }

    pub fn config(&self) -> ElectionConfig {
        let parties = (0..self.parties)
            .map(|p| {
                (
                    format!("Party{p}"),
                    (0..self.candidates).map(|c| format!("P{p}C{c}")).collect(),
                )
            })
            .collect();
        ElectionConfig::new(ElectionId(*b"LEGACY01"), "Legacy scenario", parties, None)
            .expect("generated config is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindComparison {
    pub counted: usize,
    pub invalidated: usize,
    pub party_votes: Vec<u64>,
    pub cheat_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub voters: usize,
    pub tally: LegacyTally,
    /// Voter indices whose ballot was invalidated.
    pub disenfranchised: Vec<usize>,
    pub compromised_passed_k_check: usize,
    pub receipts_reconstructed: usize,
    pub receipts_checked: usize,
    pub note_mismatches: usize,
    pub blind: Option<BlindComparison>,
}

impl ScenarioReport {
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let t = &self.tally;
        let mut out = String::new();
        let _ = writeln!(out, "LEGACY_SIM");
        let _ = writeln!(out, "HONEST {}", s.honest);
        let _ = writeln!(out, "COMPROMISED {}", s.compromised);
        let _ = writeln!(out, "SEED {}", s.seed);
        let _ = writeln!(out, "SECTION counted");
        let _ = writeln!(out, "COUNTED {}", t.counted.len());
        for (p, v) in t.party_votes.iter().enumerate() {
            let _ = writeln!(out, "PARTY {p} {v}");
        }
        let _ = writeln!(out, "SECTION invalidated");
        let _ = writeln!(out, "INVALIDATED {}", t.invalidated.len());
        let _ = writeln!(out, "UNKNOWN_K {}", t.unknown_k.len());
        let _ = writeln!(
            out,
            "K_CHECK_PASSED {}/{}",
            self.compromised_passed_k_check, s.compromised
        );
        for v in &self.disenfranchised {
            let _ = writeln!(out, "DISENFRANCHISED {}", voter_id(*v));
        }
        let _ = writeln!(out, "SECTION receipt");
        let _ = writeln!(
            out,
            "RECONSTRUCTED {}/{}",
            self.receipts_reconstructed, self.receipts_checked
        );
        let _ = writeln!(out, "NOTE_MISMATCH {}", self.note_mismatches);
        if let Some(b) = &self.blind {
            let _ = writeln!(out, "SECTION blind-signature");
            let _ = writeln!(out, "COUNTED {}", b.counted);
            let _ = writeln!(out, "INVALIDATED {}", b.invalidated);
            for (p, v) in b.party_votes.iter().enumerate() {
                let _ = writeln!(out, "PARTY {p} {v}");
            }
            let _ = writeln!(out, "CHEAT_FLAG {}", b.cheat_flag);
        }
        out
    }
}

/// Voters `0..honest` are honest; the next `compromised` voters run devices
/// that print the first compromised voter's `k` on their ballots.
pub fn attack_k_reuse(scenario: &Scenario) -> Result<ScenarioReport, LegacyError> {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let config = scenario.config();
    let n = scenario.honest + scenario.compromised;
    let ids: Vec<VoterId> = (0..n).map(voter_id).collect();
    let selections: Vec<VoteSelection> = (0..n).map(|_| random_selection(&config, &mut rng)).collect();

    let mut server = LegacyServer::new(config.clone(), ids.iter().cloned());
    let sheets: Vec<SheetSet> = ids
        .iter()
        .map(|id| server.issue_sheets(id, &mut rng))
        .collect::<Result<_, _>>()?;

    let shared = sheets.get(scenario.honest).map(|s| s.k());
    let casts: Vec<LegacyCast> = selections
        .iter()
        .enumerate()
        .map(|(v, sel)| {
            let k = if v >= scenario.honest {
                shared.expect("compromised voters exist")
            } else {
                sheets[v].k()
            };
            LegacyCast::from_selection(k, sel, &config).expect("selection from config")
        })
        .collect();

    let compromised_passed_k_check = casts[scenario.honest..]
        .iter()
        .filter(|c| server.check_k_valid(&c.k))
        .count();

    let tally = server.legacy_tally(&casts);
    let mut board = BulletinBoard::in_memory();
    publish_codes(&mut board, &tally)?;

    // The voter copies codes from the sheet their device printed.
    let printed_sheet = |v: usize| -> &CodeSheet {
        server
            .code_sheet(&casts[v].k)
            .expect("cast k was issued")
    };
    let mut note_mismatches = 0;
    let mut receipts_reconstructed = 0;
    for (&v, published) in tally.counted.iter().zip(&tally.publications) {
        let note = fill_note(printed_sheet(v), &casts[v], scenario.copy_error, &mut rng);
        if &note.codes != published {
            note_mismatches += 1;
        }
        let expected = (casts[v].party_index, casts[v].stances.clone());
        if reconstruct_vote(&sheets[v].code_sheet, &board) == Some(expected) {
            receipts_reconstructed += 1;
        }
    }

    let blind = match scenario.blind_bits {
        None => None,
        Some(bits) => {
            let mut params = SimParams::honest(config.clone(), n, bits);
            params.selections = Some(selections.clone());
            let out = run_election(&params, &mut rng)?;
            Some(BlindComparison {
                counted: out.tally.accepted_count(),
                invalidated: out.tally.rejected.len() + out.tally.duplicates.len(),
                party_votes: out.tally.party_votes.clone(),
                cheat_flag: out.audit.cheat_flag,
            })
        }
    };

    Ok(ScenarioReport {
        scenario: scenario.clone(),
        voters: n,
        disenfranchised: tally.invalidated.clone(),
        compromised_passed_k_check,
        receipts_checked: tally.counted.len(),
        receipts_reconstructed,
        note_mismatches,
        tally,
        blind,
    })
}

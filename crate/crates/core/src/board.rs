//! Hash-chained, append-only bulletin board shared by every role.
//!
//! File format, one record per line:
//!
//! ```text
//! seq|KIND|payload_base64|chain_hex
//! ```
//!
//! `chain = SHA-256(prev_chain || seq as u64 BE || KIND || '|' || payload)`
//! with 32 zero bytes as the genesis `prev_chain`. Readers stop at the last
//! newline, so a line still being written is invisible to them.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use sha2::{Digest, Sha256};

pub const GENESIS: [u8; 32] = [0u8; 32];

#[derive(Debug, thiserror::Error)]
pub enum BoardError {
    #[error("board chain broken at seq {seq}")]
    ChainBroken { seq: u64 },
    #[error("board i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Request,
    BallotDigest,
    Tally,
    Audit,
    CodePublish,
    Meta,
}

impl RecordKind {
    pub const ALL: [RecordKind; 6] = [
        RecordKind::Request,
        RecordKind::BallotDigest,
        RecordKind::Tally,
        RecordKind::Audit,
        RecordKind::CodePublish,
        RecordKind::Meta,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Request => "REQUEST",
            RecordKind::BallotDigest => "BALLOT_DIGEST",
            RecordKind::Tally => "TALLY",
            RecordKind::Audit => "AUDIT",
            RecordKind::CodePublish => "CODE_PUBLISH",
            RecordKind::Meta => "META",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecordKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardRecord {
    pub seq: u64,
    pub kind: RecordKind,
    pub payload: Vec<u8>,
    pub chain: [u8; 32],
}

pub fn chain_digest(prev: &[u8; 32], seq: u64, kind: RecordKind, payload: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(prev);
    h.update(seq.to_be_bytes());
    h.update(kind.as_str().as_bytes());
    h.update(b"|");
    h.update(payload);
    h.finalize().into()
}

impl BoardRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.seq,
            self.kind,
            STANDARD.encode(&self.payload),
            hex::encode(self.chain)
        )
    }

    /// Syntactic parse only; chain checking is done by the caller.
    pub fn parse_line(line: &str) -> Option<Self> {
        let mut parts = line.split('|');
        let seq = parts.next()?;
        let kind = parts.next()?.parse().ok()?;
        let payload = STANDARD.decode(parts.next()?).ok()?;
        let chain_hex = parts.next()?;
        if parts.next().is_some() || seq.is_empty() || !seq.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut chain = [0u8; 32];
        hex::decode_to_slice(chain_hex, &mut chain).ok()?;
        Some(BoardRecord {
            seq: seq.parse().ok()?,
            kind,
            payload,
            chain,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoardVerdict {
    Ok { records: u64 },
    Broken { seq: u64 },
}

/// Complete lines only; a trailing fragment without a newline is reported
/// separately and never parsed.
fn complete_lines(text: &str) -> (Vec<&str>, bool) {
    let mut lines: Vec<&str> = text.split('\n').collect();
    let tail = lines.pop().unwrap_or_default();
    (lines, !tail.is_empty())
}

fn replay(text: &str) -> (Vec<BoardRecord>, Option<u64>, bool) {
    let (lines, partial) = complete_lines(text);
    let mut records = Vec::new();
    let mut prev = GENESIS;
    for (i, line) in lines.into_iter().enumerate() {
        let seq = i as u64;
        match BoardRecord::parse_line(line) {
            Some(r) if r.seq == seq && r.chain == chain_digest(&prev, seq, r.kind, &r.payload) => {
                prev = r.chain;
                records.push(r);
            }
            _ => return (records, Some(seq), partial),
        }
    }
    (records, None, partial)
}

/// Recomputes the whole chain and reports the first bad sequence number.
pub fn verify_text(text: &str) -> BoardVerdict {
    match replay(text) {
        (_, Some(seq), _) => BoardVerdict::Broken { seq },
        (records, None, _) => BoardVerdict::Ok {
            records: records.len() as u64,
        },
    }
}

pub fn board_verify(path: impl AsRef<Path>) -> Result<BoardVerdict, BoardError> {
    let text = match std::fs::read_to_string(path.as_ref()) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    Ok(verify_text(&text))
}

/// Opens (or creates) the board at `path`, appends one record, and returns it.
pub fn board_append(
    path: impl AsRef<Path>,
    kind: RecordKind,
    payload: &[u8],
) -> Result<BoardRecord, BoardError> {
    let mut board = BulletinBoard::open(path)?;
    Ok(board.append(kind, payload)?.clone())
}

/// In-memory board, optionally backed by a file. A file-backed board holds
/// an exclusive lock on the file for its whole lifetime, making it the
/// single writer.
#[derive(Debug, Default)]
pub struct BulletinBoard {
    records: Vec<BoardRecord>,
    file: Option<(PathBuf, File)>,
}

impl BulletinBoard {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, BoardError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        file.lock()?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let (records, broken, partial) = replay(&text);
        if let Some(seq) = broken {
            return Err(BoardError::ChainBroken { seq });
        }
        if partial {
            return Err(BoardError::ChainBroken {
                seq: records.len() as u64,
            });
        }
        Ok(BulletinBoard {
            records,
            file: Some((path, file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn records(&self) -> &[BoardRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn head(&self) -> [u8; 32] {
        self.records.last().map_or(GENESIS, |r| r.chain)
    }

    pub fn append(&mut self, kind: RecordKind, payload: &[u8]) -> Result<&BoardRecord, BoardError> {
        let seq = self.records.len() as u64;
        let record = BoardRecord {
            seq,
            kind,
            payload: payload.to_vec(),
            chain: chain_digest(&self.head(), seq, kind, payload),
        };
        if let Some((_, file)) = &mut self.file {
            let mut line = record.to_line();
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn find<'a>(&'a self, kind: RecordKind, payload: &'a [u8]) -> impl Iterator<Item = &'a BoardRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.kind == kind && r.payload == payload)
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &BoardRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| r.to_line() + "\n")
            .collect()
    }

    pub fn verify(&self) -> BoardVerdict {
        verify_text(&self.to_text())
    }
}

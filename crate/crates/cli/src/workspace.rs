//! Election directory layout and loaders.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use blindpost_core::election::load_config;
use blindpost_core::identity::VoterCredential;
use blindpost_core::{
    Authority, BlindKeyPair, ElectionConfig, PublicKey, Registry, SigningRequest, VoterId,
};

use crate::fail;

pub const CONFIG: &str = "election.cfg";
pub const PUBLIC_KEY: &str = "authority.pub";
pub const PRIVATE_KEY: &str = "authority.key";
pub const REGISTRY: &str = "registry.txt";
pub const CREDENTIALS: &str = "credentials.txt";
pub const AUTHORITY_LOG: &str = "authority.log";
pub const REQUESTS: &str = "requests.txt";
pub const RESPONSES: &str = "responses.txt";
pub const PENDING: &str = "pending.txt";
pub const BALLOTS: &str = "ballots.txt";
pub const PRINTED: &str = "printed";
pub const BOARD: &str = "board.txt";

pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn read(&self, name: &str) -> anyhow::Result<String> {
        read_file(&self.path(name))
    }

    pub fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn append(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&p)
            .with_context(|| format!("opening {}", p.display()))?;
        f.write_all(text.as_bytes())
            .with_context(|| format!("writing {}", p.display()))
    }

    pub fn config(&self) -> anyhow::Result<ElectionConfig> {
        load_config(self.path(CONFIG)).map_err(|e| fail("BAD_CONFIG", e))
    }

    pub fn public_key(&self) -> anyhow::Result<PublicKey> {
        PublicKey::parse(&self.read(PUBLIC_KEY)?).map_err(|e| fail("BAD_KEY", e))
    }

    pub fn key_pair(&self) -> anyhow::Result<BlindKeyPair> {
        BlindKeyPair::parse(&self.read(PRIVATE_KEY)?).map_err(|e| fail("BAD_KEY", e))
    }

    pub fn registry(&self) -> anyhow::Result<Registry> {
        Registry::parse(&self.read(REGISTRY)?).map_err(|e| fail("BAD_REGISTRY", e))
    }

    pub fn credential(&self, id: &VoterId) -> anyhow::Result<VoterCredential> {
        let text = self.read(CREDENTIALS)?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let cred = VoterCredential::parse_line(line).map_err(|e| fail("BAD_CREDENTIALS", e))?;
            if cred.voter_id() == id {
                return Ok(cred);
            }
        }
        Err(fail("UNKNOWN_VOTER", format!("no credential for {id}")))
    }

    /// The authority's private request log; empty if none yet.
    pub fn authority_log(&self) -> anyhow::Result<Vec<SigningRequest>> {
        let p = self.path(AUTHORITY_LOG);
        if !p.exists() {
            return Ok(Vec::new());
        }
        parse_requests(&read_file(&p)?)
    }

    /// Rebuilds the authority from its key, the registry and its log.
    pub fn authority(&self) -> anyhow::Result<Authority> {
        Authority::restore(
            self.config()?,
            self.key_pair()?,
            self.registry()?,
            self.authority_log()?,
        )
        .map_err(|e| fail("BAD_AUTHORITY_LOG", e))
    }

    pub fn save_authority_log(&self, authority: &Authority) -> anyhow::Result<()> {
        let text: String = authority
            .export_request_log()
            .iter()
            .map(|r| r.to_line() + "\n")
            .collect();
        self.write(AUTHORITY_LOG, &text)
    }
}

pub fn read_file(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).map_err(|e| fail("IO", format!("{}: {e}", p.display())))
}

pub fn parse_requests(text: &str) -> anyhow::Result<Vec<SigningRequest>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| SigningRequest::parse_line(l).map_err(|e| fail("BAD_REQUEST", e)))
        .collect()
}

//! `blindpost`: drives each protocol role over files in an election
//! directory. See the README for the file layout.
//!
//! Exit codes: 0 success or ALLOW, 1 error, 2 gate BLOCK, 3 audit found
//! more ballots than requests, 64 usage error. Errors are printed to stderr
//! as `ERROR <CODE> <message>`.

mod script;
mod workspace;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use blindpost_core::authority::{AuthorityResponse, ExportedLog};
use blindpost_core::blindsig::keygen;
use blindpost_core::board::{board_verify, BoardVerdict};
use blindpost_core::election::{load_config, save_config};
use blindpost_core::identity::CredentialIssuer;
use blindpost_core::legacy::{attack_k_reuse, Scenario};
use blindpost_core::simulation::{forge_ballot, run_election, voter_id, SimParams};
use blindpost_core::tally::{
    eligibility_audit, polling_gate, publish_tally, tally, BlockReason, GatePolicy, GateVerdict,
};
use blindpost_core::voter::{prepare_and_cast, render_ballot_text, verify_payload, VoterSession};
use blindpost_core::{
    BallotBox, BulletinBoard, RecordKind, Registry, RequestLookup, SigningRequest, VoterError,
    VoterId,
};

use script::{parse_script, Pending, ScriptedVote};
use workspace::*;

/// A failure with a machine-readable code.
#[derive(Debug)]
pub struct Failure {
    code: String,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.code, self.message)
    }
}

impl std::error::Error for Failure {}

pub fn fail(code: &str, message: impl fmt::Display) -> anyhow::Error {
    Failure {
        code: code.to_string(),
        message: message.to_string(),
    }
    .into()
}

#[derive(Parser)]
#[command(name = "blindpost", version, about = "Blind-signature postal voting")]
struct Cli {
    /// Election directory.
    #[arg(long, global = true, default_value = ".")]
    dir: PathBuf,
    /// Seed for all randomness; fresh entropy when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the authority key, voter credentials and the registry.
    Setup(SetupArgs),
    /// Run the voter device for each line of a vote script.
    Vote(VoteArgs),
    /// Signing-authority operations.
    #[command(subcommand)]
    Authority(AuthorityCommand),
    /// Verification app: check a printed payload and show the vote.
    Verify(VerifyArgs),
    /// Count the ballot box and print the tally report.
    Tally(BallotsArg),
    /// Tally, run the eligibility audit and publish both to the board.
    Audit(AuditArgs),
    /// Polling-station check for one voter.
    Gate(GateArgs),
    /// Run a token-reuse scenario against the legacy design.
    LegacySim {
        /// Scenario file.
        scenario: PathBuf,
    },
    /// Bulletin-board operations.
    #[command(subcommand)]
    Board(BoardCommand),
    /// Run a whole seeded election in memory and write its board.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SetupArgs {
    /// Election config file to install.
    #[arg(long)]
    config: PathBuf,
    /// Number of voters to register (ids v0000, v0001, ...).
    #[arg(long, default_value_t = 10)]
    voters: usize,
    /// RSA modulus size.
    #[arg(long, default_value_t = 2048)]
    key_bits: u64,
}

#[derive(Args)]
struct VoteArgs {
    /// Vote script (`VOTE <voter_id> <party> <approvals|->` per line).
    #[arg(long, required_unless_present = "finish")]
    script: Option<PathBuf>,
    /// Only write signing requests to requests.txt; finish later.
    #[arg(long, conflicts_with = "finish")]
    mailbox: bool,
    /// Collect responses.txt for the pending sessions and print ballots.
    #[arg(long)]
    finish: bool,
}

#[derive(Subcommand)]
enum AuthorityCommand {
    /// Answer every request line in the inbox.
    Process {
        #[arg(long, default_value = REQUESTS)]
        inbox: PathBuf,
        #[arg(long, default_value = RESPONSES)]
        outbox: PathBuf,
    },
    /// Publish the request log to the board.
    Publish,
    /// Sign ballots without requests and drop them in the ballot box.
    Forge {
        #[arg(long)]
        count: usize,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Payload line (`BPV1|...`).
    #[arg(long, conflicts_with = "ballot", required_unless_present = "ballot")]
    payload: Option<String>,
    /// Printed ballot file; the payload is its last line.
    #[arg(long)]
    ballot: Option<PathBuf>,
    /// Authority public key file.
    #[arg(long)]
    pubkey: Option<PathBuf>,
}

#[derive(Args)]
struct BallotsArg {
    /// Ballot box file.
    #[arg(long)]
    ballots: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    ballots: BallotsArg,
    /// Print the reports without writing to the board.
    #[arg(long)]
    no_publish: bool,
}

#[derive(Args)]
struct GateArgs {
    voter_id: String,
    /// Exported request log; defaults to the authority log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Allow (unverified) when the log is unavailable.
    #[arg(long)]
    fail_open: bool,
}

#[derive(Subcommand)]
enum BoardCommand {
    /// Recompute the hash chain.
    Verify {
        #[arg(long)]
        board: Option<PathBuf>,
    },
    /// Look up a note-sheet digest among the published ballot digests.
    Find {
        /// 16 hex characters from the note sheet's DIGEST line.
        digest: String,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    voters: usize,
    #[arg(long, default_value_t = 1024)]
    key_bits: u64,
    #[arg(long, default_value_t = 0)]
    corrupt: usize,
    #[arg(long, default_value_t = 0)]
    lost: usize,
    #[arg(long, default_value_t = 0)]
    copies: usize,
    /// Where to write the board.
    #[arg(long)]
    board: PathBuf,
}

/// Seeded runs derive a separate stream per command and input so that two
/// commands never replay the same randomness.
fn rng(seed: Option<u64>, label: &str, input: &[u8]) -> ChaCha20Rng {
    match seed {
        None => ChaCha20Rng::from_entropy(),
        Some(s) => {
            let mut h = Sha256::new();
            h.update(s.to_be_bytes());
            h.update(label.as_bytes());
            h.update(input);
            ChaCha20Rng::from_seed(h.finalize().into())
        }
    }
}

fn voter_error_code(e: &VoterError) -> &'static str {
    match e {
        VoterError::InvalidSelection(_) => "INVALID_SELECTION",
        VoterError::Encoding(_) => "ENCODING",
        VoterError::Authority(a) => a.code(),
        VoterError::LocalVerifyFailed(_) => "LOCAL_VERIFY_FAILED",
    }
}

fn setup(ws: &Workspace, seed: Option<u64>, args: &SetupArgs) -> anyhow::Result<i32> {
    if ws.path(CONFIG).exists() {
        return Err(fail("ALREADY_SETUP", format!("{} exists", ws.path(CONFIG).display())));
    }
    let config = load_config(&args.config).map_err(|e| fail("BAD_CONFIG", e))?;
    std::fs::create_dir_all(ws.root()).context("creating election directory")?;
    let mut rng = rng(seed, "setup", config.to_config_string().as_bytes());
    let keys = keygen(args.key_bits, &mut rng).map_err(|e| fail("BAD_KEY", e))?;

    let mut issuer = CredentialIssuer::new();
    let mut registry = Registry::new();
    let mut creds = String::new();
    for i in 0..args.voters {
        let cred = issuer
            .issue_credential(voter_id(i), &mut rng)
            .map_err(|e| fail("BAD_REGISTRY", e))?;
        registry
            .register(cred.voter_id().clone(), cred.public_key())
            .map_err(|e| fail("BAD_REGISTRY", e))?;
        creds.push_str(&cred.to_line());
        creds.push('\n');
    }

    save_config(&config, ws.path(CONFIG)).map_err(|e| fail("IO", e))?;
    ws.write(PUBLIC_KEY, &keys.public().to_text())?;
    ws.write(PRIVATE_KEY, &keys.to_text())?;
    ws.write(REGISTRY, &registry.to_text())?;
    ws.write(CREDENTIALS, &creds)?;
    let mut board = open_board(&ws.path(BOARD))?;
    for meta in [config.to_config_string(), keys.public().to_text()] {
        board
            .append(RecordKind::Meta, meta.as_bytes())
            .map_err(|e| fail("BOARD_WRITE", e))?;
    }
    println!(
        "SETUP {} voters={} key_bits={}",
        config.election_id(),
        args.voters,
        keys.public().modulus().bits()
    );
    Ok(0)
}

fn open_board(path: &Path) -> anyhow::Result<BulletinBoard> {
    BulletinBoard::open(path).map_err(|e| match e {
        blindpost_core::board::BoardError::ChainBroken { seq } => {
            fail("CHAIN_BROKEN", format!("seq={seq}"))
        }
        other => fail("IO", other),
    })
}

fn print_ballot(ws: &Workspace, voter: &VoterId, text: &str, note: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(ws.path(PRINTED)).context("creating printed/")?;
    ws.write(&format!("{PRINTED}/{voter}.ballot.txt"), text)?;
    ws.write(&format!("{PRINTED}/{voter}.note.txt"), note)
}

fn vote(ws: &Workspace, seed: Option<u64>, args: &VoteArgs) -> anyhow::Result<i32> {
    if args.finish {
        return vote_finish(ws);
    }
    let script_path = args.script.as_ref().expect("clap enforces --script");
    let script_text = read_file(script_path)?;
    let votes = parse_script(&script_text)?;
    let config = ws.config()?;
    let pk = ws.public_key()?;
    let mut rng = rng(seed, "vote", script_text.as_bytes());
    let mut failures = 0;

    if args.mailbox {
        let (mut requests, mut pending) = (String::new(), String::new());
        for ScriptedVote { voter, selection } in votes {
            let cred = ws.credential(&voter)?;
            match VoterSession::begin(&config, &pk, &cred, selection.clone(), &mut rng) {
                Ok(s) => {
                    requests.push_str(&(s.request().to_line() + "\n"));
                    let p = Pending {
                        vote: ScriptedVote { voter, selection },
                        nonce: s.nonce(),
                        factor: s.blinding_factor().clone(),
                    };
                    pending.push_str(&(p.to_line() + "\n"));
                }
                Err(e) => {
                    failures += 1;
                    eprintln!("ERROR {} voter={voter} {e}", voter_error_code(&e));
                }
            }
        }
        ws.append(REQUESTS, &requests)?;
        ws.append(PENDING, &pending)?;
        println!("REQUESTS {}", requests.lines().count());
        return Ok(if failures > 0 { 1 } else { 0 });
    }

    let authority = ws.authority()?;
    let mut ballots = String::new();
    for ScriptedVote { voter, selection } in votes {
        let cred = ws.credential(&voter)?;
        match prepare_and_cast(&config, &pk, &cred, selection, &authority, &mut rng) {
            Ok((art, note)) => {
                print_ballot(ws, &voter, &art.text, &note.to_text())?;
                ballots.push_str(&(art.payload + "\n"));
            }
            Err(e) => {
                failures += 1;
                eprintln!("ERROR {} voter={voter} {e}", voter_error_code(&e));
            }
        }
    }
    ws.save_authority_log(&authority)?;
    ws.append(BALLOTS, &ballots)?;
    println!("CAST {}", ballots.lines().count());
    Ok(if failures > 0 { 1 } else { 0 })
}

fn vote_finish(ws: &Workspace) -> anyhow::Result<i32> {
    let config = ws.config()?;
    let pk = ws.public_key()?;
    let pending_text = ws.read(PENDING)?;
    let responses_text = ws.read(RESPONSES)?;
    let pending: Vec<Pending> = pending_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Pending::parse_line(l, &pk, i + 1))
        .collect::<anyhow::Result<_>>()?;
    let responses: Vec<&str> = responses_text.lines().filter(|l| !l.trim().is_empty()).collect();
    if pending.len() != responses.len() {
        return Err(fail(
            "MAILBOX_MISMATCH",
            format!("{} pending sessions, {} responses", pending.len(), responses.len()),
        ));
    }
    let mut failures = 0;
    let mut ballots = String::new();
    for (p, line) in pending.into_iter().zip(responses) {
        let voter = p.vote.voter.clone();
        let cred = ws.credential(&voter)?;
        let response = AuthorityResponse::parse_line(line).map_err(|e| fail("BAD_RESPONSE", e))?;
        let sig = match response {
            AuthorityResponse::Ok(sig) => sig,
            AuthorityResponse::Err(code) => {
                failures += 1;
                eprintln!("ERROR {code} voter={voter} authority refused");
                continue;
            }
        };
        let session = VoterSession::with_randomness(&config, &pk, &cred, p.vote.selection, p.nonce, p.factor)
            .map_err(|e| fail(voter_error_code(&e), e))?;
        match session.finish(&config, &pk, sig) {
            Ok((art, note)) => {
                print_ballot(ws, &voter, &art.text, &note.to_text())?;
                ballots.push_str(&(art.payload + "\n"));
            }
            Err(e) => {
                failures += 1;
                eprintln!("ERROR {} voter={voter} {e}", voter_error_code(&e));
            }
        }
    }
    ws.append(BALLOTS, &ballots)?;
    for f in [PENDING, REQUESTS, RESPONSES] {
        let _ = std::fs::remove_file(ws.path(f));
    }
    println!("CAST {}", ballots.lines().count());
    Ok(if failures > 0 { 1 } else { 0 })
}

fn authority(ws: &Workspace, seed: Option<u64>, cmd: &AuthorityCommand) -> anyhow::Result<i32> {
    match cmd {
        AuthorityCommand::Process { inbox, outbox } => {
            let auth = ws.authority()?;
            let text = read_file(&ws.path(&inbox.to_string_lossy()))?;
            let mut out = String::new();
            let (mut ok, mut refused) = (0, 0);
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let rsp = auth.handle_line(line);
                if rsp.starts_with("RSP OK") {
                    ok += 1;
                } else {
                    refused += 1;
                }
                out.push_str(&(rsp + "\n"));
            }
            ws.save_authority_log(&auth)?;
            ws.write(&outbox.to_string_lossy(), &out)?;
            println!("SIGNED {ok} REFUSED {refused}");
            Ok(0)
        }
        AuthorityCommand::Publish => {
            let auth = ws.authority()?;
            let mut board = open_board(&ws.path(BOARD))?;
            if board.of_kind(RecordKind::Request).next().is_some() {
                return Err(fail("ALREADY_PUBLISHED", "request log is already on the board"));
            }
            let n = auth
                .publish_request_log(&mut board)
                .map_err(|e| fail("BOARD_WRITE", e))?;
            println!("PUBLISHED {n}");
            Ok(0)
        }
        AuthorityCommand::Forge { count } => {
            let auth = ws.authority()?.with_adversarial_mode();
            let config = ws.config()?;
            let pk = ws.public_key()?;
            let mut rng = rng(seed, "forge", &count.to_be_bytes());
            let mut ballots = String::new();
            for _ in 0..*count {
                let p = forge_ballot(&auth, &config, &pk, &mut rng).map_err(|e| fail("FORGE", e))?;
                ballots.push_str(&(p + "\n"));
            }
            ws.append(BALLOTS, &ballots)?;
            println!("FORGED {count}");
            Ok(0)
        }
    }
}

fn verify(ws: &Workspace, args: &VerifyArgs) -> anyhow::Result<i32> {
    let config = ws.config()?;
    let pk = match &args.pubkey {
        Some(p) => blindpost_core::PublicKey::parse(&read_file(p)?).map_err(|e| fail("BAD_KEY", e))?,
        None => ws.public_key()?,
    };
    let payload = match (&args.payload, &args.ballot) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => read_file(path)?
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or_default()
            .to_string(),
        (None, None) => unreachable!("clap requires one of --payload/--ballot"),
    };
    let (sel, _) = verify_payload(&pk, &config, payload.trim()).map_err(|e| fail(e.code(), e))?;
    print!("VALID\n{}", render_ballot_text(&config, &sel, payload.trim()));
    Ok(0)
}

fn load_box(ws: &Workspace, arg: &BallotsArg) -> anyhow::Result<BallotBox> {
    let path = arg.ballots.clone().unwrap_or_else(|| ws.path(BALLOTS));
    if !path.exists() && arg.ballots.is_none() {
        return Ok(BallotBox::new());
    }
    Ok(BallotBox::parse(&read_file(&path)?))
}

fn run_tally(ws: &Workspace, arg: &BallotsArg) -> anyhow::Result<i32> {
    let config = ws.config()?;
    let t = tally(&ws.public_key()?, &config, &load_box(ws, arg)?);
    print!("{}", t.to_report(&config));
    Ok(0)
}

fn board_requests(board: &BulletinBoard) -> anyhow::Result<Vec<SigningRequest>> {
    board
        .of_kind(RecordKind::Request)
        .map(|r| {
            let line = std::str::from_utf8(&r.payload).map_err(|e| fail("BAD_REQUEST", e))?;
            SigningRequest::parse_line(line).map_err(|e| fail("BAD_REQUEST", format!("seq={} {e}", r.seq)))
        })
        .collect()
}

fn audit(ws: &Workspace, args: &AuditArgs) -> anyhow::Result<i32> {
    let config = ws.config()?;
    let mut board = open_board(&ws.path(BOARD))?;
    let requests = board_requests(&board)?;
    let t = tally(&ws.public_key()?, &config, &load_box(ws, &args.ballots)?);
    let report = eligibility_audit(&ws.registry()?, &requests, &t);
    if !args.no_publish {
        if board.of_kind(RecordKind::Audit).next().is_some() {
            return Err(fail("ALREADY_PUBLISHED", "an audit is already on the board"));
        }
        publish_tally(&mut board, &config, &t, &report).map_err(|e| fail("BOARD_WRITE", e))?;
    }
    print!("{}", t.to_report(&config));
    print!("{}", report.to_report());
    if report.cheat_flag {
        eprintln!(
            "ALERT CHEAT_DETECTED discrepancy={}",
            report.discrepancy
        );
        return Ok(3);
    }
    Ok(0)
}

fn gate(ws: &Workspace, args: &GateArgs) -> anyhow::Result<i32> {
    let registry = ws.registry()?;
    let id = VoterId::new(args.voter_id.as_str()).map_err(|e| fail("BAD_VOTER_ID", e))?;
    let log_path = args.log.clone().unwrap_or_else(|| ws.path(AUTHORITY_LOG));
    let exported = match std::fs::read_to_string(&log_path) {
        Ok(text) => Some(ExportedLog::from_requests(&parse_requests(&text)?)),
        Err(_) => None,
    };
    let policy = if args.fail_open {
        GatePolicy::FailOpen
    } else {
        GatePolicy::FailClosed
    };
    let lookup = exported.as_ref().map(|l| l as &dyn RequestLookup);
    Ok(match polling_gate(&registry, lookup, &id, policy) {
        GateVerdict::Allow => {
            println!("ALLOW {id}");
            0
        }
        GateVerdict::AllowUnverified => {
            println!("ALLOW-UNVERIFIED {id} lookup unavailable");
            0
        }
        GateVerdict::Block(reason) => {
            let code = match reason {
                BlockReason::AlreadyRequested => "ALREADY_REQUESTED",
                BlockReason::UnknownVoter => "UNKNOWN_VOTER",
                BlockReason::LookupUnavailable => "LOOKUP_UNAVAILABLE",
            };
            println!("BLOCK {id} {code}");
            2
        }
    })
}

fn board(ws: &Workspace, cmd: &BoardCommand) -> anyhow::Result<i32> {
    match cmd {
        BoardCommand::Verify { board } => {
            let path = board.clone().unwrap_or_else(|| ws.path(BOARD));
            match board_verify(&path).map_err(|e| fail("IO", e))? {
                BoardVerdict::Ok { records } => {
                    println!("OK {records}");
                    Ok(0)
                }
                BoardVerdict::Broken { seq } => Err(fail("CHAIN_BROKEN", format!("seq={seq}"))),
            }
        }
        BoardCommand::Find { digest } => {
            let bytes = hex::decode(digest).map_err(|e| fail("BAD_DIGEST", e))?;
            let board = open_board(&ws.path(BOARD))?;
            let found = board.find(RecordKind::BallotDigest, &bytes).next().map(|r| r.seq);
            match found {
                Some(seq) => {
                    println!("FOUND seq={seq}");
                    Ok(0)
                }
                None => Err(fail("NOT_FOUND", format!("digest {digest} is not on the board"))),
            }
        }
    }
}

fn simulate(seed: Option<u64>, args: &SimulateArgs) -> anyhow::Result<i32> {
    let config = load_config(&args.config).map_err(|e| fail("BAD_CONFIG", e))?;
    let params = SimParams {
        config: config.clone(),
        voters: args.voters,
        key_bits: args.key_bits,
        selections: None,
        corrupt_signatures: args.corrupt,
        lost_ballots: args.lost,
        photocopies: args.copies,
    };
    let mut rng = rng(seed, "simulate", config.to_config_string().as_bytes());
    let out = run_election(&params, &mut rng).map_err(|e| fail("SIMULATION", e))?;
    std::fs::write(&args.board, out.board.to_text())
        .with_context(|| format!("writing {}", args.board.display()))?;
    print!("{}{}", out.tally.to_report(&config), out.audit.to_report());
    Ok(0)
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let ws = Workspace::new(&cli.dir);
    match &cli.command {
        Command::Setup(a) => setup(&ws, cli.seed, a),
        Command::Vote(a) => vote(&ws, cli.seed, a),
        Command::Authority(c) => authority(&ws, cli.seed, c),
        Command::Verify(a) => verify(&ws, a),
        Command::Tally(a) => run_tally(&ws, a),
        Command::Audit(a) => audit(&ws, a),
        Command::Gate(a) => gate(&ws, a),
        Command::LegacySim { scenario } => {
            let s = Scenario::parse(&read_file(scenario)?).map_err(|e| fail("BAD_SCENARIO", e))?;
            print!("{}", attack_k_reuse(&s).map_err(|e| fail("SIMULATION", e))?.to_text());
            Ok(0)
        }
        Command::Board(c) => board(&ws, c),
        Command::Simulate(a) => simulate(cli.seed, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match e.downcast_ref::<Failure>() {
                Some(f) => eprintln!("ERROR {f}"),
                None => eprintln!("ERROR IO {e:#}"),
            }
            ExitCode::from(1)
        }
    }
}

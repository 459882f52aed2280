//! The two-phase, file-backed flow: voters write request lines, the
//! authority answers them, voters finish, and the tallier works only from
//! public files.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use blindpost_core::authority::AuthorityResponse;
use blindpost_core::blindsig::keygen;
use blindpost_core::board::{board_verify, BoardVerdict};
use blindpost_core::simulation::random_selection;
use blindpost_core::tally::{eligibility_audit, publish_tally, tally};
use blindpost_core::voter::VoterSession;
use blindpost_core::{
    Authority, BallotBox, BulletinBoard, PublicKey, RecordKind, Registry, SigningRequest,
};

use common::*;

#[test]
fn file_backed_election() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_2x3();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let keys = keygen(512, &mut rng).unwrap();
    let mut w = world_with_keys(cfg.clone(), 12, keys.clone(), rng);
    let pk_text = w.authority.public_key().to_text();
    let pk = PublicKey::parse(&pk_text).unwrap();
    let registry = Registry::parse(&w.authority.registry_snapshot().to_text()).unwrap();

    let mut sessions = Vec::new();
    let mut inbox = String::new();
    for cred in &w.creds {
        let sel = random_selection(&cfg, &mut w.rng);
        let s = VoterSession::begin(&cfg, &pk, cred, sel, &mut w.rng).unwrap();
        inbox.push_str(&s.request().to_line());
        inbox.push('\n');
        sessions.push(s);
    }
    // A replayed line for voter 0 must be refused.
    inbox.push_str(&sessions[0].request().to_line());
    inbox.push('\n');

    let outbox: Vec<String> = inbox.lines().map(|l| w.authority.handle_line(l)).collect();
    assert_eq!(outbox.last().unwrap(), "RSP ERR ALREADY_REQUESTED");

    let mut bx = BallotBox::new();
    let mut expected = Vec::new();
    for (s, line) in sessions.into_iter().zip(&outbox) {
        let AuthorityResponse::Ok(sig) = AuthorityResponse::parse_line(line).unwrap() else {
            panic!("refused: {line}");
        };
        expected.push(s.selection().clone());
        let (art, _) = s.finish(&cfg, &pk, sig).unwrap();
        bx.push(art.payload);
    }
    let box_path = dir.path().join("box.txt");
    std::fs::write(&box_path, bx.to_text()).unwrap();

    let board_path = dir.path().join("board.txt");
    {
        let mut board = BulletinBoard::open(&board_path).unwrap();
        w.authority.publish_request_log(&mut board).unwrap();
    }

    // Tallier: public key, registry, ballot box and the board only.
    let bx = BallotBox::parse(&std::fs::read_to_string(&box_path).unwrap());
    let mut board = BulletinBoard::open(&board_path).unwrap();
    let requests: Vec<SigningRequest> = board
        .of_kind(RecordKind::Request)
        .map(|r| SigningRequest::parse_line(std::str::from_utf8(&r.payload).unwrap()).unwrap())
        .collect();
    let t = tally(&pk, &cfg, &bx);
    let audit = eligibility_audit(&registry, &requests, &t);
    assert_eq!((audit.requests_valid, audit.ballots_valid, audit.cheat_flag), (12, 12, false));
    let mut truth = vec![0u64; 2];
    for s in &expected {
        truth[s.party_index as usize] += 1;
    }
    assert_eq!(t.party_votes, truth);
    publish_tally(&mut board, &cfg, &t, &audit).unwrap();
    drop(board);

    assert_eq!(board_verify(&board_path).unwrap(), BoardVerdict::Ok { records: 12 + 12 + 2 });

    let restored = Authority::restore(cfg.clone(), keys, registry.clone(), requests).unwrap();
    assert_eq!(restored.issued_count(), 12);
    assert_eq!(
        restored.handle_line(inbox.lines().next().unwrap()),
        "RSP ERR ALREADY_REQUESTED"
    );
}

#[test]
fn torn_tail_is_ignored_by_readers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("board.txt");
    {
        let mut b = BulletinBoard::open(&path).unwrap();
        for i in 0..5 {
            b.append(RecordKind::Meta, format!("m{i}").as_bytes()).unwrap();
        }
    }
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("5|META|bTU=");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(board_verify(&path).unwrap(), BoardVerdict::Ok { records: 5 });
    assert!(BulletinBoard::open(&path).is_err());
}

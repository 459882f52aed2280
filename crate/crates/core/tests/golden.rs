mod common;

use std::path::PathBuf;

use blindpost_core::simulation::{run_election, SimParams};
use blindpost_core::VoteSelection;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use common::config_2x3;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Set `BLINDPOST_BLESS=1` to rewrite the fixtures after an intended change.
fn check(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("BLINDPOST_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{name} differs from the fixture");
}

fn scripted() -> blindpost_core::simulation::SimOutcome {
    let mut params = SimParams::honest(config_2x3(), 4, 512);
    params.selections = Some(vec![
        VoteSelection::new(0, [0]),
        VoteSelection::new(0, [0, 1]),
        VoteSelection::new(1, []),
        VoteSelection::new(1, [2]),
    ]);
    params.photocopies = 1;
    run_election(&params, &mut ChaCha20Rng::seed_from_u64(2024)).unwrap()
}

#[test]
fn ballot_and_note_text() {
    let out = scripted();
    let cfg = config_2x3();
    let payload = &out.ballot_box.payloads()[out
        .ballot_box
        .payloads()
        .iter()
        .position(|p| blindpost_core::voter::verify_ballot(&out.public_key, &cfg, p).unwrap()
            == out.selections[1])
        .unwrap()];
    let text = blindpost_core::voter::render_ballot_text(&cfg, &out.selections[1], payload);
    check("ballot_voter1.txt", &text);
    check("note_voter1.txt", &out.notes[1].to_text());
}

#[test]
fn tally_and_audit_reports() {
    let out = scripted();
    let report = out.tally.to_report(&config_2x3()) + &out.audit.to_report();
    check("tally_report.txt", &report);
}

#[test]
fn board_file() {
    check("board.txt", &scripted().board.to_text());
}

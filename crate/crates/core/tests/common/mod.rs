//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the library's codec, padding or
//! tally code.

#![allow(dead_code)]

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use blindpost_core::identity::CredentialIssuer;
use blindpost_core::{
    Authority, BlindKeyPair, ElectionConfig, ElectionId, Registry, VoterCredential, VoterId,
};

pub fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCounts {
    pub party_votes: Vec<u64>,
    pub candidate_for: Vec<Vec<u64>>,
    pub accepted: usize,
    pub rejected: usize,
    pub duplicates: usize,
}

/// Straight-line reference: decode, exponentiate, check every padding byte
/// by hand, read the bitmask bit by bit, and deduplicate by scanning all
/// earlier accepted signatures.
pub fn oracle_tally(
    n: &BigUint,
    e: &BigUint,
    election_id: [u8; 8],
    candidates_per_party: &[usize],
    payloads: &[String],
) -> OracleCounts {
    let k = n.to_bytes_be().len();
    let mut out = OracleCounts {
        party_votes: vec![0; candidates_per_party.len()],
        candidate_for: candidates_per_party.iter().map(|&c| vec![0; c]).collect(),
        accepted: 0,
        rejected: 0,
        duplicates: 0,
    };
    let mut seen: Vec<BigUint> = Vec::new();
    for p in payloads {
        let Some((party, approvals, s)) = oracle_check(n, e, k, election_id, candidates_per_party, p) else {
            out.rejected += 1;
            continue;
        };
        let mut dup = false;
        for earlier in &seen {
            if *earlier == s {
                dup = true;
            }
        }
        if dup {
            out.duplicates += 1;
            continue;
        }
        seen.push(s);
        out.accepted += 1;
        out.party_votes[party] += 1;
        for c in approvals {
            out.candidate_for[party][c] += 1;
        }
    }
    out
}

fn oracle_check(
    n: &BigUint,
    e: &BigUint,
    k: usize,
    election_id: [u8; 8],
    candidates_per_party: &[usize],
    payload: &str,
) -> Option<(usize, Vec<usize>, BigUint)> {
    let body = payload.strip_prefix("BPV1|")?;
    let raw = URL_SAFE_NO_PAD.decode(body).ok()?;
    if raw.len() != k {
        return None;
    }
    let s = BigUint::from_bytes_be(&raw);
    if &s >= n {
        return None;
    }
    let m = s.modpow(e, n).to_bytes_be();
    let mut bytes = vec![0u8; k - m.len()];
    bytes.extend_from_slice(&m);

    if bytes[0] != 0x00 || bytes[1] != 0x56 {
        return None;
    }
    if bytes[2..10] != election_id {
        return None;
    }
    let filler_end = k - 33;
    if filler_end <= 10 {
        return None;
    }
    for b in &bytes[10..filler_end] {
        if *b != 0xFF {
            return None;
        }
    }
    if bytes[filler_end] != 0x00 {
        return None;
    }
    let ballot = &bytes[filler_end + 1..];
    if ballot.len() != 32 || ballot[0] != 0x01 {
        return None;
    }
    if ballot[29] != 0 || ballot[30] != 0 || ballot[31] != 0 {
        return None;
    }
    let party = ballot[9] as usize;
    if party >= candidates_per_party.len() {
        return None;
    }
    let mut approvals = Vec::new();
    for bit in 0..152 {
        let byte = ballot[10 + bit / 8];
        if (byte >> (bit % 8)) & 1 == 1 {
            if bit >= candidates_per_party[party] {
                return None;
            }
            approvals.push(bit);
        }
    }
    Some((party, approvals, s))
}

/// Flips one bit of the signature inside a payload line.
pub fn flip_signature_bit(payload: &str, bit: usize) -> String {
    let body = payload.strip_prefix("BPV1|").expect("payload prefix");
    let mut raw = URL_SAFE_NO_PAD.decode(body).expect("payload base64");
    let byte = raw.len() - 1 - bit / 8;
    raw[byte] ^= 1 << (bit % 8);
    format!("BPV1|{}", URL_SAFE_NO_PAD.encode(raw))
}

pub fn config_2x3() -> ElectionConfig {
    ElectionConfig::new(
        ElectionId(*b"ORACLE01"),
        "Oracle test",
        vec![
            ("North".into(), vec!["Ada".into(), "Bo".into(), "Cy".into()]),
            ("South".into(), vec!["Di".into(), "Ed".into(), "Flo".into()]),
        ],
        None,
    )
    .unwrap()
}

pub fn candidates_per_party(config: &ElectionConfig) -> Vec<usize> {
    config.parties().iter().map(|p| p.candidates().len()).collect()
}

pub struct World {
    pub config: ElectionConfig,
    pub authority: Authority,
    pub creds: Vec<VoterCredential>,
    pub rng: ChaCha20Rng,
}

pub fn world(config: ElectionConfig, voters: usize, key_bits: u64, seed: u64) -> World {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = blindpost_core::blindsig::keygen(key_bits, &mut rng).unwrap();
    world_with_keys(config, voters, keys, rng)
}

pub fn world_with_keys(
    config: ElectionConfig,
    voters: usize,
    keys: BlindKeyPair,
    mut rng: ChaCha20Rng,
) -> World {
    let mut issuer = CredentialIssuer::new();
    let mut registry = Registry::new();
    let creds: Vec<VoterCredential> = (0..voters)
        .map(|i| {
            let c = issuer
                .issue_credential(VoterId::new(format!("voter{i}")).unwrap(), &mut rng)
                .unwrap();
            registry.register(c.voter_id().clone(), c.public_key()).unwrap();
            c
        })
        .collect();
    World {
        authority: Authority::new(config.clone(), keys, registry),
        config,
        creds,
        rng,
    }
}

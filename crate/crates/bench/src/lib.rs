//! Shared fixtures for the benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use blindpost_core::simulation::{run_election, SimOutcome, SimParams};
use blindpost_core::{ElectionConfig, ElectionId};

pub fn config() -> ElectionConfig {
    ElectionConfig::new(
        ElectionId(*b"BENCH001"),
        "Benchmark",
        (0..5)
            .map(|p| (format!("Party {p}"), (0..20).map(|c| format!("Cand {p}.{c}")).collect()))
            .collect(),
        None,
    )
    .expect("valid config")
}

/// A finished seeded election with `voters` ballots in the box.
pub fn election(voters: usize, key_bits: u64) -> SimOutcome {
    run_election(
        &SimParams::honest(config(), voters, key_bits),
        &mut ChaCha20Rng::seed_from_u64(1),
    )
    .expect("simulation runs")
}

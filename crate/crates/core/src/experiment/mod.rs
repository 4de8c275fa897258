//! Batch experiments over many catchments: configuration, synthetic data,
//! the per-catchment pipeline and report files.

pub mod config;
pub mod report;
pub mod runner;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use report::{emit_reports, reaggregate, summarize, SummaryRow};
pub use runner::{run_catchment, run_experiment, CatchmentResult, ExperimentOutcome, FailureRecord};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// splitmix64 of `seed + salt * golden`, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a catchment id, stable across platforms and runs.
pub fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

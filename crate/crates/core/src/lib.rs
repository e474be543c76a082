//! Universal multiparty omniscience and secret key agreement.
//!
//! The crate covers the communication-for-omniscience rate region and its
//! partition dual, a fluid-limit simulator of recursive data exchange, the
//! discrete hashing protocol with its type-class decoder, secret key
//! extraction, and a seeded Monte Carlo harness.

pub mod error;
pub(crate) mod gf2;
pub mod harness;
pub mod hash;
pub mod ideal;
pub mod lp;
pub mod measures;
pub mod monitor;
pub mod partition;
pub mod real;
pub mod region;
pub mod scenario;
pub(crate) mod search;
pub mod sk;
pub mod types;

pub use error::{Error, Result};
pub use ideal::{run_ideal, Trajectory};
pub use harness::{oracle_check, run_batch, run_sk_batch, BatchMode, BatchSummary, TrialBatch};
pub use monitor::{error_event_monitor, Verdict};
pub use real::{max_rounds_bound, rde, rde_with_transcript, DecoderMode, Outcome, ProtocolConfig, RunReport};
pub use sk::{extract_key, key_length, leftover_hash_bound, run_sk, sk_capacity};
pub use scenario::Scenario;
pub use measures::{binary_entropy, conditional_entropy, entropy, EntropyProfile};
pub use partition::{enumerate_partitions, h_sigma, Partition};
pub use region::{
    find_omniscience_subset, finest_dominant_partition, in_co_region, r_star, rco_lp,
    rco_partition_max, Ground, Rate, RateVector,
};
pub use types::{
    empirical_type, enumerate_types, marginal, sample_iid, Alphabet, JointDistribution,
    PartySubset, SequenceMatrix,
};

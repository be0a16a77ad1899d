//! Deterministic desk-scale simulator for prompt-transmitting federated
//! learning.
//!
//! Clients describe their local data with compact prompts instead of
//! uploading model parameters; the server synthesizes training data from the
//! aggregated prompts via a pluggable generative oracle and trains the global
//! model there. The crate pits this against classic FedAvg and centralized
//! baselines with bit-exact communication accounting, non-IID partitioning,
//! and a membership-inference / replication-retrieval privacy suite.
//!
//! Everything is seed-driven: a run is a pure function of (config, seed).

pub mod error;
pub mod experiment;
pub mod federation;
pub mod learner;
pub mod oracle;
pub mod partition;
pub mod privacy;
pub mod worldgen;

mod rng;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, MatrixConfig, Protocol};
pub use federation::{CommLedger, Message, ProtocolConfig, RunResult};
pub use learner::{ModelParams, ModelShape, TrainConfig};
pub use oracle::{OracleState, Prompt, PromptKind, PromptSet};
pub use partition::PartitionPlan;
pub use privacy::{MiaReport, RetrievalReport};
pub use worldgen::{Dataset, LabeledSample, WorldSpec};

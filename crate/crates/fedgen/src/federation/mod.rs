//! Protocol engine.
//!
//! Typed messages with exact wire sizes, a communication ledger, parameter
//! aggregation, and runners for four protocols: FedAvg, prompt-based one-shot
//! learning, and its multi-round variants with and without server-side
//! fine-tuning on the round-1 synthetic set. Every frame a runner "transmits"
//! is really encoded, counted, and decoded back, so the ledger reflects true
//! wire bytes and the codec sits on the hot path.

pub mod ledger;
pub mod wire;

pub use ledger::{CommLedger, Direction, LedgerEntry};
pub use wire::{decode_message, encode_message, ClientId, Message};

use crate::error::{Error, Result};
use crate::learner::{self, ModelParams, ModelShape, TrainConfig};
use crate::oracle::{self, OracleState, Prompt, PromptKind};
use crate::partition::PartitionPlan;
use crate::rng::{derive_seed, rng_for};
use crate::worldgen::Dataset;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

mod stream {
    pub const INIT: u64 = 0xf301;
    pub const SERVER_TRAIN: u64 = 0xf302;
    pub const SYNTH: u64 = 0xf303;
    pub const SELECT: u64 = 0xf304;
    pub const LOCAL: u64 = 0xf305;
    pub const FINETUNE: u64 = 0xf306;
}

/// Coordinate-wise arithmetic mean of parameter vectors, in the given order
/// (runners pass clients in ascending id order). Accumulates in f64.
pub fn aggregate_params(params_list: &[ModelParams]) -> Result<ModelParams> {
    let first = params_list
        .first()
        .ok_or_else(|| Error::Contract("aggregate_params requires at least one parameter set".into()))?;
    for p in params_list {
        if p.shape != first.shape {
            return Err(Error::Contract(format!(
                "shape mismatch in aggregation: {:?} vs {:?}",
                p.shape, first.shape
            )));
        }
        if p.values.len() != first.values.len() {
            return Err(Error::Contract("parameter length mismatch in aggregation".into()));
        }
    }
    let mut acc = vec![0.0f64; first.values.len()];
    for p in params_list {
        for (a, &v) in acc.iter_mut().zip(&p.values) {
            *a += v as f64;
        }
    }
    let k = params_list.len() as f64;
    ModelParams::new(acc.into_iter().map(|a| (a / k) as f32).collect(), first.shape)
}

/// Resolved protocol-level configuration, echoed into every `RunResult`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub shape: ModelShape,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub rounds: u32,
    pub local_epochs: u32,
    pub server_epochs: u32,
    pub finetune_epochs: u32,
    pub prompt_kind: PromptKind,
    pub n_per_class_prompt: usize,
    /// Fraction of clients selected each round; 1.0 = full participation.
    pub client_fraction: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "client_fraction must be in (0, 1], got {}",
                self.client_fraction
            )));
        }
        self.train_config(0, 0).validate()
    }

    fn train_config(&self, epochs: u32, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            epochs,
            batch_size: self.batch_size,
            seed,
        }
    }

    fn echo(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Everything a protocol run produces: final model, per-round test accuracy,
/// and the exact communication ledger.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_params: ModelParams,
    pub per_round_accuracy: Vec<f64>,
    pub ledger: CommLedger,
    pub config_echo: String,
    pub seed: u64,
}

impl RunResult {
    pub fn final_accuracy(&self) -> f64 {
        self.per_round_accuracy.last().copied().unwrap_or(f64::NAN)
    }
}

/// In-memory transport: encodes every frame, records its true length, and
/// hands the receiver the decoded copy.
struct Transport {
    ledger: CommLedger,
    feature_dim: usize,
}

impl Transport {
    fn new(feature_dim: usize) -> Self {
        Self { ledger: CommLedger::default(), feature_dim }
    }

    fn model_down(&mut self, round: u32, client: ClientId, params: &ModelParams) -> Result<ModelParams> {
        let msg = Message::GlobalModelDown { round, client, params: params.values.clone() };
        let bytes = encode_message(&msg);
        self.ledger.record(round, Direction::Down, client, bytes.len() as u64);
        match decode_message(&bytes, self.feature_dim)? {
            Message::GlobalModelDown { params: values, .. } => ModelParams::new(values, params.shape),
            _ => Err(Error::Protocol("model-down frame decoded to a different kind".into())),
        }
    }

    fn model_up(&mut self, round: u32, client: ClientId, params: &ModelParams) -> Result<ModelParams> {
        let msg = Message::LocalModelUp { round, client, params: params.values.clone() };
        let bytes = encode_message(&msg);
        self.ledger.record(round, Direction::Up, client, bytes.len() as u64);
        match decode_message(&bytes, self.feature_dim)? {
            Message::LocalModelUp { params: values, .. } => ModelParams::new(values, params.shape),
            _ => Err(Error::Protocol("model-up frame decoded to a different kind".into())),
        }
    }

    fn prompts_up(&mut self, round: u32, client: ClientId, prompts: Vec<Prompt>) -> Result<Vec<Prompt>> {
        let msg = Message::PromptUpload { round, client, prompts };
        let bytes = encode_message(&msg);
        self.ledger.record(round, Direction::Up, client, bytes.len() as u64);
        match decode_message(&bytes, self.feature_dim)? {
            Message::PromptUpload { prompts, .. } => Ok(prompts),
            _ => Err(Error::Protocol("prompt frame decoded to a different kind".into())),
        }
    }
}

/// Ascending client ids participating in a round.
fn select_clients(num_clients: usize, fraction: f64, seed: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..num_clients).collect();
    }
    let m = ((fraction * num_clients as f64).ceil() as usize).clamp(1, num_clients);
    let mut ids: Vec<usize> = (0..num_clients).collect();
    use rand::seq::SliceRandom;
    let mut rng = rng_for(seed, stream::SELECT);
    ids.shuffle(&mut rng);
    let mut chosen: Vec<usize> = ids.into_iter().take(m).collect();
    chosen.sort_unstable();
    chosen
}

fn client_shards(train: &Dataset, plan: &PartitionPlan) -> Result<Vec<Dataset>> {
    plan.client_indices.iter().map(|idx| train.subset(idx)).collect()
}

fn local_seed(base: u64, round: u32, client: usize) -> u64 {
    derive_seed(base, stream::LOCAL ^ ((round as u64) << 32) ^ ((client as u64) << 8))
}

/// FedAvg: each round the server sends the global model to every selected
/// client, clients run local SGD on their real shards and upload, and the
/// server averages. Accuracy is recorded on the held-out test set per round.
pub fn run_fedavg(
    train: &Dataset,
    plan: &PartitionPlan,
    test: &Dataset,
    cfg: &ProtocolConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.rounds < 1 {
        return Err(Error::Config("fedavg requires rounds >= 1".into()));
    }
    let shards = client_shards(train, plan)?;
    let mut net = Transport::new(train.feature_dim);
    let mut global = learner::init_params(cfg.shape, derive_seed(cfg.seed, stream::INIT))?;
    let mut per_round_accuracy = Vec::with_capacity(cfg.rounds as usize);

    for round in 1..=cfg.rounds {
        let selected = select_clients(
            plan.num_clients(),
            cfg.client_fraction,
            derive_seed(cfg.seed, stream::SELECT ^ round as u64),
        );
        let mut locals = Vec::with_capacity(selected.len());
        for &k in &selected {
            let received = net.model_down(round, ClientId(k as u16), &global)?;
            let trained = learner::sgd_train(
                &received,
                &shards[k],
                &cfg.train_config(cfg.local_epochs, local_seed(cfg.seed, round, k)),
            )?;
            locals.push(net.model_up(round, ClientId(k as u16), &trained)?);
        }
        global = aggregate_params(&locals)?;
        let (acc, _) = learner::evaluate(&global, test)?;
        per_round_accuracy.push(acc);
    }

    Ok(RunResult {
        final_params: global,
        per_round_accuracy,
        ledger: net.ledger,
        config_echo: cfg.echo()?,
        seed: cfg.seed,
    })
}

/// Collect, upload, and aggregate prompts for round 1. Class-level prompts
/// are deduplicated globally by (class, domain); instance-level prompts are
/// concatenated in ascending client-id order.
fn gather_prompts(
    shards: &[Dataset],
    oracle_state: &OracleState,
    net: &mut Transport,
    cfg: &ProtocolConfig,
) -> Result<Vec<Prompt>> {
    let mut class_set: BTreeSet<Prompt> = BTreeSet::new();
    let mut instance_list: Vec<Prompt> = Vec::new();
    for (k, shard) in shards.iter().enumerate() {
        if shard.is_empty() {
            continue;
        }
        let set = match cfg.prompt_kind {
            PromptKind::ClassLevel => oracle::class_prompts(shard, k as u16)?,
            PromptKind::InstanceLevel => {
                oracle::instance_prompts(shard, oracle_state.bounds(), k as u16)?
            }
        };
        let received = net.prompts_up(1, ClientId(k as u16), set.prompts)?;
        match cfg.prompt_kind {
            PromptKind::ClassLevel => class_set.extend(received),
            PromptKind::InstanceLevel => instance_list.extend(received),
        }
    }
    let aggregated: Vec<Prompt> = match cfg.prompt_kind {
        PromptKind::ClassLevel => class_set.into_iter().collect(),
        PromptKind::InstanceLevel => instance_list,
    };
    if aggregated.is_empty() {
        return Err(Error::Protocol("aggregated prompt set is empty".into()));
    }
    Ok(aggregated)
}

struct OneshotOutcome {
    global: ModelParams,
    accuracy: f64,
    synthetic: Dataset,
}

/// Round-1 body shared by the one-shot and multi-round runners: upload
/// prompts, synthesize, train a fresh model on the synthetic set only, and
/// distribute it to every client.
fn oneshot_round(
    shards: &[Dataset],
    oracle_state: &OracleState,
    test: &Dataset,
    cfg: &ProtocolConfig,
    net: &mut Transport,
) -> Result<OneshotOutcome> {
    let aggregated = gather_prompts(shards, oracle_state, net, cfg)?;
    let synthetic = oracle::synthesize(
        oracle_state,
        &aggregated,
        cfg.n_per_class_prompt,
        derive_seed(cfg.seed, stream::SYNTH),
    )?;
    let fresh = learner::init_params(cfg.shape, derive_seed(cfg.seed, stream::INIT))?;
    let global = learner::sgd_train(
        &fresh,
        &synthetic,
        &cfg.train_config(cfg.server_epochs, derive_seed(cfg.seed, stream::SERVER_TRAIN)),
    )?;
    let (accuracy, _) = learner::evaluate(&global, test)?;
    let mut distributed = global.clone();
    for k in 0..shards.len() {
        distributed = net.model_down(1, ClientId(k as u16), &global)?;
    }
    Ok(OneshotOutcome { global: distributed, accuracy, synthetic })
}

/// One-shot protocol: a single prompt uplink per client, server-side training
/// on synthetic data, and a single model downlink.
pub fn run_fgl_oneshot(
    train: &Dataset,
    plan: &PartitionPlan,
    oracle_state: &OracleState,
    test: &Dataset,
    cfg: &ProtocolConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    let shards = client_shards(train, plan)?;
    let mut net = Transport::new(train.feature_dim);
    let outcome = oneshot_round(&shards, oracle_state, test, cfg, &mut net)?;
    Ok(RunResult {
        final_params: outcome.global,
        per_round_accuracy: vec![outcome.accuracy],
        ledger: net.ledger,
        config_echo: cfg.echo()?,
        seed: cfg.seed,
    })
}

/// Multi-round protocol: round 1 is the one-shot body; rounds 2..R are
/// FedAvg-style local fine-tuning on real shards plus aggregation. With
/// `with_syn_finetune` the server additionally fine-tunes each aggregate on
/// the round-1 synthetic set before distributing it.
pub fn run_fgl_multiround(
    train: &Dataset,
    plan: &PartitionPlan,
    oracle_state: &OracleState,
    test: &Dataset,
    cfg: &ProtocolConfig,
    with_syn_finetune: bool,
) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.rounds < 2 {
        return Err(Error::Config(format!(
            "multi-round protocol requires rounds >= 2, got {}",
            cfg.rounds
        )));
    }
    let shards = client_shards(train, plan)?;
    let mut net = Transport::new(train.feature_dim);
    let outcome = oneshot_round(&shards, oracle_state, test, cfg, &mut net)?;
    let mut global = outcome.global;
    let mut per_round_accuracy = vec![outcome.accuracy];

    for round in 2..=cfg.rounds {
        let selected = select_clients(
            plan.num_clients(),
            cfg.client_fraction,
            derive_seed(cfg.seed, stream::SELECT ^ round as u64),
        );
        let mut locals = Vec::with_capacity(selected.len());
        for &k in &selected {
            let trained = learner::sgd_train(
                &global,
                &shards[k],
                &cfg.train_config(cfg.local_epochs, local_seed(cfg.seed, round, k)),
            )?;
            locals.push(net.model_up(round, ClientId(k as u16), &trained)?);
        }
        global = aggregate_params(&locals)?;
        if with_syn_finetune {
            global = learner::sgd_train(
                &global,
                &outcome.synthetic,
                &cfg.train_config(
                    cfg.finetune_epochs,
                    derive_seed(cfg.seed, stream::FINETUNE ^ round as u64),
                ),
            )?;
        }
        let (acc, _) = learner::evaluate(&global, test)?;
        per_round_accuracy.push(acc);
        for k in 0..shards.len() {
            global = net.model_down(round, ClientId(k as u16), &global)?;
        }
    }

    Ok(RunResult {
        final_params: global,
        per_round_accuracy,
        ledger: net.ledger,
        config_echo: cfg.echo()?,
        seed: cfg.seed,
    })
}

/// Centralized baseline: one model trained directly on the pooled real data.
/// No communication, so the ledger stays empty.
pub fn run_centralized(train: &Dataset, test: &Dataset, cfg: &ProtocolConfig) -> Result<RunResult> {
    cfg.validate()?;
    let fresh = learner::init_params(cfg.shape, derive_seed(cfg.seed, stream::INIT))?;
    let trained = learner::sgd_train(
        &fresh,
        train,
        &cfg.train_config(cfg.server_epochs, derive_seed(cfg.seed, stream::SERVER_TRAIN)),
    )?;
    let (accuracy, _) = learner::evaluate(&trained, test)?;
    Ok(RunResult {
        final_params: trained,
        per_round_accuracy: vec![accuracy],
        ledger: CommLedger::default(),
        config_echo: cfg.echo()?,
        seed: cfg.seed,
    })
}

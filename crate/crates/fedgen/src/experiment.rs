//! Experiment driver.
//!
//! Parses a JSON `ExperimentConfig` (every field defaulted, unknown keys
//! rejected), wires world -> partition -> oracle -> protocol -> evaluation,
//! runs seed grids and cross-product matrices, and writes tidy CSVs. Output
//! is fully determined by (config, seed): reruns are byte-identical.

use crate::error::{Error, Result};
use crate::federation::{
    run_centralized, run_fedavg, run_fgl_multiround, run_fgl_oneshot, ProtocolConfig, RunResult,
};
use crate::learner::ModelShape;
use crate::oracle::{self, OracleState, Prompt, PromptKind};
use crate::partition::{dirichlet_partition, domain_partition, iid_partition, PartitionPlan};
use crate::privacy::{self, MiaReport, RetrievalReport};
use crate::rng::derive_seed;
use crate::worldgen::{make_world, sample_dataset, Dataset, WorldSpec};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

mod stream {
    pub const WORLD: u64 = 0xe001;
    pub const TRAIN: u64 = 0xe002;
    pub const TEST: u64 = 0xe003;
    pub const PARTITION: u64 = 0xe004;
    pub const ORACLE: u64 = 0xe005;
    pub const PROTOCOL: u64 = 0xe006;
    pub const NONMEMBER: u64 = 0xe007;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub num_classes: usize,
    pub num_domains: usize,
    pub feature_dim: usize,
    pub mean_radius: f64,
    pub within_std: f64,
    /// Real samples drawn per (class, domain) for the pooled training set.
    pub train_per_class: usize,
    /// Held-out samples per (class, domain) for evaluation.
    pub test_per_class: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            num_domains: 1,
            feature_dim: 64,
            mean_radius: 5.0,
            within_std: 2.5,
            train_per_class: 100,
            test_per_class: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKindConfig {
    Dirichlet,
    Iid,
    ByDomain,
}

impl std::fmt::Display for PartitionKindConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionKindConfig::Dirichlet => write!(f, "dirichlet"),
            PartitionKindConfig::Iid => write!(f, "iid"),
            PartitionKindConfig::ByDomain => write!(f, "by_domain"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub kind: PartitionKindConfig,
    pub beta: f64,
    pub num_clients: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { kind: PartitionKindConfig::Dirichlet, beta: 0.5, num_clients: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Per-domain fidelity gap; a single entry broadcasts to every domain.
    pub fidelity_eps: Vec<f64>,
    pub p_mem: f64,
    pub mem_pool_size: usize,
    /// Defaults to within_std / 4 when absent.
    pub instance_std: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { fidelity_eps: vec![0.5], p_mem: 0.0, mem_pool_size: 1000, instance_std: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub lr: f64,
    pub momentum: f64,
    pub local_epochs: u32,
    pub server_epochs: u32,
    pub finetune_epochs: u32,
    pub batch_size: usize,
    pub rounds: u32,
    /// 0 selects the linear model.
    pub hidden_dim: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            local_epochs: 5,
            server_epochs: 30,
            finetune_epochs: 5,
            batch_size: 64,
            rounds: 30,
            hidden_dim: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Fedavg,
    FglOneshot,
    FglMultiround,
    FglMultiroundSyn,
    Centralized,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Fedavg => write!(f, "fedavg"),
            Protocol::FglOneshot => write!(f, "fgl_oneshot"),
            Protocol::FglMultiround => write!(f, "fgl_multiround"),
            Protocol::FglMultiroundSyn => write!(f, "fgl_multiround_syn"),
            Protocol::Centralized => write!(f, "centralized"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub k: usize,
    pub threshold: f64,
    /// Synthetic queries scored per seed in `retrieve` runs.
    pub num_queries: usize,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self { k: 2, threshold: 0.999, num_queries: 2000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub partition: PartitionConfig,
    pub oracle: OracleConfig,
    pub train: TrainSettings,
    pub protocol: Protocol,
    pub prompt_kind: PromptKind,
    pub n_per_class_prompt: usize,
    pub client_fraction: f64,
    pub seeds: Vec<u64>,
    pub retrieval: RetrievalSettings,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            partition: PartitionConfig::default(),
            oracle: OracleConfig::default(),
            train: TrainSettings::default(),
            protocol: Protocol::FglOneshot,
            prompt_kind: PromptKind::ClassLevel,
            n_per_class_prompt: 500,
            client_fraction: 1.0,
            seeds: vec![0],
            retrieval: RetrievalSettings::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must list at least one seed".into()));
        }
        if self.world.num_domains > 1
            && self.oracle.fidelity_eps.len() != 1
            && self.oracle.fidelity_eps.len() != self.world.num_domains
        {
            return Err(Error::Config(format!(
                "oracle.fidelity_eps has {} entries; expected 1 or {}",
                self.oracle.fidelity_eps.len(),
                self.world.num_domains
            )));
        }
        Ok(())
    }

    /// JSON echo of the fully resolved configuration; key order is fixed by
    /// the struct layout, so the string is deterministic.
    pub fn resolved_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    fn fidelity_eps_per_domain(&self) -> Vec<f64> {
        if self.oracle.fidelity_eps.len() == 1 {
            vec![self.oracle.fidelity_eps[0]; self.world.num_domains]
        } else {
            self.oracle.fidelity_eps.clone()
        }
    }

    fn instance_std(&self) -> f64 {
        self.oracle.instance_std.unwrap_or(self.world.within_std / 4.0)
    }

    fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.world.feature_dim,
            hidden_dim: self.train.hidden_dim,
            num_classes: self.world.num_classes,
        }
    }

    fn protocol_config(&self, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            shape: self.shape(),
            lr: self.train.lr,
            momentum: self.train.momentum,
            batch_size: self.train.batch_size,
            rounds: self.train.rounds,
            local_epochs: self.train.local_epochs,
            server_epochs: self.train.server_epochs,
            finetune_epochs: self.train.finetune_epochs,
            prompt_kind: self.prompt_kind,
            n_per_class_prompt: self.n_per_class_prompt,
            client_fraction: self.client_fraction,
            seed: derive_seed(seed, stream::PROTOCOL),
        }
    }
}

// ---------------------------------------------------------------------------
// Single cell
// ---------------------------------------------------------------------------

/// Everything one (config, seed) evaluation builds along the way.
pub struct CellContext {
    pub world: WorldSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub plan: PartitionPlan,
    pub oracle: OracleState,
}

pub struct CellOutcome {
    pub seed: u64,
    pub result: RunResult,
}

/// Build world, datasets, plan, and oracle for one seed.
pub fn build_cell(cfg: &ExperimentConfig, seed: u64) -> Result<CellContext> {
    let w = &cfg.world;
    let world = make_world(
        w.num_classes,
        w.num_domains,
        w.feature_dim,
        w.mean_radius,
        w.within_std,
        derive_seed(seed, stream::WORLD),
    )?;
    let train = sample_dataset(&world, w.train_per_class, derive_seed(seed, stream::TRAIN))?;
    let test = sample_dataset(&world, w.test_per_class, derive_seed(seed, stream::TEST))?;
    let plan = match cfg.partition.kind {
        PartitionKindConfig::Dirichlet => dirichlet_partition(
            &train,
            cfg.partition.num_clients,
            cfg.partition.beta,
            derive_seed(seed, stream::PARTITION),
        )?,
        PartitionKindConfig::Iid => iid_partition(
            &train,
            cfg.partition.num_clients,
            derive_seed(seed, stream::PARTITION),
        )?,
        PartitionKindConfig::ByDomain => domain_partition(&train, cfg.partition.num_clients)?,
    };
    let oracle = oracle::pretrain_oracle(
        &world,
        &cfg.fidelity_eps_per_domain(),
        cfg.oracle.mem_pool_size,
        cfg.oracle.p_mem,
        cfg.instance_std(),
        derive_seed(seed, stream::ORACLE),
    )?;
    Ok(CellContext { world, train, test, plan, oracle })
}

/// Run the configured protocol for one seed.
pub fn run_cell(cfg: &ExperimentConfig, seed: u64) -> Result<CellOutcome> {
    let ctx = build_cell(cfg, seed)?;
    let pcfg = cfg.protocol_config(seed);
    let result = match cfg.protocol {
        Protocol::Fedavg => run_fedavg(&ctx.train, &ctx.plan, &ctx.test, &pcfg)?,
        Protocol::FglOneshot => {
            run_fgl_oneshot(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg)?
        }
        Protocol::FglMultiround => {
            run_fgl_multiround(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg, false)?
        }
        Protocol::FglMultiroundSyn => {
            run_fgl_multiround(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg, true)?
        }
        Protocol::Centralized => run_centralized(&ctx.train, &ctx.test, &pcfg)?,
    };
    Ok(CellOutcome { seed, result })
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn join_accuracies(accs: &[f64]) -> String {
    accs.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
}

fn beta_field(cfg: &ExperimentConfig) -> String {
    match cfg.partition.kind {
        PartitionKindConfig::Dirichlet => cfg.partition.beta.to_string(),
        _ => String::new(),
    }
}

pub const RESULTS_HEADER: &str = "seed,protocol,partition,beta,prompt_kind,rounds,\
final_accuracy,per_round_accuracy,uplink_bytes,downlink_bytes,config";

fn results_row(cfg: &ExperimentConfig, outcome: &CellOutcome) -> Result<String> {
    let r = &outcome.result;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        outcome.seed,
        cfg.protocol,
        cfg.partition.kind,
        beta_field(cfg),
        prompt_kind_name(cfg.prompt_kind),
        r.per_round_accuracy.len(),
        r.final_accuracy(),
        join_accuracies(&r.per_round_accuracy),
        r.ledger.uplink_bytes(),
        r.ledger.downlink_bytes(),
        csv_field(&cfg.resolved_json()?),
    ))
}

fn prompt_kind_name(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::ClassLevel => "class_level",
        PromptKind::InstanceLevel => "instance_level",
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(content.as_bytes())?;
    f.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Run every seed, write `results.csv` plus one ledger CSV per seed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<CellOutcome>> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut outcomes = Vec::with_capacity(seeds.len());
    let mut rows = String::from(RESULTS_HEADER);
    rows.push('\n');
    for &seed in &seeds {
        let outcome = run_cell(cfg, seed).map_err(|e| match e {
            e @ (Error::Config(_) | Error::Json(_)) => Error::Config(format!("seed {seed}: {e}")),
            other => Error::Protocol(format!("seed {seed}: {other}")),
        })?;
        rows.push_str(&results_row(cfg, &outcome)?);
        rows.push('\n');
        outcome.result.ledger.export_csv(&ledger_path(out_dir, seed))?;
        outcomes.push(outcome);
    }
    write_file(&out_dir.join("results.csv"), &rows)?;
    Ok(outcomes)
}

fn ledger_path(out_dir: &Path, seed: u64) -> std::path::PathBuf {
    out_dir.join(format!("ledger_seed{seed}.csv"))
}

/// Membership-inference evaluation: run the protocol, then compare metric
/// distributions between the clients' real training samples (members) and a
/// fresh same-distribution draw (nonmembers).
pub fn run_mia(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(u64, MiaReport)>> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut rows =
        String::from("seed,metric,member_mean,nonmember_mean,abs_gap,member_count,nonmember_count\n");
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let ctx = build_cell(cfg, seed)?;
        let pcfg = cfg.protocol_config(seed);
        let result = match cfg.protocol {
            Protocol::Fedavg => run_fedavg(&ctx.train, &ctx.plan, &ctx.test, &pcfg)?,
            Protocol::FglOneshot => {
                run_fgl_oneshot(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg)?
            }
            Protocol::FglMultiround => {
                run_fgl_multiround(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg, false)?
            }
            Protocol::FglMultiroundSyn => {
                run_fgl_multiround(&ctx.train, &ctx.plan, &ctx.oracle, &ctx.test, &pcfg, true)?
            }
            Protocol::Centralized => run_centralized(&ctx.train, &ctx.test, &pcfg)?,
        };
        let nonmember = sample_dataset(
            &ctx.world,
            cfg.world.train_per_class,
            derive_seed(seed, stream::NONMEMBER),
        )?;
        let report = privacy::mia_report(&result.final_params, &ctx.train, &nonmember)?;
        for (name, gap) in report.gaps() {
            rows.push_str(&format!(
                "{seed},{name},{},{},{},{},{}\n",
                gap.member_mean,
                gap.nonmember_mean,
                gap.abs_gap,
                report.member_count,
                report.nonmember_count
            ));
        }
        report.export_samples_csv(&out_dir.join(format!("mia_samples_seed{seed}.csv")))?;
        reports.push((seed, report));
    }
    write_file(&out_dir.join("mia.csv"), &rows)?;
    Ok(reports)
}

/// Replication retrieval: synthesize from aggregated prompts, score every
/// synthetic sample against the oracle's own pretraining pool.
pub fn run_retrieval(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(u64, RetrievalReport)>> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut rows = String::from("seed,queries,flagged,flagged_fraction\n");
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let ctx = build_cell(cfg, seed)?;
        let synthetic = synthesize_for_retrieval(cfg, &ctx, seed)?;
        let report = privacy::retrieval(
            &synthetic.samples,
            &ctx.oracle.mem_pool,
            cfg.retrieval.k,
            cfg.retrieval.threshold,
        )?;
        let flagged = report.results.iter().filter(|r| r.flagged).count();
        rows.push_str(&format!(
            "{seed},{},{},{}\n",
            report.results.len(),
            flagged,
            report.flagged_fraction()
        ));
        report.export_csv(&out_dir.join(format!("retrieval_seed{seed}.csv")))?;
        reports.push((seed, report));
    }
    write_file(&out_dir.join("retrieval.csv"), &rows)?;
    Ok(reports)
}

/// Aggregate prompts exactly the way the one-shot runner would, then draw
/// about `retrieval.num_queries` synthetic samples from them.
fn synthesize_for_retrieval(cfg: &ExperimentConfig, ctx: &CellContext, seed: u64) -> Result<Dataset> {
    let mut aggregated: Vec<Prompt> = Vec::new();
    match cfg.prompt_kind {
        PromptKind::ClassLevel => {
            let mut set = std::collections::BTreeSet::new();
            for indices in &ctx.plan.client_indices {
                let shard = ctx.train.subset(indices)?;
                if shard.is_empty() {
                    continue;
                }
                set.extend(oracle::class_prompts(&shard, 0)?.prompts);
            }
            aggregated.extend(set);
        }
        PromptKind::InstanceLevel => {
            for indices in &ctx.plan.client_indices {
                let shard = ctx.train.subset(indices)?;
                if shard.is_empty() {
                    continue;
                }
                aggregated.extend(oracle::instance_prompts(&shard, ctx.oracle.bounds(), 0)?.prompts);
            }
        }
    }
    if aggregated.is_empty() {
        return Err(Error::Protocol("no prompts to synthesize from".into()));
    }
    let per_prompt = match cfg.prompt_kind {
        PromptKind::ClassLevel => {
            (cfg.retrieval.num_queries + aggregated.len() - 1) / aggregated.len()
        }
        PromptKind::InstanceLevel => 1,
    };
    oracle::synthesize(
        &ctx.oracle,
        &aggregated,
        per_prompt.max(1),
        derive_seed(seed, stream::PROTOCOL),
    )
}

// ---------------------------------------------------------------------------
// Matrix runner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub base: ExperimentConfig,
    pub protocols: Vec<Protocol>,
    /// Each beta forces a Dirichlet partition for that cell.
    pub betas: Vec<f64>,
    pub prompt_kinds: Vec<PromptKind>,
    pub seeds: Vec<u64>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            base: ExperimentConfig::default(),
            protocols: vec![Protocol::Fedavg, Protocol::FglOneshot],
            betas: vec![0.01, 0.5, 1e6],
            prompt_kinds: vec![PromptKind::ClassLevel],
            seeds: vec![0, 1],
        }
    }
}

impl MatrixConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: MatrixConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty()
            || self.betas.is_empty()
            || self.prompt_kinds.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::Config("matrix axes must all be nonempty".into()));
        }
        self.base.validate()
    }

    fn cells(&self) -> Vec<MatrixCell> {
        let mut cells = Vec::new();
        for &protocol in &self.protocols {
            for &beta in &self.betas {
                for &prompt_kind in &self.prompt_kinds {
                    for &seed in &self.seeds {
                        let mut cfg = self.base.clone();
                        cfg.protocol = protocol;
                        cfg.prompt_kind = prompt_kind;
                        cfg.partition.kind = PartitionKindConfig::Dirichlet;
                        cfg.partition.beta = beta;
                        cfg.seeds = vec![seed];
                        cells.push(MatrixCell { cfg, protocol, beta, prompt_kind, seed });
                    }
                }
            }
        }
        cells
    }
}

struct MatrixCell {
    cfg: ExperimentConfig,
    protocol: Protocol,
    beta: f64,
    prompt_kind: PromptKind,
    seed: u64,
}

pub const MATRIX_HEADER: &str = "protocol,beta,prompt_kind,seed,status,\
final_accuracy,uplink_bytes,downlink_bytes,config";

pub struct MatrixRun {
    pub csv: String,
    pub failed_cells: usize,
}

/// Run every cell of {protocol x beta x prompt_kind x seed}. Cell failures
/// are recorded per row and do not stop the run. Rows are sorted by cell key,
/// so output is independent of execution order (and of `jobs`).
pub fn run_matrix(matrix: &MatrixConfig, out_dir: &Path, jobs: usize) -> Result<MatrixRun> {
    matrix.validate()?;
    let cells = matrix.cells();

    let evaluate = |cell: &MatrixCell| -> (String, bool) {
        let key = format!(
            "{},{},{},{}",
            cell.protocol,
            cell.beta,
            prompt_kind_name(cell.prompt_kind),
            cell.seed
        );
        match run_cell(&cell.cfg, cell.seed) {
            Ok(outcome) => {
                let r = &outcome.result;
                let config = cell.cfg.resolved_json().unwrap_or_default();
                (
                    format!(
                        "{key},ok,{},{},{},{}",
                        r.final_accuracy(),
                        r.ledger.uplink_bytes(),
                        r.ledger.downlink_bytes(),
                        csv_field(&config)
                    ),
                    false,
                )
            }
            Err(e) => (format!("{key},{},,,,", csv_field(&format!("error: {e}"))), true),
        }
    };

    let mut keyed: Vec<(CellKey, String, bool)> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("could not build a {jobs}-thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells
                .par_iter()
                .map(|cell| {
                    let (row, failed) = evaluate(cell);
                    (cell_key(cell), row, failed)
                })
                .collect()
        })
    } else {
        cells
            .iter()
            .map(|cell| {
                let (row, failed) = evaluate(cell);
                (cell_key(cell), row, failed)
            })
            .collect()
    };

    keyed.sort_by(|a, b| {
        a.0 .0
            .cmp(&b.0 .0)
            .then(a.0 .1.total_cmp(&b.0 .1))
            .then(a.0 .2.cmp(&b.0 .2))
            .then(a.0 .3.cmp(&b.0 .3))
    });

    let mut csv = String::from(MATRIX_HEADER);
    csv.push('\n');
    let mut failed_cells = 0usize;
    for (_, row, failed) in &keyed {
        csv.push_str(row);
        csv.push('\n');
        if *failed {
            failed_cells += 1;
        }
    }
    write_file(&out_dir.join("matrix.csv"), &csv)?;
    Ok(MatrixRun { csv, failed_cells })
}

type CellKey = (String, f64, &'static str, u64);

fn cell_key(cell: &MatrixCell) -> CellKey {
    (
        cell.protocol.to_string(),
        cell.beta,
        prompt_kind_name(cell.prompt_kind),
        cell.seed,
    )
}

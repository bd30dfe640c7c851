//! Command-line flags and the JSON settings they override.
//!
//! A config file holds one optional object per command, keyed by command
//! name, with the same field names as the settings structs below. Flags
//! given on the command line replace the corresponding file values.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use npclust::corpus_io::{SynthConfig, TokenizerConfig};
use npclust::doc_model::InitStrategy;
use npclust::slice::SliceConfig;
use npclust::PriorKind;
use serde::{Deserialize, Serialize};

/// Seed used when neither a flag nor the config file sets one.
pub const SEED_ENV: &str = "NPCLUST_SEED";

#[derive(Debug, Parser)]
#[command(name = "npclust", version, about = "Nonparametric clustering prior experiments")]
pub struct Cli {
    /// JSON config file with per-command sections
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Overwrite an existing run directory
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate partitions and record cluster counts and size histograms
    Simulate(SimulateArgs),
    /// Print closed-form expectations of cluster counts and sizes
    Stats(StatsArgs),
    /// Compare ordering and partition variability of log P(c)
    Exchangeability(ExchangeabilityArgs),
    /// Cluster a corpus with the document mixture model
    Cluster(ClusterArgs),
    /// Held-out log-probability of test documents
    Evaluate(EvaluateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Stats(_) => "stats",
            Command::Exchangeability(_) => "exchangeability",
            Command::Cluster(_) => "cluster",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed (falls back to the config file, then NPCLUST_SEED, then 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file: one document per line, or a .json snapshot
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,

    #[arg(long)]
    pub min_count: Option<usize>,

    #[arg(long)]
    pub stopwords: Option<bool>,

    #[arg(long)]
    pub stem: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub sweeps: Option<usize>,

    #[arg(long)]
    pub burn_in: Option<usize>,

    /// Resample hyperparameters every this many sweeps (0 = never)
    #[arg(long)]
    pub hyper_interval: Option<usize>,

    /// Starting partition: prior, single-cluster or singletons
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitStrategy>,
}

fn parse_init(s: &str) -> Result<InitStrategy, String> {
    match s {
        "prior" => Ok(InitStrategy::Prior),
        "single-cluster" | "single_cluster" => Ok(InitStrategy::SingleCluster),
        "singletons" => Ok(InitStrategy::Singletons),
        _ => Err(format!("unknown init strategy `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub process: Option<Vec<PriorKind>>,
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    /// Discounts, used for Pitman-Yor only
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Largest cluster size written to cluster_sizes.csv
    #[arg(long)]
    pub max_m: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub process: Vec<PriorKind>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub n: Vec<usize>,
    pub replicates: usize,
    pub max_m: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            process: vec![PriorKind::Dirichlet, PriorKind::PitmanYor, PriorKind::Uniform],
            theta: vec![1.0, 10.0, 100.0],
            alpha: vec![0.25, 0.5, 0.75],
            n: vec![100, 1000, 10_000],
            replicates: 1000,
            max_m: 20,
            seed: None,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub process: Option<PriorKind>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Cluster size for the expected number of clusters of that size
    #[arg(long)]
    pub m: Option<usize>,
    /// Recorded in the manifest only; the closed forms are deterministic
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write stats.json and a manifest to this directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSettings {
    pub process: PriorKind,
    pub theta: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for StatsSettings {
    fn default() -> Self {
        Self {
            process: PriorKind::Dirichlet,
            theta: 1.0,
            alpha: 0.0,
            n: 1000,
            m: None,
            seed: None,
            out: None,
        }
    }
}

/// Where a command's corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    /// Corpus file; when absent the synthetic generator is used.
    pub path: Option<PathBuf>,
    pub tokenizer: TokenizerConfig,
    pub synth: SynthConfig,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            path: None,
            tokenizer: TokenizerConfig::default(),
            synth: SynthConfig {
                num_clusters: 10,
                docs_per_cluster: 20,
                vocab_per_cluster: 20,
                doc_length: 30,
                overlap: 0.3,
                seed: 1,
            },
        }
    }
}

impl CorpusSettings {
    pub fn apply(&mut self, args: CorpusArgs) {
        if args.corpus.is_some() {
            self.path = args.corpus;
        }
        set(&mut self.tokenizer.min_count, args.min_count);
        set(&mut self.tokenizer.stopwords, args.stopwords);
        set(&mut self.tokenizer.stem, args.stem);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub sweeps: usize,
    pub burn_in: usize,
    pub hyper_interval: usize,
    pub init: InitStrategy,
    pub beta: f64,
    pub beta1: f64,
    pub beta0: f64,
    pub slice: SliceConfig,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            burn_in: 500,
            hyper_interval: 1,
            init: InitStrategy::Singletons,
            beta: 1.0,
            beta1: 1.0,
            beta0: 1.0,
            slice: SliceConfig::default(),
        }
    }
}

impl ChainSettings {
    pub fn apply(&mut self, args: ChainArgs) {
        set(&mut self.sweeps, args.sweeps);
        set(&mut self.burn_in, args.burn_in);
        set(&mut self.hyper_interval, args.hyper_interval);
        set(&mut self.init, args.init);
    }
}

#[derive(Debug, Args)]
pub struct ExchangeabilityArgs {
    #[arg(long)]
    pub prior: Option<PriorKind>,
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub orderings: Option<usize>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeabilitySettings {
    pub prior: PriorKind,
    pub theta: Vec<f64>,
    pub chains: usize,
    pub orderings: usize,
    pub corpus: CorpusSettings,
    pub chain: ChainSettings,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for ExchangeabilitySettings {
    fn default() -> Self {
        Self {
            prior: PriorKind::Uniform,
            theta: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            chains: 5,
            orderings: 500,
            corpus: CorpusSettings::default(),
            chain: ChainSettings {
                sweeps: 200,
                burn_in: 100,
                ..ChainSettings::default()
            },
            seed: None,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub prior: Option<PriorKind>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub prior: PriorKind,
    pub theta: f64,
    pub chains: usize,
    pub corpus: CorpusSettings,
    pub chain: ChainSettings,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            prior: PriorKind::Uniform,
            theta: 1.0,
            chains: 5,
            corpus: CorpusSettings::default(),
            chain: ChainSettings::default(),
            seed: None,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output directory of a `cluster` run to evaluate
    #[arg(long, value_name = "DIR")]
    pub trained: Option<PathBuf>,
    /// Held-out documents, one per line
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Without --trained: priors to compare
    #[arg(long, value_delimiter = ',')]
    pub priors: Option<Vec<PriorKind>>,
    /// Without --trained: concentration grid
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub trained: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub particles: usize,
    pub permutations: usize,
    pub resample: bool,
    pub priors: Vec<PriorKind>,
    pub theta: Vec<f64>,
    pub chains: usize,
    pub train_fraction: f64,
    pub corpus: CorpusSettings,
    pub chain: ChainSettings,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self {
            trained: None,
            test: None,
            particles: 100,
            permutations: 20,
            resample: true,
            priors: vec![PriorKind::Dirichlet, PriorKind::Uniform],
            theta: vec![0.1, 1.0, 10.0],
            chains: 5,
            train_fraction: 0.8,
            corpus: CorpusSettings::default(),
            chain: ChainSettings::default(),
            seed: None,
            out: PathBuf::from("."),
        }
    }
}

pub fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn set_common(seed: &mut Option<u64>, out: &mut PathBuf, common: CommonArgs) {
    if common.seed.is_some() {
        *seed = common.seed;
    }
    set(out, common.out);
}

impl SimulateArgs {
    pub fn apply(self, s: &mut SimulateSettings) {
        set(&mut s.process, self.process);
        set(&mut s.theta, self.theta);
        set(&mut s.alpha, self.alpha);
        set(&mut s.n, self.n);
        set(&mut s.replicates, self.replicates);
        set(&mut s.max_m, self.max_m);
        set_common(&mut s.seed, &mut s.out, self.common);
    }
}

impl StatsArgs {
    pub fn apply(self, s: &mut StatsSettings) {
        set(&mut s.process, self.process);
        set(&mut s.theta, self.theta);
        set(&mut s.alpha, self.alpha);
        set(&mut s.n, self.n);
        if self.m.is_some() {
            s.m = self.m;
        }
        if self.seed.is_some() {
            s.seed = self.seed;
        }
        if self.out.is_some() {
            s.out = self.out;
        }
    }
}

impl ExchangeabilityArgs {
    pub fn apply(self, s: &mut ExchangeabilitySettings) {
        set(&mut s.prior, self.prior);
        set(&mut s.theta, self.theta);
        set(&mut s.chains, self.chains);
        set(&mut s.orderings, self.orderings);
        s.corpus.apply(self.corpus);
        s.chain.apply(self.chain);
        set_common(&mut s.seed, &mut s.out, self.common);
    }
}

impl ClusterArgs {
    pub fn apply(self, s: &mut ClusterSettings) {
        set(&mut s.prior, self.prior);
        set(&mut s.theta, self.theta);
        set(&mut s.chains, self.chains);
        s.corpus.apply(self.corpus);
        s.chain.apply(self.chain);
        set_common(&mut s.seed, &mut s.out, self.common);
    }
}

impl EvaluateArgs {
    pub fn apply(self, s: &mut EvaluateSettings) {
        if self.trained.is_some() {
            s.trained = self.trained;
        }
        if self.test.is_some() {
            s.test = self.test;
        }
        set(&mut s.particles, self.particles);
        set(&mut s.permutations, self.permutations);
        set(&mut s.priors, self.priors);
        set(&mut s.theta, self.theta);
        set(&mut s.chains, self.chains);
        set(&mut s.train_fraction, self.train_fraction);
        s.corpus.apply(self.corpus);
        s.chain.apply(self.chain);
        set_common(&mut s.seed, &mut s.out, self.common);
    }
}

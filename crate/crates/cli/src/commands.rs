use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use npclust::corpus_io::{load_any, save_snapshot, synth_corpus, Corpus, TokenizerConfig};
use npclust::doc_model::{
    run_chains, ChainCheckpoint, ChainConfig, ChainState, CountState, HyperParams, PreparedCorpus,
};
use npclust::evaluation::{
    compare_priors_heldout, heldout_log_prob, ComparisonConfig, EvalConfig, HeldoutEstimate, SplitConfig,
    TrainedModel,
};
use npclust::exchangeability::run_theta_grid;
use npclust::partition_stats::{
    asymptotic_k_dp, exact_expected_k_up, expected_h, expected_k, run_simulation,
};
use npclust::math::mean_sd;
use npclust::rng::derive_seed;
use npclust::{Partition, PriorKind, PriorSpec};
use serde::Serialize;

use crate::args::{
    ChainSettings, ClusterSettings, CorpusSettings, EvaluateSettings, ExchangeabilitySettings, SimulateSettings,
    StatsSettings,
};
use crate::manifest::{Csv, RunDir};
use crate::Failure;

/// Settings problems are reported as usage errors.
fn usage<T>(result: npclust::Result<T>) -> Result<T, Failure> {
    result.map_err(|e| Failure::Usage(e.into()))
}

fn check(ok: bool, message: impl Into<String>) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow!(message.into())))
    }
}

fn runtime<T>(result: anyhow::Result<T>) -> Result<T, Failure> {
    result.map_err(Failure::Runtime)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub struct RunContext {
    pub seed: u64,
    pub jobs: usize,
    pub force: bool,
}

pub fn simulate(s: &SimulateSettings, ctx: &RunContext) -> Result<(), Failure> {
    check(s.replicates > 0, "--replicates must be at least 1")?;
    check(!s.n.is_empty() && !s.n.contains(&0), "--n needs values of at least 1")?;
    check(!s.process.is_empty() && !s.theta.is_empty(), "need at least one process and theta")?;
    let mut specs = Vec::new();
    for &kind in &s.process {
        for &theta in &s.theta {
            if kind == PriorKind::PitmanYor {
                check(!s.alpha.is_empty(), "Pitman-Yor needs at least one --alpha")?;
                for &alpha in &s.alpha {
                    specs.push(usage(PriorSpec::pitman_yor(theta, alpha))?);
                }
            } else {
                specs.push(usage(PriorSpec::new(kind, theta, 0.0))?);
            }
        }
    }
    let mut dir = runtime(RunDir::open(&s.out, ctx.force))?;
    let summaries = runtime(run_simulation(&specs, &s.n, s.replicates, ctx.seed).map_err(Into::into))?;

    let mut growth = Csv::new(&["process", "theta", "alpha", "n", "replicates", "mean_k", "se_k"]);
    let mut sizes = Csv::new(&["process", "theta", "alpha", "n", "M", "mean_h"]);
    for sum in &summaries {
        let head = [
            sum.spec.kind().short_name().to_string(),
            num(sum.spec.theta()),
            num(sum.spec.alpha()),
            sum.n.to_string(),
        ];
        let mut row = head.to_vec();
        row.extend([sum.replicates.to_string(), num(sum.mean_k), num(sum.se_k)]);
        growth.row(&row);
        for m in 1..=s.max_m {
            let mut row = head.to_vec();
            row.extend([m.to_string(), num(sum.mean_h_at(m))]);
            sizes.row(&row);
        }
    }
    runtime(dir.write("k_growth.csv", &growth.into_string()))?;
    runtime(dir.write("cluster_sizes.csv", &sizes.into_string()))?;
    runtime(dir.finish("simulate", ctx.seed, ctx.jobs, echo(s, ctx.seed)))
}

#[derive(Serialize)]
struct StatsReport {
    process: PriorKind,
    theta: f64,
    alpha: f64,
    n: usize,
    values: Vec<(String, f64)>,
}

pub fn stats(s: &StatsSettings, ctx: &RunContext) -> Result<(), Failure> {
    let spec = usage(PriorSpec::new(s.process, s.theta, s.alpha))?;
    check(s.n > 0, "--n must be at least 1")?;
    if s.process == PriorKind::PitmanYor {
        check(s.alpha > 0.0, "the Pitman-Yor closed forms need 0 < alpha < 1")?;
    }
    let mut values = vec![("expected_k".to_string(), expected_k(&spec, s.n))];
    match s.process {
        PriorKind::Dirichlet => values.push(("expected_k_asymptotic".into(), asymptotic_k_dp(s.theta, s.n))),
        PriorKind::Uniform if s.n <= 1_000_000 => {
            values.push(("expected_k_exact".into(), exact_expected_k_up(s.theta, s.n)))
        }
        _ => {}
    }
    if let Some(m) = s.m {
        check(m >= 1, "--m must be at least 1")?;
        values.push((format!("expected_h_{m}"), expected_h(&spec, m, s.n)));
    }
    for (name, value) in &values {
        println!("{name} {value}");
    }
    if let Some(out) = &s.out {
        let mut dir = runtime(RunDir::open(out, ctx.force))?;
        let report = StatsReport {
            process: s.process,
            theta: s.theta,
            alpha: spec.alpha(),
            n: s.n,
            values,
        };
        runtime(dir.write_json("stats.json", &report))?;
        runtime(dir.finish("stats", ctx.seed, ctx.jobs, echo(s, ctx.seed)))?;
    }
    Ok(())
}

/// Loads the configured corpus, or generates the synthetic one. Also
/// returns the generating partition for synthetic corpora.
fn load_corpus(settings: &CorpusSettings, dir: &mut RunDir) -> Result<(Corpus, Option<Partition>), Failure> {
    match &settings.path {
        Some(path) => {
            let corpus = runtime(load_any(path, &settings.tokenizer).map_err(Into::into))?;
            runtime(dir.add_input(path))?;
            Ok((corpus, None))
        }
        None => {
            let (corpus, truth) = usage(synth_corpus(&settings.synth))?;
            Ok((corpus, Some(truth)))
        }
    }
}

fn chain_config(s: &ChainSettings) -> Result<ChainConfig, Failure> {
    check(s.sweeps > s.burn_in, "--sweeps must exceed --burn-in")?;
    Ok(ChainConfig {
        sweeps: s.sweeps,
        burn_in: s.burn_in,
        hyper_interval: s.hyper_interval,
        initial_hypers: usage(HyperParams::new(s.beta, s.beta1, s.beta0))?,
        init: s.init,
        slice: s.slice.clone(),
        seed: 0,
    })
}

fn document_prior(kind: PriorKind, theta: f64) -> Result<PriorSpec, Failure> {
    check(
        kind != PriorKind::PitmanYor,
        "the document model supports the dp and up priors only",
    )?;
    usage(PriorSpec::new(kind, theta, 0.0))
}

pub fn exchangeability(s: &ExchangeabilitySettings, ctx: &RunContext) -> Result<(), Failure> {
    check(s.chains >= 2, "--chains must be at least 2")?;
    check(s.orderings >= 2, "--orderings must be at least 2")?;
    check(!s.theta.is_empty(), "--theta needs at least one value")?;
    let base = document_prior(s.prior, s.theta[0])?;
    for &theta in &s.theta {
        document_prior(s.prior, theta)?;
    }
    let config = chain_config(&s.chain)?;
    let mut dir = runtime(RunDir::open(&s.out, ctx.force))?;
    let (corpus, _) = load_corpus(&s.corpus, &mut dir)?;
    let studies = runtime(
        run_theta_grid(&base, &s.theta, &corpus, s.chains, s.orderings, &config, ctx.seed).map_err(Into::into),
    )?;

    let mut ordering = Csv::new(&["theta", "partition_id", "between_ordering_sd"]);
    let mut partition = Csv::new(&["theta", "between_partition_sd"]);
    let mut summary = Csv::new(&["theta", "mean_between_ordering_sd", "between_partition_sd"]);
    for study in &studies {
        let theta = num(study.spec.theta());
        for (i, sd) in study.per_partition_ordering_sd.iter().enumerate() {
            ordering.row(&[theta.clone(), i.to_string(), num(*sd)]);
        }
        partition.row(&[theta.clone(), num(study.between_partition_sd)]);
        summary.row(&[theta, num(study.mean_ordering_sd()), num(study.between_partition_sd)]);
    }
    runtime(dir.write("ordering_sd.csv", &ordering.into_string()))?;
    runtime(dir.write("partition_sd.csv", &partition.into_string()))?;
    runtime(dir.write("sd_summary.csv", &summary.into_string()))?;
    runtime(dir.write_json("studies.json", &studies))?;
    runtime(dir.finish("exchangeability", ctx.seed, ctx.jobs, echo(s, ctx.seed)))
}

#[derive(Serialize)]
struct TraceRow {
    iteration: u64,
    num_clusters: usize,
    log_prior: f64,
    log_likelihood: f64,
    hypers: HyperParams,
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    checkpoint: String,
    final_num_clusters: usize,
    mean_num_clusters: f64,
    final_hypers: HyperParams,
    map_iteration: u64,
    map_log_posterior: f64,
    map_partition: Partition,
    /// Pairwise agreement of the highest-posterior sample with the
    /// generating clusters (synthetic corpora only).
    map_rand_index: Option<f64>,
    trace: Vec<TraceRow>,
}

#[derive(Serialize)]
struct ClusterSummary {
    prior: PriorSpec,
    documents: usize,
    vocab_size: usize,
    tokens: usize,
    corpus_hash: String,
    chains: Vec<ChainSummary>,
}

pub const TRAINING_CORPUS: &str = "corpus.json";

pub fn cluster(s: &ClusterSettings, ctx: &RunContext) -> Result<(), Failure> {
    check(s.chains >= 1, "--chains must be at least 1")?;
    let prior = document_prior(s.prior, s.theta)?;
    let config = chain_config(&s.chain)?;
    let mut dir = runtime(RunDir::open(&s.out, ctx.force))?;
    let (corpus, truth) = load_corpus(&s.corpus, &mut dir)?;
    let runs = runtime(run_chains(&corpus, &prior, &config, s.chains, ctx.seed).map_err(Into::into))?;
    let data = PreparedCorpus::new(&corpus);

    runtime(save_snapshot(&corpus, &dir.root().join(TRAINING_CORPUS)).map_err(Into::into))?;
    dir.record(TRAINING_CORPUS);
    let mut chains = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let name = format!("chain_{i}.json");
        runtime(dir.write_json(&name, &run.final_state.checkpoint(&prior, &data)))?;
        let map = run.map_sample().expect("sweeps exceed burn-in");
        let map_rand_index = match &truth {
            Some(t) => Some(runtime(map.assignments.rand_index(t).map_err(Into::into))?),
            None => None,
        };
        chains.push(ChainSummary {
            chain: i,
            checkpoint: name,
            final_num_clusters: run.final_state.num_clusters(),
            mean_num_clusters: run.mean_num_clusters(),
            final_hypers: run.final_state.hypers(),
            map_iteration: map.iteration,
            map_log_posterior: map.log_posterior(),
            map_partition: map.assignments.clone(),
            map_rand_index,
            trace: run
                .samples
                .iter()
                .map(|x| TraceRow {
                    iteration: x.iteration,
                    num_clusters: x.num_clusters,
                    log_prior: x.log_prior,
                    log_likelihood: x.log_likelihood,
                    hypers: x.hypers,
                })
                .collect(),
        });
    }
    let summary = ClusterSummary {
        prior,
        documents: corpus.num_documents(),
        vocab_size: corpus.vocab_size(),
        tokens: corpus.num_tokens(),
        corpus_hash: data.corpus_hash().to_string(),
        chains,
    };
    runtime(dir.write_json("summary.json", &summary))?;
    runtime(dir.finish("cluster", ctx.seed, ctx.jobs, echo(s, ctx.seed)))
}

#[derive(Serialize)]
struct ChainHeldout {
    checkpoint: String,
    num_clusters: usize,
    estimate: HeldoutEstimate,
}

#[derive(Serialize)]
struct TrainedReport {
    prior: PriorSpec,
    train_documents: usize,
    test_documents: usize,
    vocab_size: usize,
    new_words: usize,
    heldout_logprob_mean: f64,
    heldout_logprob_sd: f64,
    mean_num_clusters: f64,
    num_clusters_sd: f64,
    chains: Vec<ChainHeldout>,
}

pub fn evaluate(s: &EvaluateSettings, ctx: &RunContext) -> Result<(), Failure> {
    check(s.particles >= 1, "--particles must be at least 1")?;
    check(s.permutations >= 1, "--permutations must be at least 1")?;
    let eval = EvalConfig {
        particles: s.particles,
        test_permutations: s.permutations,
        seed: ctx.seed,
        resample: s.resample,
    };
    match &s.trained {
        Some(run) => {
            let test = s
                .test
                .as_ref()
                .ok_or_else(|| Failure::Usage(anyhow!("--trained needs --test")))?;
            evaluate_trained(run, test, &s.corpus.tokenizer, &eval, s, ctx)
        }
        None => {
            check(s.test.is_none(), "--test needs --trained")?;
            check(s.chains >= 1, "--chains must be at least 1")?;
            check(!s.theta.is_empty() && !s.priors.is_empty(), "need at least one prior and theta")?;
            for &kind in &s.priors {
                for &theta in &s.theta {
                    document_prior(kind, theta)?;
                }
            }
            check(
                s.train_fraction > 0.0 && s.train_fraction < 1.0,
                "--train-fraction must lie in (0, 1)",
            )?;
            let config = ComparisonConfig {
                split: SplitConfig {
                    train_fraction: s.train_fraction,
                    seed: derive_seed(ctx.seed, &[0]),
                },
                priors: s.priors.clone(),
                theta_grid: s.theta.clone(),
                chains: s.chains,
                chain: chain_config(&s.chain)?,
                eval,
                seed: derive_seed(ctx.seed, &[1]),
            };
            let mut dir = runtime(RunDir::open(&s.out, ctx.force))?;
            let (corpus, _) = load_corpus(&s.corpus, &mut dir)?;
            let report = runtime(compare_priors_heldout(&corpus, &config).map_err(Into::into))?;
            let mut table = Csv::new(&[
                "process",
                "theta",
                "heldout_logprob_mean",
                "heldout_logprob_sd",
                "mean_num_clusters",
                "num_clusters_sd",
            ]);
            for cell in &report.cells {
                table.row(&[
                    cell.prior.kind().short_name().to_string(),
                    num(cell.prior.theta()),
                    num(cell.heldout_logprob_mean),
                    num(cell.heldout_logprob_sd),
                    num(cell.mean_num_clusters),
                    num(cell.num_clusters_sd),
                ]);
            }
            runtime(dir.write_json("heldout.json", &report))?;
            runtime(dir.write("heldout.csv", &table.into_string()))?;
            runtime(dir.finish("evaluate", ctx.seed, ctx.jobs, echo(s, ctx.seed)))
        }
    }
}

fn checkpoints(run: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(run).with_context(|| format!("cannot read {}", run.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(index) = name
            .strip_prefix("chain_")
            .and_then(|rest| rest.strip_suffix(".json"))
            .and_then(|i| i.parse().ok())
        {
            found.push((index, path));
        }
    }
    if found.is_empty() {
        bail!("no chain checkpoints in {}", run.display());
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn evaluate_trained(
    run: &Path,
    test_path: &Path,
    tokenizer: &TokenizerConfig,
    eval: &EvalConfig,
    s: &EvaluateSettings,
    ctx: &RunContext,
) -> Result<(), Failure> {
    let mut dir = runtime(RunDir::open(&s.out, ctx.force))?;
    let corpus_path = run.join(TRAINING_CORPUS);
    let train = runtime(npclust::corpus_io::load_snapshot(&corpus_path).map_err(Into::into))?;
    runtime(dir.add_input(&corpus_path))?;
    let text = runtime(fs::read(test_path).with_context(|| format!("cannot read {}", test_path.display())))?;
    let text = runtime(String::from_utf8(text).with_context(|| format!("{} is not UTF-8", test_path.display())))?;
    runtime(dir.add_input(test_path))?;
    // unseen test words extend the vocabulary before scoring
    let (extended, test) = train.extend_with_text(&text, tokenizer);

    let mut prior = None;
    let mut chains = Vec::new();
    for (i, path) in runtime(checkpoints(run))?.into_iter().enumerate() {
        let bytes = runtime(fs::read(&path).with_context(|| format!("cannot read {}", path.display())))?;
        let checkpoint: ChainCheckpoint =
            runtime(serde_json::from_slice(&bytes).with_context(|| format!("malformed {}", path.display())))?;
        runtime(dir.add_input(&path))?;
        let state = runtime(ChainState::from_checkpoint(&checkpoint, &train).map_err(Into::into))?;
        if prior.is_some_and(|p| p != checkpoint.prior) {
            return Err(Failure::Runtime(anyhow!("checkpoints in {} use different priors", run.display())));
        }
        prior = Some(checkpoint.prior);
        let partition = state.partition();
        let counts = runtime(CountState::from_assignments(&extended, &partition).map_err(Into::into))?;
        let model = runtime(TrainedModel::new(counts, state.hypers(), checkpoint.prior).map_err(Into::into))?;
        let cfg = EvalConfig {
            seed: derive_seed(eval.seed, &[i as u64]),
            ..eval.clone()
        };
        let estimate = runtime(heldout_log_prob(&test, &model, &cfg).map_err(Into::into))?;
        chains.push(ChainHeldout {
            checkpoint: path.file_name().unwrap().to_string_lossy().into_owned(),
            num_clusters: partition.num_clusters(),
            estimate,
        });
    }
    let means: Vec<f64> = chains.iter().map(|c| c.estimate.mean).collect();
    let ks: Vec<f64> = chains.iter().map(|c| c.num_clusters as f64).collect();
    let (heldout_logprob_mean, heldout_logprob_sd) = mean_sd(&means);
    let (mean_num_clusters, num_clusters_sd) = mean_sd(&ks);
    let report = TrainedReport {
        prior: prior.expect("at least one checkpoint"),
        train_documents: train.num_documents(),
        test_documents: test.num_documents(),
        vocab_size: extended.vocab_size(),
        new_words: extended.vocab_size() - train.vocab_size(),
        heldout_logprob_mean,
        heldout_logprob_sd,
        mean_num_clusters,
        num_clusters_sd,
        chains,
    };
    runtime(dir.write_json("heldout.json", &report))?;
    runtime(dir.finish("evaluate", ctx.seed, ctx.jobs, echo(s, ctx.seed)))
}

/// Effective settings with the resolved seed, for the manifest.
fn echo<T: Serialize>(settings: &T, seed: u64) -> serde_json::Value {
    let mut value = serde_json::to_value(settings).expect("settings serialize");
    if let Some(obj) = value.as_object_mut() {
        obj.insert("seed".into(), seed.into());
    }
    value
}

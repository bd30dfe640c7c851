//! Held-out log-probability of test documents given a trained chain.
//!
//! Test documents are scored after all training documents, in a chosen
//! order, with the training assignments and hyperparameters frozen. The
//! quantity is `log sum_{c_test} P(W_test, c_test | W_train, c_train)`.
//! [`left_to_right_log_prob`] estimates it with a particle scheme; for very
//! small test sets [`exact_heldout_log_prob`] sums over every assignment.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{split_corpus, Corpus};
use crate::doc_model::{doc_log_likelihood, in_doc_prefix, run_chains, ChainConfig, ChainState, CountState, HyperParams};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, mean_sd, sample_log_weights};
use crate::prior_process::{PriorKind, PriorSpec};
use crate::rng::{derive_seed, RandomStream};

/// Largest test set the exact oracle will enumerate.
pub const EXACT_LIMIT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub particles: usize,
    pub test_permutations: usize,
    pub seed: u64,
    /// Resample particles in proportion to their predictive weight before
    /// each assignment. Without it the estimate is biased downwards.
    pub resample: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            test_permutations: 20,
            seed: 0,
            resample: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidArgument("particles must be >= 1".into()));
        }
        if self.test_permutations == 0 {
            return Err(Error::InvalidArgument("test_permutations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Frozen training state: counts of the training documents under one
/// partition, the hyperparameters and the prior.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    counts: CountState,
    hypers: HyperParams,
    prior: PriorSpec,
}

impl TrainedModel {
    pub fn new(counts: CountState, hypers: HyperParams, prior: PriorSpec) -> Result<Self> {
        hypers.validate()?;
        if prior.kind() == PriorKind::PitmanYor {
            return Err(Error::UnsupportedPrior { prior: "Pitman-Yor" });
        }
        Ok(Self { counts, hypers, prior })
    }

    pub fn from_state(state: &ChainState, prior: PriorSpec) -> Result<Self> {
        Self::new(state.counts().clone(), state.hypers(), prior)
    }

    pub fn counts(&self) -> &CountState {
        &self.counts
    }

    pub fn hypers(&self) -> HyperParams {
        self.hypers
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn check_test(&self, test: &Corpus) -> Result<()> {
        if test.vocab_size() != self.counts.vocab_size() {
            return Err(Error::InvalidArgument(format!(
                "test vocabulary has {} words, training counts have {}",
                test.vocab_size(),
                self.counts.vocab_size()
            )));
        }
        Ok(())
    }

    /// Log prior of joining each cluster of `docs` (in order) and of a new
    /// cluster, for a document arriving after `seen` documents.
    fn log_prior(&self, docs: &[usize], seen: usize) -> Vec<f64> {
        let theta = self.prior.theta();
        match self.prior.kind() {
            PriorKind::Uniform => {
                let denom = (docs.len() as f64 + theta).ln();
                let mut out = vec![-denom; docs.len()];
                out.push(theta.ln() - denom);
                out
            }
            _ => {
                let denom = (seen as f64 + theta).ln();
                docs.iter()
                    .map(|&n| (n as f64).ln() - denom)
                    .chain(std::iter::once(theta.ln() - denom))
                    .collect()
            }
        }
    }
}

/// Exact held-out log-probability of `test` scored in its stored order, by
/// enumerating every assignment sequence of the test documents.
pub fn exact_heldout_log_prob(test: &Corpus, trained: &TrainedModel) -> Result<f64> {
    trained.check_test(test)?;
    let n = test.num_documents();
    if n > EXACT_LIMIT {
        return Err(Error::TooLarge {
            what: "test documents",
            got: n,
            limit: EXACT_LIMIT,
        });
    }
    let mut counts = trained.counts.clone();
    let seen = counts.num_documents();
    let mut terms = Vec::new();
    enumerate(test, trained, 0, seen, &mut counts, 0.0, &mut terms)?;
    Ok(log_sum_exp(&terms))
}

fn enumerate(
    test: &Corpus,
    trained: &TrainedModel,
    d: usize,
    seen: usize,
    counts: &mut CountState,
    acc: f64,
    terms: &mut Vec<f64>,
) -> Result<()> {
    if d == test.num_documents() {
        terms.push(acc);
        return Ok(());
    }
    let doc = test.document(d);
    let docs: Vec<usize> = (0..counts.num_clusters()).map(|c| counts.cluster_docs(c)).collect();
    let prior = trained.log_prior(&docs, seen);
    for (c, lp) in prior.iter().enumerate() {
        let existing = c < docs.len();
        let ll = doc_log_likelihood(doc, existing.then_some(c), counts, &trained.hypers)?;
        let mut next = counts.clone();
        let target = if existing { c } else { next.open_cluster() };
        next.add_document(doc, target);
        enumerate(test, trained, d + 1, seen + 1, &mut next, acc + lp + ll, terms)?;
    }
    Ok(())
}

/// Cluster-level counts contributed by one particle's test documents.
#[derive(Debug, Clone, Default)]
struct ClusterDelta {
    words: HashMap<u32, u32>,
    total: u64,
    docs: usize,
}

#[derive(Debug, Clone)]
struct Particle {
    /// One slot per cluster: training clusters first, then clusters opened
    /// by this particle's test documents.
    deltas: Vec<Option<Arc<ClusterDelta>>>,
}

/// Precomputed per-document quantities shared by all particles.
struct DocTerms {
    words: Vec<u32>,
    prefix: Vec<u32>,
    p_corpus: Vec<f64>,
    /// Log-likelihood under each training cluster without test additions,
    /// then under a new cluster.
    base: Vec<f64>,
}

impl DocTerms {
    fn new(doc: &[u32], trained: &TrainedModel, corpus_extra: &[u32], extra_total: u64) -> Self {
        let h = trained.hypers;
        let counts = &trained.counts;
        let vocab = counts.vocab_size() as f64;
        let prefix = in_doc_prefix(doc);
        let corpus_total = (counts.corpus_total() + extra_total) as f64;
        let p_corpus: Vec<f64> = doc
            .iter()
            .zip(&prefix)
            .enumerate()
            .map(|(n, (&w, &a))| {
                let nw = (counts.corpus_count(w) + corpus_extra[w as usize] as u64) as f64 + a as f64;
                (nw + h.beta0 / vocab) / (corpus_total + n as f64 + h.beta0)
            })
            .collect();
        let mut terms = Self {
            words: doc.to_vec(),
            prefix,
            p_corpus,
            base: Vec::new(),
        };
        let base: Vec<f64> = (0..counts.num_clusters())
            .map(|c| terms.log_lik(|w| counts.cluster_count(c, w), counts.cluster_total(c), &h))
            .chain(std::iter::once(terms.log_lik(|_| 0, 0, &h)))
            .collect();
        terms.base = base;
        terms
    }

    fn log_lik(&self, cluster_w: impl Fn(u32) -> u32, cluster_total: u64, h: &HyperParams) -> f64 {
        self.words
            .iter()
            .zip(&self.prefix)
            .zip(&self.p_corpus)
            .enumerate()
            .map(|(n, ((&w, &a), &pc))| {
                let a = a as f64;
                let n = n as f64;
                let p_cluster = (cluster_w(w) as f64 + a + h.beta1 * pc) / (cluster_total as f64 + n + h.beta1);
                ((a + h.beta * p_cluster) / (n + h.beta)).ln()
            })
            .sum()
    }
}

impl Particle {
    /// Log prior plus log-likelihood of `doc` for every candidate slot and a
    /// new cluster.
    fn candidate_weights(&self, doc: &DocTerms, trained: &TrainedModel, seen: usize) -> Vec<f64> {
        let counts = &trained.counts;
        let k_train = counts.num_clusters();
        let docs: Vec<usize> = self
            .deltas
            .iter()
            .enumerate()
            .map(|(c, delta)| {
                let train = if c < k_train { counts.cluster_docs(c) } else { 0 };
                train + delta.as_ref().map_or(0, |d| d.docs)
            })
            .collect();
        let mut weights = trained.log_prior(&docs, seen);
        let h = &trained.hypers;
        for (c, w) in weights.iter_mut().enumerate() {
            let ll = match self.deltas.get(c) {
                None => doc.base[k_train],
                Some(None) => doc.base[c],
                Some(Some(delta)) => {
                    let (train_w, train_total) = if c < k_train {
                        (Some(c), counts.cluster_total(c))
                    } else {
                        (None, 0)
                    };
                    doc.log_lik(
                        |word| {
                            train_w.map_or(0, |t| counts.cluster_count(t, word))
                                + delta.words.get(&word).copied().unwrap_or(0)
                        },
                        train_total + delta.total,
                        h,
                    )
                }
            };
            *w += ll;
        }
        weights
    }

    fn assign(&mut self, slot: usize, doc: &[u32]) {
        if slot == self.deltas.len() {
            self.deltas.push(None);
        }
        let delta = Arc::make_mut(self.deltas[slot].get_or_insert_with(Default::default));
        for &w in doc {
            *delta.words.entry(w).or_insert(0) += 1;
        }
        delta.total += doc.len() as u64;
        delta.docs += 1;
    }
}

/// Multinomial resampling of `log_weights.len()` indices.
fn resample(log_weights: &[f64], rng: &mut RandomStream) -> Vec<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(log_weights.len());
    let mut acc = 0.0;
    for lw in log_weights {
        acc += (lw - max).exp();
        cdf.push(acc);
    }
    (0..log_weights.len())
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
        })
        .collect()
}

/// Left-to-right particle estimate of the held-out log-probability with the
/// test documents scored in the order `order`.
///
/// For each test document every particle computes
/// `s_r = sum_c P(c | earlier) P(w_d | c, earlier)`; the estimate adds
/// `log mean_r s_r`. With `resample` set, particles are then resampled in
/// proportion to `s_r`, and each particle draws the document's cluster in
/// proportion to its summands. A single test document is scored exactly.
pub fn left_to_right_log_prob(
    test: &Corpus,
    order: &[usize],
    trained: &TrainedModel,
    particles: usize,
    resample_particles: bool,
    rng: &mut RandomStream,
) -> Result<f64> {
    trained.check_test(test)?;
    if particles == 0 {
        return Err(Error::InvalidArgument("particles must be >= 1".into()));
    }
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..test.num_documents()).collect::<Vec<_>>() {
        return Err(Error::InvalidPermutation(format!(
            "order must permute 0..{}",
            test.num_documents()
        )));
    }
    let k_train = trained.counts.num_clusters();
    let mut pool = vec![
        Particle {
            deltas: vec![None; k_train],
        };
        particles
    ];
    let mut corpus_extra = vec![0u32; trained.counts.vocab_size()];
    let mut extra_total = 0u64;
    let mut seen = trained.counts.num_documents();
    let mut estimate = 0.0;
    for &d in order {
        let doc = test.document(d);
        let terms = DocTerms::new(doc, trained, &corpus_extra, extra_total);
        let weights: Vec<Vec<f64>> = pool.iter().map(|p| p.candidate_weights(&terms, trained, seen)).collect();
        let totals: Vec<f64> = weights.iter().map(|w| log_sum_exp(w)).collect();
        estimate += log_sum_exp(&totals) - (particles as f64).ln();
        let parents: Vec<usize> = if resample_particles {
            resample(&totals, rng)
        } else {
            (0..particles).collect()
        };
        pool = parents
            .iter()
            .map(|&r| {
                let mut p = pool[r].clone();
                let slot = sample_log_weights(&weights[r], rng);
                p.assign(slot, doc);
                p
            })
            .collect();
        for &w in doc {
            corpus_extra[w as usize] += 1;
        }
        extra_total += doc.len() as u64;
        seen += 1;
    }
    Ok(estimate)
}

/// Held-out estimates over several orderings of the test documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutEstimate {
    /// One estimate per ordering; ordering 0 is the stored order.
    pub per_permutation: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Runs [`left_to_right_log_prob`] on `config.test_permutations` orderings.
/// Ordering `p` uses the stream derived from `(config.seed, p)`; ordering 0
/// keeps the stored order and the rest are uniform shuffles.
pub fn heldout_log_prob(test: &Corpus, trained: &TrainedModel, config: &EvalConfig) -> Result<HeldoutEstimate> {
    config.validate()?;
    let per_permutation = (0..config.test_permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = RandomStream::derive(config.seed, &[p as u64]);
            let mut order: Vec<usize> = (0..test.num_documents()).collect();
            if p > 0 {
                order.shuffle(&mut rng);
            }
            left_to_right_log_prob(test, &order, trained, config.particles, config.resample, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_sd(&per_permutation);
    Ok(HeldoutEstimate {
        per_permutation,
        mean,
        sd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

/// One (prior, theta) cell of a held-out comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutCell {
    pub prior: PriorSpec,
    /// Mean over chains of each chain's average over test orderings.
    pub heldout_logprob_mean: f64,
    /// Standard deviation of the per-chain values.
    pub heldout_logprob_sd: f64,
    pub heldout_logprob_per_chain: Vec<f64>,
    /// Mean over chains of each chain's posterior mean cluster count.
    pub mean_num_clusters: f64,
    pub num_clusters_sd: f64,
    pub num_clusters_per_chain: Vec<f64>,
    /// Across-ordering standard deviation of each chain's estimates.
    pub permutation_sd_per_chain: Vec<f64>,
}

impl HeldoutCell {
    /// Standard error of the held-out mean across chains.
    pub fn heldout_logprob_se(&self) -> f64 {
        self.heldout_logprob_sd / (self.heldout_logprob_per_chain.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub split: SplitConfig,
    pub priors: Vec<PriorKind>,
    pub theta_grid: Vec<f64>,
    pub chains: usize,
    pub chain: ChainConfig,
    pub eval: EvalConfig,
    /// Seeds the chains; cell `(i, j)` uses the seed derived from
    /// `(seed, i, j)`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutReport {
    pub config: ComparisonConfig,
    pub train_documents: usize,
    pub test_documents: usize,
    pub cells: Vec<HeldoutCell>,
}

/// Held-out estimate for each chain's final state.
pub fn evaluate_chains(
    test: &Corpus,
    states: &[&ChainState],
    prior: &PriorSpec,
    config: &EvalConfig,
) -> Result<Vec<HeldoutEstimate>> {
    states
        .par_iter()
        .enumerate()
        .map(|(i, state)| {
            let trained = TrainedModel::from_state(state, *prior)?;
            let cfg = EvalConfig {
                seed: derive_seed(config.seed, &[i as u64]),
                ..config.clone()
            };
            heldout_log_prob(test, &trained, &cfg)
        })
        .collect()
}

/// Splits `corpus`, trains `chains` chains for every prior and theta, and
/// scores the test split with each chain's final state.
pub fn compare_priors_heldout(corpus: &Corpus, config: &ComparisonConfig) -> Result<HeldoutReport> {
    if config.chains == 0 || config.theta_grid.is_empty() || config.priors.is_empty() {
        return Err(Error::InvalidArgument("need at least one chain, theta and prior".into()));
    }
    config.eval.validate()?;
    let (train, test) = split_corpus(corpus, config.split.train_fraction, config.split.seed)?;
    let mut cells = Vec::new();
    for (i, &kind) in config.priors.iter().enumerate() {
        for (j, &theta) in config.theta_grid.iter().enumerate() {
            let prior = PriorSpec::new(kind, theta, 0.0)?;
            let seed = derive_seed(config.seed, &[i as u64, j as u64]);
            let runs = run_chains(&train, &prior, &config.chain, config.chains, seed)?;
            let states: Vec<&ChainState> = runs.iter().map(|r| &r.final_state).collect();
            let estimates = evaluate_chains(&test, &states, &prior, &config.eval)?;
            let per_chain: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
            let clusters: Vec<f64> = runs.iter().map(|r| r.mean_num_clusters()).collect();
            let (heldout_mean, heldout_sd) = mean_sd(&per_chain);
            let (k_mean, k_sd) = mean_sd(&clusters);
            cells.push(HeldoutCell {
                prior,
                heldout_logprob_mean: heldout_mean,
                heldout_logprob_sd: heldout_sd,
                heldout_logprob_per_chain: per_chain,
                mean_num_clusters: k_mean,
                num_clusters_sd: k_sd,
                num_clusters_per_chain: clusters,
                permutation_sd_per_chain: estimates.iter().map(|e| e.sd).collect(),
            });
        }
    }
    Ok(HeldoutReport {
        config: config.clone(),
        train_documents: train.num_documents(),
        test_documents: test.num_documents(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::Vocabulary;
    use crate::prior_process::Partition;

    fn corpus(docs: &[&[u32]], w: usize) -> Corpus {
        let vocab = Vocabulary::from_words((0..w).map(|i| format!("w{i}")).collect()).unwrap();
        Corpus::new(docs.iter().map(|d| d.to_vec()).collect(), vocab).unwrap()
    }

    fn trained(prior: PriorSpec) -> (TrainedModel, Corpus) {
        let train = corpus(&[&[0, 0, 1], &[1, 0], &[2, 3, 3], &[3, 2], &[0, 1, 1]], 4);
        let p = Partition::from_labels(&[0, 0, 1, 1, 0]);
        let counts = CountState::from_assignments(&train, &p).unwrap();
        let h = HyperParams::new(0.8, 1.5, 2.0).unwrap();
        (TrainedModel::new(counts, h, prior).unwrap(), train)
    }

    #[test]
    fn empty_test_set_is_zero() {
        let (model, _) = trained(PriorSpec::dirichlet(1.0).unwrap());
        let empty = corpus(&[], 4);
        assert_eq!(exact_heldout_log_prob(&empty, &model).unwrap(), 0.0);
        let mut rng = RandomStream::from_seed(0);
        assert_eq!(left_to_right_log_prob(&empty, &[], &model, 5, true, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn single_document_three_term_sum() {
        for prior in [PriorSpec::dirichlet(1.5).unwrap(), PriorSpec::uniform(1.5).unwrap()] {
            let (model, _) = trained(prior);
            let test = corpus(&[&[0, 3, 0]], 4);
            let doc = test.document(0);
            let h = model.hypers();
            let counts = model.counts();
            let lik = |c| doc_log_likelihood(doc, c, counts, &h).unwrap().exp();
            let (p0, p1, pn) = match prior.kind() {
                PriorKind::Dirichlet => (3.0 / 6.5, 2.0 / 6.5, 1.5 / 6.5),
                _ => (1.0 / 3.5, 1.0 / 3.5, 1.5 / 3.5),
            };
            let hand = (p0 * lik(Some(0)) + p1 * lik(Some(1)) + pn * lik(None)).ln();
            assert!((exact_heldout_log_prob(&test, &model).unwrap() - hand).abs() < 1e-12);
            for seed in 0..3 {
                let mut rng = RandomStream::from_seed(seed);
                let est = left_to_right_log_prob(&test, &[0], &model, 1, true, &mut rng).unwrap();
                assert!((est - hand).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_many_documents_for_oracle() {
        let (model, _) = trained(PriorSpec::dirichlet(1.0).unwrap());
        let test = corpus(&[&[0u32][..]; 7], 4);
        assert!(matches!(
            exact_heldout_log_prob(&test, &model),
            Err(Error::TooLarge { got: 7, .. })
        ));
    }

    #[test]
    fn large_particle_count_matches_oracle() {
        let test = corpus(&[&[0, 1], &[3, 3, 2], &[1, 0, 0]], 4);
        for prior in [PriorSpec::dirichlet(1.0).unwrap(), PriorSpec::uniform(2.0).unwrap()] {
            let (model, _) = trained(prior);
            let exact = exact_heldout_log_prob(&test, &model).unwrap();
            let mut rng = RandomStream::from_seed(11);
            let est = left_to_right_log_prob(&test, &[0, 1, 2], &model, 10_000, true, &mut rng).unwrap();
            assert!((est - exact).abs() < 0.01, "{est} vs {exact}");
        }
    }

    #[test]
    fn estimate_follows_the_given_order() {
        let test = corpus(&[&[0, 1], &[3, 3, 2], &[1, 0, 0]], 4);
        let reordered = test.subset(&[2, 0, 1]);
        let (model, _) = trained(PriorSpec::uniform(0.5).unwrap());
        let exact = exact_heldout_log_prob(&reordered, &model).unwrap();
        let mut rng = RandomStream::from_seed(2);
        let est = left_to_right_log_prob(&test, &[2, 0, 1], &model, 10_000, true, &mut rng).unwrap();
        assert!((est - exact).abs() < 0.01, "{est} vs {exact}");
    }

    #[test]
    fn rejects_bad_order_and_vocabulary() {
        let (model, _) = trained(PriorSpec::uniform(1.0).unwrap());
        let test = corpus(&[&[0], &[1]], 4);
        let mut rng = RandomStream::from_seed(0);
        assert!(left_to_right_log_prob(&test, &[0, 0], &model, 3, true, &mut rng).is_err());
        let wide = corpus(&[&[0]], 5);
        assert!(exact_heldout_log_prob(&wide, &model).is_err());
        assert!(TrainedModel::new(CountState::new(4), HyperParams::default(), PriorSpec::pitman_yor(1.0, 0.3).unwrap()).is_err());
    }

    #[test]
    fn permutations_are_deterministic_and_first_is_identity() {
        let test = corpus(&[&[0, 1], &[3, 3, 2], &[1, 0, 0], &[2]], 4);
        let (model, _) = trained(PriorSpec::uniform(1.0).unwrap());
        let cfg = EvalConfig {
            particles: 50,
            test_permutations: 4,
            seed: 5,
            resample: true,
        };
        let a = heldout_log_prob(&test, &model, &cfg).unwrap();
        let b = heldout_log_prob(&test, &model, &cfg).unwrap();
        assert_eq!(a, b);
        let mut rng = RandomStream::derive(5, &[0]);
        let first = left_to_right_log_prob(&test, &[0, 1, 2, 3], &model, 50, true, &mut rng).unwrap();
        assert_eq!(a.per_permutation[0], first);
        assert!(a.sd >= 0.0);
        assert!(heldout_log_prob(&test, &model, &EvalConfig { particles: 0, ..cfg }).is_err());
    }
}
